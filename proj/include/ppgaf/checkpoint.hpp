// ============================================================================
// CKPT1 checkpoint container: 5-byte magic "CKPT1", u32-LE JSON spec length,
// JSON architecture spec (with a named tensor list), then the tensors as
// f32-LE blobs in spec order. Round-trips are bit-exact.
// ============================================================================

#pragma once
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "ppgaf/autoencoder.hpp"
#include "ppgaf/resnet.hpp"
#include "ppgaf/util.hpp"

namespace ppgaf {

namespace detail {

inline constexpr char kCkptMagic[5] = {'C', 'K', 'P', 'T', '1'};

inline void write_ckpt(const std::string& path, nlohmann::json spec,
                       std::vector<ParamRef<float>> params) {
    nlohmann::json tensors = nlohmann::json::array();
    size_t payload = 0;
    for (const auto& p : params) {
        tensors.push_back({{"name", p.name}, {"shape", p.shape}});
        payload += 4 * p.value->size();
    }
    spec["tensors"] = std::move(tensors);
    const std::string js = spec.dump();

    std::vector<uint8_t> bytes;
    bytes.reserve(5 + 4 + js.size() + payload);
    bytes.insert(bytes.end(), kCkptMagic, kCkptMagic + 5);
    put_u32_le(bytes, static_cast<uint32_t>(js.size()));
    bytes.insert(bytes.end(), js.begin(), js.end());
    for (const auto& p : params) append_f32_le(bytes, p.value->data(), p.value->size());
    write_file_bytes(path, bytes.data(), bytes.size());
}

inline nlohmann::json read_ckpt_spec(const std::vector<uint8_t>& bytes, const std::string& path) {
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kCkptMagic, 5) != 0)
        throw IoError("CKPT1: bad magic in " + path);
    const uint32_t slen = get_u32_le(bytes.data() + 5);
    if (bytes.size() < 9 + static_cast<size_t>(slen))
        throw IoError("CKPT1: truncated spec in " + path);
    try {
        return nlohmann::json::parse(bytes.begin() + 9, bytes.begin() + 9 + slen);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("CKPT1: invalid spec JSON in " + path + ": " + e.what());
    }
}

inline void load_tensors(const std::vector<uint8_t>& bytes, const nlohmann::json& spec,
                         std::vector<ParamRef<float>> params, const std::string& path) {
    const uint32_t slen = get_u32_le(bytes.data() + 5);
    const uint8_t* data = bytes.data() + 9 + slen;
    const size_t avail = bytes.size() - 9 - slen;

    const auto& tensors = spec.at("tensors");
    if (tensors.size() != params.size())
        throw IoError("CKPT1: tensor count mismatch in " + path);
    size_t off = 0;
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string name = tensors[i].at("name").get<std::string>();
        if (name != params[i].name)
            throw IoError("CKPT1: tensor order mismatch in " + path + ": expected " +
                          params[i].name + ", found " + name);
        const size_t n = params[i].value->size();
        if (off + 4 * n > avail) throw IoError("CKPT1: payload too short in " + path);
        read_f32_le(data + off, n, params[i].value->data());
        off += 4 * n;
    }
    if (off != avail) throw IoError("CKPT1: trailing bytes in " + path);
}

}  // namespace detail

inline void save_classifier(const std::string& path, Classifier<float>& model) {
    nlohmann::json spec;
    spec["format"] = "CKPT1";
    spec["kind"] = "classifier";
    spec["arch"] = model.spec().to_json();
    detail::write_ckpt(path, std::move(spec), model.params());
}

inline Classifier<float> load_classifier(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    const nlohmann::json spec = detail::read_ckpt_spec(bytes, path);
    if (spec.at("kind").get<std::string>() != "classifier")
        throw IoError("CKPT1: not a classifier checkpoint: " + path);
    Classifier<float> model(ArchSpec::from_json(spec.at("arch")));
    detail::load_tensors(bytes, spec, model.params(), path);
    return model;
}

inline void save_autoencoder(const std::string& path, Autoencoder<float>& model) {
    nlohmann::json spec;
    spec["format"] = "CKPT1";
    spec["kind"] = "autoencoder";
    spec["arch"] = model.spec().to_json();
    detail::write_ckpt(path, std::move(spec), model.params());
}

inline Autoencoder<float> load_autoencoder(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    const nlohmann::json spec = detail::read_ckpt_spec(bytes, path);
    if (spec.at("kind").get<std::string>() != "autoencoder")
        throw IoError("CKPT1: not an autoencoder checkpoint: " + path);
    Autoencoder<float> model(AeSpec::from_json(spec.at("arch")));
    detail::load_tensors(bytes, spec, model.params(), path);
    return model;
}

}  // namespace ppgaf
