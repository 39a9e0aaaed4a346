#include "ppgaf/embedding.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

#include "ppgaf/errors.hpp"
#include "ppgaf/util.hpp"

namespace ppgaf {

using nlohmann::json;

static constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void write_emb1(const std::string& path, const Embedding& emb) {
    if (emb.data.size() != emb.n * emb.dim) throw ShapeError("EMB1: data size mismatch");
    json header;
    header["n"] = emb.n;
    header["dim"] = emb.dim;
    const std::string hs = header.dump();

    std::vector<uint8_t> bytes;
    bytes.reserve(4 + 4 + hs.size() + 4 * emb.data.size());
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    put_u32_le(bytes, static_cast<uint32_t>(hs.size()));
    bytes.insert(bytes.end(), hs.begin(), hs.end());
    append_f32_le(bytes, emb.data.data(), emb.data.size());
    write_file_bytes(path, bytes.data(), bytes.size());
}

Embedding read_emb1(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("EMB1: bad magic in " + path);
    const uint32_t hlen = get_u32_le(bytes.data() + 4);
    if (bytes.size() < 8 + static_cast<size_t>(hlen))
        throw IoError("EMB1: truncated header in " + path);
    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    } catch (const json::exception& e) {
        throw IoError("EMB1: invalid header JSON in " + path + ": " + e.what());
    }

    Embedding emb;
    emb.n = header.at("n").get<size_t>();
    emb.dim = header.at("dim").get<size_t>();
    if (bytes.size() != 8 + hlen + 4 * emb.n * emb.dim)
        throw IoError("EMB1: payload size mismatch in " + path);
    emb.data.resize(emb.n * emb.dim);
    read_f32_le(bytes.data() + 8 + hlen, emb.data.size(), emb.data.data());
    return emb;
}

Embedding embed(Autoencoder<float>& ae, const Dataset& ds, size_t batch_size) {
    const size_t n = ds.records.size();
    const size_t len = ds.segment_len();
    if (len != ae.spec().input_len)
        throw ShapeError("embed: dataset segment length " + std::to_string(len) +
                         " != autoencoder input length " + std::to_string(ae.spec().input_len));

    Embedding emb;
    emb.n = n;
    emb.dim = ae.spec().latent_dim;
    emb.data.resize(n * emb.dim);

    std::vector<float> batch;
    for (size_t at = 0; at < n; at += batch_size) {
        const size_t bs = std::min(batch_size, n - at);
        batch.assign(bs * len, 0.0f);
        for (size_t b = 0; b < bs; ++b)
            std::memcpy(batch.data() + b * len, ds.records[at + b].samples.data(),
                        4 * len);
        std::vector<float> z = ae.encode(batch, bs, /*train=*/false);
        std::memcpy(emb.data.data() + at * emb.dim, z.data(), 4 * z.size());
    }
    return emb;
}

}  // namespace ppgaf
