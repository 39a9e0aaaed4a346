#include "ppgaf/dataset.hpp"

#include <cstring>

#include "ppgaf/errors.hpp"
#include "ppgaf/util.hpp"

namespace ppgaf {

using nlohmann::json;

const char* to_string(Label l) {
    switch (l) {
        case Label::AF: return "AF";
        case Label::PVC: return "PVC";
        case Label::NSR: return "NSR";
    }
    return "NSR";
}

const char* to_string(Provenance p) { return p == Provenance::ALARM ? "ALARM" : "SYNTH"; }

Label label_from_string(const std::string& s) {
    if (s == "AF") return Label::AF;
    if (s == "PVC") return Label::PVC;
    if (s == "NSR") return Label::NSR;
    throw ConfigError("unknown label: " + s);
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "ALARM") return Provenance::ALARM;
    if (s == "SYNTH") return Provenance::SYNTH;
    throw ConfigError("unknown provenance: " + s);
}

size_t Dataset::segment_len() const {
    if (records.empty()) return 0;
    size_t n = records.front().samples.size();
    for (const auto& r : records)
        if (r.samples.size() != n)
            throw ShapeError("dataset has mixed segment lengths: " + std::to_string(n) + " vs " +
                             std::to_string(r.samples.size()));
    return n;
}

std::map<std::string, size_t> Dataset::per_patient_counts() const {
    std::map<std::string, size_t> out;
    for (const auto& r : records) ++out[r.patient_id];
    return out;
}

std::map<std::string, size_t> Dataset::per_class_counts() const {
    std::map<std::string, size_t> out;
    for (const auto& r : records) ++out[to_string(r.label)];
    return out;
}

std::vector<std::string> Dataset::patient_ids_sorted() const {
    std::vector<std::string> ids;
    for (const auto& [id, n] : per_patient_counts()) ids.push_back(id);
    return ids;
}

static constexpr char kMagic[5] = {'P', 'P', 'G', 'D', '1'};

static json manifest_for(const Dataset& ds) {
    json records = json::array();
    uint64_t offset = 0;
    for (const auto& r : ds.records) {
        json rec;
        rec["patient_id"] = r.patient_id;
        rec["label"] = to_string(r.label);
        if (r.true_label) rec["true_label"] = to_string(*r.true_label);
        rec["quality"] = to_string(r.quality.value);
        rec["quality_source"] = to_string(r.quality.source);
        rec["provenance"] = to_string(r.provenance);
        rec["offset"] = offset;
        rec["n_samples"] = r.samples.size();
        rec["fs_hz"] = r.fs_hz;
        rec["t_start_ms"] = r.t_start_ms;
        records.push_back(std::move(rec));
        offset += 4 * r.samples.size();
    }

    json m;
    m["format"] = "PPGD1";
    m["version"] = 1;
    m["n_records"] = ds.records.size();
    m["counts_per_class"] = ds.per_class_counts();
    m["counts_per_patient"] = ds.per_patient_counts();
    if (!ds.gen_params.is_null()) m["gen_params"] = ds.gen_params;
    m["records"] = std::move(records);
    return m;
}

std::string ppgd1_manifest_json(const Dataset& ds) { return manifest_for(ds).dump(); }

void write_ppgd1(const std::string& path, const Dataset& ds) {
    const std::string ms = ppgd1_manifest_json(ds);

    size_t blob = 0;
    for (const auto& r : ds.records) blob += 4 * r.samples.size();

    std::vector<uint8_t> bytes;
    bytes.reserve(5 + 4 + ms.size() + blob);
    bytes.insert(bytes.end(), kMagic, kMagic + 5);
    put_u32_le(bytes, static_cast<uint32_t>(ms.size()));
    bytes.insert(bytes.end(), ms.begin(), ms.end());
    for (const auto& r : ds.records) append_f32_le(bytes, r.samples.data(), r.samples.size());
    write_file_bytes(path, bytes.data(), bytes.size());
}

Dataset read_ppgd1(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 5) != 0)
        throw IoError("PPGD1: bad magic in " + path);
    uint32_t mlen = get_u32_le(bytes.data() + 5);
    if (bytes.size() < 9 + static_cast<size_t>(mlen))
        throw IoError("PPGD1: truncated manifest in " + path);

    json m;
    try {
        m = json::parse(bytes.begin() + 9, bytes.begin() + 9 + mlen);
    } catch (const json::exception& e) {
        throw IoError("PPGD1: invalid manifest JSON in " + path + ": " + e.what());
    }

    const uint8_t* data = bytes.data() + 9 + mlen;
    const size_t data_size = bytes.size() - 9 - mlen;

    Dataset ds;
    if (m.contains("gen_params")) ds.gen_params = m["gen_params"];
    for (const auto& rec : m.at("records")) {
        DatasetRecord r;
        r.patient_id = rec.at("patient_id").get<std::string>();
        r.label = label_from_string(rec.at("label").get<std::string>());
        if (rec.contains("true_label"))
            r.true_label = label_from_string(rec.at("true_label").get<std::string>());
        r.quality.value = quality_from_string(rec.at("quality").get<std::string>());
        r.quality.source = quality_source_from_string(rec.at("quality_source").get<std::string>());
        r.provenance = provenance_from_string(rec.at("provenance").get<std::string>());
        uint64_t offset = rec.at("offset").get<uint64_t>();
        size_t n = rec.at("n_samples").get<size_t>();
        r.fs_hz = rec.at("fs_hz").get<double>();
        r.t_start_ms = rec.at("t_start_ms").get<int64_t>();
        if (offset + 4 * n > data_size) throw IoError("PPGD1: record blob out of range in " + path);
        r.samples.resize(n);
        read_f32_le(data + offset, n, r.samples.data());
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace ppgaf
