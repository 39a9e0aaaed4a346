#include "ppgaf/waveform_io.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

#include "ppgaf/errors.hpp"
#include "ppgaf/util.hpp"

namespace ppgaf {

using nlohmann::json;

static constexpr char kMagic[5] = {'P', 'P', 'G', 'W', '1'};

void write_ppgw1(const std::string& path, const Waveform& w) {
    if (w.fs_hz <= 0.0) throw ConfigError("PPGW1: fs_hz must be positive");
    if (w.samples.empty()) throw ConfigError("PPGW1: samples must be non-empty");

    json header;
    header["patient_id"] = w.patient_id;
    header["fs_hz"] = w.fs_hz;
    header["start_time_ms"] = w.start_time_ms;
    header["n_samples"] = w.samples.size();
    const std::string hs = header.dump();

    std::vector<uint8_t> bytes;
    bytes.reserve(5 + 4 + hs.size() + 4 * w.samples.size());
    bytes.insert(bytes.end(), kMagic, kMagic + 5);
    put_u32_le(bytes, static_cast<uint32_t>(hs.size()));
    bytes.insert(bytes.end(), hs.begin(), hs.end());
    append_f32_le(bytes, w.samples.data(), w.samples.size());
    write_file_bytes(path, bytes.data(), bytes.size());
}

Waveform read_ppgw1(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 5) != 0)
        throw IoError("PPGW1: bad magic in " + path);
    uint32_t hlen = get_u32_le(bytes.data() + 5);
    if (bytes.size() < 9 + static_cast<size_t>(hlen))
        throw IoError("PPGW1: truncated header in " + path);

    json header;
    try {
        header = json::parse(bytes.begin() + 9, bytes.begin() + 9 + hlen);
    } catch (const json::exception& e) {
        throw IoError("PPGW1: invalid header JSON in " + path + ": " + e.what());
    }

    Waveform w;
    w.patient_id = header.at("patient_id").get<std::string>();
    w.fs_hz = header.at("fs_hz").get<double>();
    w.start_time_ms = header.at("start_time_ms").get<int64_t>();
    size_t n = header.at("n_samples").get<size_t>();
    if (bytes.size() != 9 + hlen + 4 * n)
        throw IoError("PPGW1: payload size mismatch in " + path);
    w.samples.resize(n);
    read_f32_le(bytes.data() + 9 + hlen, n, w.samples.data());
    if (w.fs_hz <= 0.0) throw IoError("PPGW1: non-positive fs_hz in " + path);
    return w;
}

}  // namespace ppgaf
