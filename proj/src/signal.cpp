#include "ppgaf/signal.hpp"

#include <algorithm>
#include <cmath>

#include "ppgaf/errors.hpp"

namespace ppgaf {

const char* to_string(Quality q) { return q == Quality::GOOD ? "GOOD" : "BAD"; }
const char* to_string(QualitySource s) {
    return s == QualitySource::GROUND_TRUTH ? "GROUND_TRUTH" : "HEURISTIC";
}

Quality quality_from_string(const std::string& s) {
    if (s == "GOOD") return Quality::GOOD;
    if (s == "BAD") return Quality::BAD;
    throw ConfigError("unknown quality value: " + s);
}

QualitySource quality_source_from_string(const std::string& s) {
    if (s == "GROUND_TRUTH") return QualitySource::GROUND_TRUTH;
    if (s == "HEURISTIC") return QualitySource::HEURISTIC;
    throw ConfigError("unknown quality source: " + s);
}

std::vector<Segment> segment_stream(const Waveform& w, double window_s, double overlap_s) {
    if (w.fs_hz <= 0.0) throw ConfigError("segment_stream: fs_hz must be positive");
    if (window_s * w.fs_hz < 2.0) throw ConfigError("segment_stream: window shorter than 2 samples");
    if (overlap_s < 0.0 || overlap_s >= window_s)
        throw ConfigError("segment_stream: overlap must be in [0, window)");

    const size_t win = static_cast<size_t>(std::llround(window_s * w.fs_hz));
    size_t hop = win - static_cast<size_t>(std::llround(overlap_s * w.fs_hz));
    if (hop == 0) hop = 1;

    std::vector<Segment> out;
    for (size_t start = 0; start + win <= w.samples.size(); start += hop) {
        Segment s;
        s.patient_id = w.patient_id;
        s.fs_hz = w.fs_hz;
        s.t_start_ms =
            w.start_time_ms + static_cast<int64_t>(std::llround(1000.0 * start / w.fs_hz));
        s.samples.assign(w.samples.begin() + start, w.samples.begin() + start + win);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<float> extend_by_prefix(const std::vector<float>& samples, size_t target_len) {
    if (target_len < samples.size())
        throw ConfigError("extend_by_prefix: target_len shorter than input");
    const size_t deficit = target_len - samples.size();
    if (deficit > samples.size())
        throw DeficitTooLarge("extend_by_prefix: deficit " + std::to_string(deficit) +
                              " exceeds input length " + std::to_string(samples.size()));
    std::vector<float> out = samples;
    out.insert(out.end(), samples.begin(), samples.begin() + deficit);
    return out;
}

Waveform resample(const Waveform& w, double target_fs_hz) {
    if (target_fs_hz <= 0.0) throw ConfigError("resample: target rate must be positive");
    if (w.samples.empty()) throw ConfigError("resample: empty waveform");

    Waveform out;
    out.patient_id = w.patient_id;
    out.start_time_ms = w.start_time_ms;
    out.fs_hz = target_fs_hz;

    const size_t n = w.samples.size();
    const size_t m =
        static_cast<size_t>(std::llround(static_cast<double>(n) * target_fs_hz / w.fs_hz));
    out.samples.resize(m);

    const double ratio = w.fs_hz / target_fs_hz;  // source samples per output sample
    for (size_t i = 0; i < m; ++i) {
        double pos = static_cast<double>(i) * ratio;
        if (pos >= static_cast<double>(n - 1)) {  // endpoint hold
            out.samples[i] = w.samples[n - 1];
            continue;
        }
        size_t i0 = static_cast<size_t>(pos);
        double frac = pos - static_cast<double>(i0);
        out.samples[i] = static_cast<float>((1.0 - frac) * w.samples[i0] +
                                            frac * w.samples[i0 + 1]);
    }
    return out;
}

std::vector<float> minmax_normalize(const std::vector<float>& samples) {
    if (samples.empty()) throw ConfigError("minmax_normalize: empty input");
    auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    const float mn = *mn_it, mx = *mx_it;
    std::vector<float> out(samples.size());
    if (mx > mn) {
        const float scale = mx - mn;
        for (size_t i = 0; i < samples.size(); ++i) out[i] = (samples[i] - mn) / scale;
    }
    // else: degenerate constant input stays all zeros
    return out;
}

QualityFlag estimate_quality(const Segment& seg, double sqi_threshold) {
    QualityFlag flag;
    flag.source = QualitySource::HEURISTIC;

    const size_t n = seg.samples.size();
    if (n < 4 || seg.fs_hz <= 0.0) {
        flag.value = Quality::BAD;
        return flag;
    }

    double mean = 0.0;
    for (float v : seg.samples) mean += v;
    mean /= static_cast<double>(n);

    double energy = 0.0;
    std::vector<double> centered(n);
    for (size_t i = 0; i < n; ++i) {
        centered[i] = seg.samples[i] - mean;
        energy += centered[i] * centered[i];
    }
    if (energy <= 0.0) {  // constant segment
        flag.value = Quality::BAD;
        flag.sqi = 0.0;
        return flag;
    }

    size_t lag_lo = static_cast<size_t>(std::llround(0.25 * seg.fs_hz));
    size_t lag_hi = static_cast<size_t>(std::llround(2.0 * seg.fs_hz));
    lag_lo = std::max<size_t>(lag_lo, 1);
    lag_hi = std::min(lag_hi, n - 1);

    double best = 0.0;
    for (size_t lag = lag_lo; lag <= lag_hi; ++lag) {
        double acc = 0.0;
        for (size_t t = 0; t + lag < n; ++t) acc += centered[t] * centered[t + lag];
        best = std::max(best, acc / energy);
    }
    flag.sqi = best;
    flag.value = best >= sqi_threshold ? Quality::GOOD : Quality::BAD;
    return flag;
}

}  // namespace ppgaf
