// ============================================================================
// Canonical signal types and preprocessing transforms: segmentation,
// prefix extension, linear resampling, min-max normalization, and the
// autocorrelation signal-quality heuristic. All operations are pure;
// values are safe to move between threads.
// ============================================================================

#pragma once
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace ppgaf {

struct Waveform {
    std::string patient_id;
    double fs_hz = 0.0;            // samples per second, > 0
    int64_t start_time_ms = 0;     // epoch milliseconds of samples[0]
    std::vector<float> samples;

    double duration_s() const { return static_cast<double>(samples.size()) / fs_hz; }
    int64_t end_time_ms() const {
        return start_time_ms + static_cast<int64_t>(std::llround(1000.0 * duration_s()));
    }
};

struct Segment {
    std::string patient_id;
    int64_t t_start_ms = 0;
    double fs_hz = 0.0;
    std::vector<float> samples;
    bool normalized = false;
};

enum class Quality { GOOD, BAD };
enum class QualitySource { GROUND_TRUTH, HEURISTIC };

// Source is kept so synthetic truth and heuristic estimates are never
// conflated downstream.
struct QualityFlag {
    Quality value = Quality::BAD;
    QualitySource source = QualitySource::HEURISTIC;
    double sqi = 0.0;  // heuristic score when source == HEURISTIC
};

const char* to_string(Quality q);
const char* to_string(QualitySource s);
Quality quality_from_string(const std::string& s);
QualitySource quality_source_from_string(const std::string& s);

// Tile the waveform left to right into round(window_s * fs) sample windows.
// A trailing remainder shorter than one window is dropped; a waveform
// shorter than one window yields an empty sequence.
std::vector<Segment> segment_stream(const Waveform& w, double window_s, double overlap_s = 0.0);

// Append the first (target_len - len) samples to the end. The deficit must
// not exceed the input length.
std::vector<float> extend_by_prefix(const std::vector<float>& samples, size_t target_len);

// Linear-interpolation resampling with endpoint hold. Output length is
// round(len * target / source); patient id and start time are preserved.
Waveform resample(const Waveform& w, double target_fs_hz);

// (x - min) / (max - min); a constant input maps to all zeros so pipelines
// stay total (flatlines are then BAD quality downstream).
std::vector<float> minmax_normalize(const std::vector<float>& samples);

// SQI = max normalized autocorrelation over lags in [0.25 s, 2.0 s].
// GOOD iff SQI >= threshold. Constant segments get SQI = 0 -> BAD.
QualityFlag estimate_quality(const Segment& seg, double sqi_threshold = 0.5);

}  // namespace ppgaf
