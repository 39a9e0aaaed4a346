// ============================================================================
// Alarm-driven weak labeling: parse monitor alarm logs and turn them plus
// the covering waveforms into labeled 30-second segments.
//
//   AF alarms  -> one AF segment centered at each onset
//   PVC family -> one PVC segment per alarm, unless an AF alarm of the same
//                 patient lies within pvc_exclusion_s of its onset
//   NSR        -> one segment at the midpoint of every alarm-free gap longer
//                 than nsr_min_gap_s + window_s (gaps measured onset to
//                 onset, plus waveform-boundary intervals)
//
// VFIB and OTHER alarms produce no segments but still break NSR gaps.
// ============================================================================

#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppgaf/dataset.hpp"
#include "ppgaf/signal.hpp"

namespace ppgaf {

enum class AlarmType { AF, VT, PVC, RONT, COUPLET, BIGEMINY, TRIGEMINY, PVC_GE_X, VFIB, OTHER };

const char* to_string(AlarmType t);
AlarmType alarm_type_from_string(const std::string& s);  // unknown -> OTHER
bool is_pvc_family(AlarmType t);

struct AlarmEvent {
    std::string patient_id;
    int64_t onset_ms = 0;
    AlarmType alarm_type = AlarmType::OTHER;
};

struct AlarmLog {
    std::vector<AlarmEvent> events;   // sorted by (patient_id, onset_ms)
    size_t unknown_type_count = 0;    // rows whose alarm string mapped to OTHER
};

struct LabelingConfig {
    double window_s = 30.0;
    double half_window_s = 15.0;
    double pvc_exclusion_s = 30.0;
    double nsr_min_gap_s = 30.0;
    double sqi_threshold = 0.5;
    std::optional<double> dedup_window_s;  // drop same-type alarms within N s of a kept one

    void validate() const;
};

// CSV with header `patient_id,onset_ms,alarm_type`. Malformed rows raise an
// error naming the line; out-of-order timestamps are tolerated (sorted).
AlarmLog parse_alarm_log(const std::string& csv_text);

// Optional pre-filter: drop alarms within window_s of a previously kept
// alarm of the same (patient, type).
std::vector<AlarmEvent> dedup_events(const std::vector<AlarmEvent>& events, double window_s);

struct ExtractResult {
    std::vector<DatasetRecord> segments;  // sorted by (patient_id, t_start_ms)
    size_t skipped_out_of_bounds = 0;
    size_t excluded_near_af = 0;          // PVC extraction only
};

ExtractResult extract_af_segments(const std::vector<AlarmEvent>& events,
                                  const std::vector<Waveform>& waveforms,
                                  const LabelingConfig& cfg);

ExtractResult extract_pvc_segments(const std::vector<AlarmEvent>& events,
                                   const std::vector<Waveform>& waveforms,
                                   const LabelingConfig& cfg);

ExtractResult extract_nsr_segments(const std::vector<AlarmEvent>& events,
                                   const std::vector<Waveform>& waveforms,
                                   const LabelingConfig& cfg);

// AF : non-AF target ratio for majority-side downsampling.
struct BalanceSpec {
    double af = 1.0;
    double non_af = 1.0;
};

// Concatenate the three classes, optionally downsampling the majority side
// (seeded) to the requested ratio. Records come back sorted by
// (patient_id, t_start_ms, label) so the manifest is deterministic.
Dataset assemble_dataset(const std::vector<DatasetRecord>& af,
                         const std::vector<DatasetRecord>& pvc,
                         const std::vector<DatasetRecord>& nsr,
                         const std::optional<BalanceSpec>& balance, uint64_t seed);

}  // namespace ppgaf
