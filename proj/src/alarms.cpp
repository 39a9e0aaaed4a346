#include "ppgaf/alarms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ppgaf/errors.hpp"
#include "ppgaf/rng.hpp"

namespace ppgaf {

const char* to_string(AlarmType t) {
    switch (t) {
        case AlarmType::AF: return "AF";
        case AlarmType::VT: return "VT";
        case AlarmType::PVC: return "PVC";
        case AlarmType::RONT: return "RONT";
        case AlarmType::COUPLET: return "COUPLET";
        case AlarmType::BIGEMINY: return "BIGEMINY";
        case AlarmType::TRIGEMINY: return "TRIGEMINY";
        case AlarmType::PVC_GE_X: return "PVC_GE_X";
        case AlarmType::VFIB: return "VFIB";
        case AlarmType::OTHER: return "OTHER";
    }
    return "OTHER";
}

AlarmType alarm_type_from_string(const std::string& s) {
    if (s == "AF") return AlarmType::AF;
    if (s == "VT") return AlarmType::VT;
    if (s == "PVC") return AlarmType::PVC;
    if (s == "RONT") return AlarmType::RONT;
    if (s == "COUPLET") return AlarmType::COUPLET;
    if (s == "BIGEMINY") return AlarmType::BIGEMINY;
    if (s == "TRIGEMINY") return AlarmType::TRIGEMINY;
    if (s == "PVC_GE_X") return AlarmType::PVC_GE_X;
    if (s == "VFIB") return AlarmType::VFIB;
    return AlarmType::OTHER;
}

bool is_pvc_family(AlarmType t) {
    switch (t) {
        case AlarmType::VT:
        case AlarmType::PVC:
        case AlarmType::RONT:
        case AlarmType::COUPLET:
        case AlarmType::BIGEMINY:
        case AlarmType::TRIGEMINY:
        case AlarmType::PVC_GE_X:
            return true;
        default:
            return false;
    }
}

void LabelingConfig::validate() const {
    if (window_s <= 0 || half_window_s <= 0 || pvc_exclusion_s <= 0 || nsr_min_gap_s <= 0)
        throw ConfigError("labeling config: durations must be positive");
    if (std::abs(window_s - 2.0 * half_window_s) > 1e-9)
        throw ConfigError("labeling config: window_s must equal 2 * half_window_s");
}

static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

AlarmLog parse_alarm_log(const std::string& csv_text) {
    AlarmLog log;
    std::istringstream in(csv_text);
    std::string line;
    size_t line_no = 0;

    if (!std::getline(in, line)) throw IoError("alarm log: empty input");
    ++line_no;
    if (trim(line) != "patient_id,onset_ms,alarm_type")
        throw IoError("alarm log: line 1: expected header `patient_id,onset_ms,alarm_type`");

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::istringstream row(line);
        std::string pid, onset_str, type_str;
        if (!std::getline(row, pid, ',') || !std::getline(row, onset_str, ',') ||
            !std::getline(row, type_str))
            throw IoError("alarm log: line " + std::to_string(line_no) + ": expected 3 fields");
        pid = trim(pid);
        onset_str = trim(onset_str);
        type_str = trim(type_str);
        if (pid.empty())
            throw IoError("alarm log: line " + std::to_string(line_no) + ": empty patient_id");

        AlarmEvent ev;
        ev.patient_id = pid;
        try {
            size_t pos = 0;
            ev.onset_ms = std::stoll(onset_str, &pos);
            if (pos != onset_str.size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw IoError("alarm log: line " + std::to_string(line_no) + ": bad onset_ms `" +
                          onset_str + "`");
        }
        ev.alarm_type = alarm_type_from_string(type_str);
        if (ev.alarm_type == AlarmType::OTHER && type_str != "OTHER") ++log.unknown_type_count;
        log.events.push_back(std::move(ev));
    }

    std::stable_sort(log.events.begin(), log.events.end(),
                     [](const AlarmEvent& a, const AlarmEvent& b) {
                         if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
                         return a.onset_ms < b.onset_ms;
                     });
    return log;
}

std::vector<AlarmEvent> dedup_events(const std::vector<AlarmEvent>& events, double window_s) {
    const int64_t win_ms = static_cast<int64_t>(std::llround(window_s * 1000.0));
    std::map<std::pair<std::string, AlarmType>, int64_t> last_kept;
    std::vector<AlarmEvent> out;
    for (const auto& ev : events) {
        auto key = std::make_pair(ev.patient_id, ev.alarm_type);
        auto it = last_kept.find(key);
        if (it != last_kept.end() && ev.onset_ms - it->second <= win_ms) continue;
        last_kept[key] = ev.onset_ms;
        out.push_back(ev);
    }
    return out;
}

namespace {

// Per-patient waveform index; extraction is independent across patients.
std::map<std::string, std::vector<const Waveform*>> index_waveforms(
    const std::vector<Waveform>& waveforms) {
    std::map<std::string, std::vector<const Waveform*>> by_patient;
    for (const auto& w : waveforms) by_patient[w.patient_id].push_back(&w);
    for (auto& [pid, list] : by_patient)
        std::sort(list.begin(), list.end(),
                  [](const Waveform* a, const Waveform* b) {
                      return a->start_time_ms < b->start_time_ms;
                  });
    return by_patient;
}

// Cut, normalize and quality-score one window starting at t_start_ms.
// Returns false when no waveform fully covers the window.
bool cut_window(const std::vector<const Waveform*>& wfs, int64_t t_start_ms, double window_s,
                double sqi_threshold, Label label, DatasetRecord& out) {
    for (const Waveform* w : wfs) {
        const size_t win = static_cast<size_t>(std::llround(window_s * w->fs_hz));
        const double off_s = static_cast<double>(t_start_ms - w->start_time_ms) / 1000.0;
        const int64_t start = std::llround(off_s * w->fs_hz);
        if (start < 0) continue;
        if (static_cast<size_t>(start) + win > w->samples.size()) continue;

        Segment seg;
        seg.patient_id = w->patient_id;
        seg.t_start_ms = t_start_ms;
        seg.fs_hz = w->fs_hz;
        seg.samples.assign(w->samples.begin() + start, w->samples.begin() + start + win);
        seg.samples = minmax_normalize(seg.samples);
        seg.normalized = true;

        out.patient_id = w->patient_id;
        out.label = label;
        out.quality = estimate_quality(seg, sqi_threshold);
        out.provenance = Provenance::ALARM;
        out.t_start_ms = t_start_ms;
        out.fs_hz = w->fs_hz;
        out.samples = std::move(seg.samples);
        return true;
    }
    return false;
}

void sort_records(std::vector<DatasetRecord>& recs) {
    std::sort(recs.begin(), recs.end(), [](const DatasetRecord& a, const DatasetRecord& b) {
        if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
        return a.t_start_ms < b.t_start_ms;
    });
}

std::vector<AlarmEvent> maybe_dedup(const std::vector<AlarmEvent>& events,
                                    const LabelingConfig& cfg) {
    if (cfg.dedup_window_s) return dedup_events(events, *cfg.dedup_window_s);
    return events;
}

}  // namespace

ExtractResult extract_af_segments(const std::vector<AlarmEvent>& events,
                                  const std::vector<Waveform>& waveforms,
                                  const LabelingConfig& cfg) {
    cfg.validate();
    auto by_patient = index_waveforms(waveforms);
    const int64_t half_ms = static_cast<int64_t>(std::llround(cfg.half_window_s * 1000.0));

    ExtractResult res;
    for (const auto& ev : maybe_dedup(events, cfg)) {
        if (ev.alarm_type != AlarmType::AF) continue;
        auto it = by_patient.find(ev.patient_id);
        DatasetRecord rec;
        if (it != by_patient.end() &&
            cut_window(it->second, ev.onset_ms - half_ms, cfg.window_s, cfg.sqi_threshold,
                       Label::AF, rec))
            res.segments.push_back(std::move(rec));
        else
            ++res.skipped_out_of_bounds;
    }
    sort_records(res.segments);
    return res;
}

ExtractResult extract_pvc_segments(const std::vector<AlarmEvent>& events,
                                   const std::vector<Waveform>& waveforms,
                                   const LabelingConfig& cfg) {
    cfg.validate();
    auto by_patient = index_waveforms(waveforms);
    const int64_t half_ms = static_cast<int64_t>(std::llround(cfg.half_window_s * 1000.0));
    const int64_t excl_ms = static_cast<int64_t>(std::llround(cfg.pvc_exclusion_s * 1000.0));

    std::map<std::string, std::vector<int64_t>> af_onsets;
    for (const auto& ev : events)
        if (ev.alarm_type == AlarmType::AF) af_onsets[ev.patient_id].push_back(ev.onset_ms);

    ExtractResult res;
    for (const auto& ev : maybe_dedup(events, cfg)) {
        if (!is_pvc_family(ev.alarm_type)) continue;

        bool near_af = false;
        if (auto it = af_onsets.find(ev.patient_id); it != af_onsets.end())
            for (int64_t af : it->second)
                if (std::llabs(af - ev.onset_ms) <= excl_ms) {
                    near_af = true;
                    break;
                }
        if (near_af) {
            ++res.excluded_near_af;
            continue;
        }

        auto it = by_patient.find(ev.patient_id);
        DatasetRecord rec;
        if (it != by_patient.end() &&
            cut_window(it->second, ev.onset_ms - half_ms, cfg.window_s, cfg.sqi_threshold,
                       Label::PVC, rec))
            res.segments.push_back(std::move(rec));
        else
            ++res.skipped_out_of_bounds;
    }
    sort_records(res.segments);
    return res;
}

ExtractResult extract_nsr_segments(const std::vector<AlarmEvent>& events,
                                   const std::vector<Waveform>& waveforms,
                                   const LabelingConfig& cfg) {
    cfg.validate();
    auto by_patient = index_waveforms(waveforms);
    const int64_t half_ms = static_cast<int64_t>(std::llround(cfg.half_window_s * 1000.0));
    const int64_t min_gap_ms =
        static_cast<int64_t>(std::llround((cfg.nsr_min_gap_s + cfg.window_s) * 1000.0));

    std::map<std::string, std::vector<int64_t>> onsets;  // all alarm types break gaps
    for (const auto& ev : events) onsets[ev.patient_id].push_back(ev.onset_ms);
    for (auto& [pid, list] : onsets) std::sort(list.begin(), list.end());

    // Alarm-free intervals are delimited by "break times": every alarm onset
    // of the patient plus each waveform's start and end. Consecutive break
    // times give onset-to-onset gaps and the boundary-to-first /
    // last-to-boundary intervals without double counting when they coincide.
    ExtractResult res;
    for (const auto& [pid, wfs] : by_patient) {
        std::vector<int64_t> breaks;
        if (auto it = onsets.find(pid); it != onsets.end()) breaks = it->second;
        for (const Waveform* w : wfs) {
            breaks.push_back(w->start_time_ms);
            breaks.push_back(w->end_time_ms());
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

        for (size_t i = 0; i + 1 < breaks.size(); ++i) {
            const int64_t a = breaks[i], b = breaks[i + 1];
            if (b - a <= min_gap_ms) continue;
            const int64_t mid = a + (b - a) / 2;
            DatasetRecord rec;
            if (cut_window(wfs, mid - half_ms, cfg.window_s, cfg.sqi_threshold, Label::NSR, rec))
                res.segments.push_back(std::move(rec));
            else
                ++res.skipped_out_of_bounds;
        }
    }
    sort_records(res.segments);
    return res;
}

Dataset assemble_dataset(const std::vector<DatasetRecord>& af, const std::vector<DatasetRecord>& pvc,
                         const std::vector<DatasetRecord>& nsr,
                         const std::optional<BalanceSpec>& balance, uint64_t seed) {
    std::vector<DatasetRecord> af_side = af;
    std::vector<DatasetRecord> non_side;
    non_side.insert(non_side.end(), pvc.begin(), pvc.end());
    non_side.insert(non_side.end(), nsr.begin(), nsr.end());

    if (balance) {
        if (balance->af <= 0 || balance->non_af <= 0)
            throw ConfigError("assemble_dataset: balance ratio must be positive");
        if (af_side.empty()) throw EmptyClass("assemble_dataset: no AF records to balance");
        if (non_side.empty()) throw EmptyClass("assemble_dataset: no non-AF records to balance");

        const double r = balance->af / balance->non_af;  // target AF : non-AF
        auto downsample = [&](std::vector<DatasetRecord>& v, size_t target, uint64_t stream) {
            if (target >= v.size()) return;
            std::vector<size_t> idx(v.size());
            for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            Rng rng(derive_seed(seed, stream));
            rng.shuffle(idx);
            idx.resize(target);
            std::sort(idx.begin(), idx.end());
            std::vector<DatasetRecord> kept;
            kept.reserve(target);
            for (size_t i : idx) kept.push_back(std::move(v[i]));
            v = std::move(kept);
        };

        const double have = static_cast<double>(af_side.size()) / non_side.size();
        if (have > r) {
            size_t target = static_cast<size_t>(std::llround(r * non_side.size()));
            downsample(af_side, std::max<size_t>(target, 1), 1);
        } else if (have < r) {
            size_t target = static_cast<size_t>(std::llround(af_side.size() / r));
            downsample(non_side, std::max<size_t>(target, 1), 2);
        }
        if (af_side.empty() || non_side.empty())
            throw EmptyClass("assemble_dataset: class emptied by balancing");
    }

    Dataset ds;
    ds.records = std::move(af_side);
    ds.records.insert(ds.records.end(), std::make_move_iterator(non_side.begin()),
                      std::make_move_iterator(non_side.end()));
    std::sort(ds.records.begin(), ds.records.end(),
              [](const DatasetRecord& a, const DatasetRecord& b) {
                  if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
                  if (a.t_start_ms != b.t_start_ms) return a.t_start_ms < b.t_start_ms;
                  return static_cast<int>(a.label) < static_cast<int>(b.label);
              });
    return ds;
}

}  // namespace ppgaf
