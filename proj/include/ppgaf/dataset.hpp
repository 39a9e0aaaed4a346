// ============================================================================
// Labeled segment datasets and the PPGD1 container: magic "PPGD1", u32-LE
// manifest length, JSON manifest (records array with patient_id, label,
// true_label?, quality, provenance, byte offset, n_samples, fs_hz,
// t_start_ms), then concatenated f32-LE segment blobs.
// ============================================================================

#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgaf/signal.hpp"

namespace ppgaf {

enum class Label { AF, PVC, NSR };
enum class Provenance { ALARM, SYNTH };

const char* to_string(Label l);
const char* to_string(Provenance p);
Label label_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

// AF is the positive class.
inline int binary_label(Label l) { return l == Label::AF ? 1 : 0; }

struct DatasetRecord {
    std::string patient_id;
    Label label = Label::NSR;                 // observed (possibly noisy) label
    std::optional<Label> true_label;          // synthetic data only
    QualityFlag quality;
    Provenance provenance = Provenance::ALARM;
    int64_t t_start_ms = 0;
    double fs_hz = 0.0;
    std::vector<float> samples;               // normalized window
    std::optional<int> cluster_id;            // runtime association, not serialized
};

struct Dataset {
    std::vector<DatasetRecord> records;
    nlohmann::json gen_params;  // echoed generation/labeling parameters

    size_t segment_len() const;  // uniform record length (ShapeError if mixed)
    std::map<std::string, size_t> per_patient_counts() const;
    std::map<std::string, size_t> per_class_counts() const;
    std::vector<std::string> patient_ids_sorted() const;
};

void write_ppgd1(const std::string& path, const Dataset& ds);
Dataset read_ppgd1(const std::string& path);

// Manifest bytes exactly as they would be written (for golden-fixture and
// reproducibility checks).
std::string ppgd1_manifest_json(const Dataset& ds);

}  // namespace ppgaf
