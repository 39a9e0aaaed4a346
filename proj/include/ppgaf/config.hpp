// ============================================================================
// Run configuration: one schema-versioned JSON document covering every
// command, validated strictly (unknown keys are rejected) before any work
// starts. Flags of the form section.key=value override config entries.
// RunManifest pins a run: config hash, input hashes, output hashes.
// ============================================================================

#pragma once
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgaf/alarms.hpp"
#include "ppgaf/synth.hpp"
#include "ppgaf/trainer.hpp"

namespace ppgaf {

inline constexpr int kSchemaVersion = 1;

nlohmann::json load_config_file(const std::string& path);

// "a.b.c=value" overrides; value parsed as JSON when possible, else string.
void apply_overrides(nlohmann::json& cfg, const std::vector<std::string>& overrides);

// Full-document validation: schema_version, known sections, known keys.
void validate_config(const nlohmann::json& cfg);

uint64_t config_seed(const nlohmann::json& cfg);

CorpusSpec parse_synth_section(const nlohmann::json& cfg);

struct LabelingRun {
    LabelingConfig labeling;
    std::optional<BalanceSpec> balance;
    std::optional<double> target_fs_hz;  // resample waveforms before extraction
};
LabelingRun parse_labeling_section(const nlohmann::json& cfg);

TrainConfig parse_train_section(const nlohmann::json& cfg);

struct ClusterConfig {
    size_t m = 6;
    size_t ae_epochs = 8;
    double ae_lr = 2e-3;
    size_t latent_dim = 64;
    size_t ae_batch = 64;
};
ClusterConfig parse_cluster_section(const nlohmann::json& cfg);

struct EvalConfig {
    size_t bootstrap_draws = 100;
    bool use_true_labels = true;
    double alpha = 0.05;
    size_t n_comparisons = 15;
};
EvalConfig parse_eval_section(const nlohmann::json& cfg);

struct LatentConfig {
    size_t k = 50;
    size_t n_queries = 100;
};
LatentConfig parse_latent_section(const nlohmann::json& cfg);

struct GridConfig {
    std::vector<std::pair<double, double>> cells;
};
GridConfig parse_grid_section(const nlohmann::json& cfg);

struct ExperimentSize {
    std::string name;
    size_t records = 0;
    std::string labels = "observed";  // or "true"
};
struct ExperimentConfig {
    std::vector<ExperimentSize> sizes;
    std::vector<std::string> presets;
    std::vector<LossMode> loss_modes;
};
ExperimentConfig parse_experiment_section(const nlohmann::json& cfg);

// ---------------------------------------------------------------------------

class RunManifest {
public:
    RunManifest(std::string command, const nlohmann::json& cfg);

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    // Reproducibility hash over a normalized payload (e.g. a history with
    // wall-clock fields stripped) when the raw bytes contain timing.
    void add_stable_hash(const std::string& path, const std::string& sha256);
    void set_wall_clock(double seconds);

    void write(const std::string& path) const;
    const nlohmann::json& outputs() const { return doc_.at("outputs"); }

private:
    nlohmann::json doc_;
};

// History hash with the wall-clock field removed from each record.
std::string history_content_sha256(const std::vector<EpochStats>& history);

}  // namespace ppgaf
