// ============================================================================
// Evaluation protocols: AUROC (Mann-Whitney, 0.5 tie credit), AUPRC
// (average precision), quality-subgroup breakdowns, one-sample-per-patient
// bootstrap, two-sided Wilcoxon signed-rank (exact for n <= 12, normal
// approximation with tie correction above), latent-space nearest-neighbor
// purity/CCR, and per-epoch timing comparison.
// ============================================================================

#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgaf/dataset.hpp"
#include "ppgaf/embedding.hpp"
#include "ppgaf/trainer.hpp"

namespace ppgaf {

struct ScoredRecord {
    size_t record_id = 0;
    std::string patient_id;
    double score = 0.0;  // AF probability in [0, 1]
    int label = 0;       // binary ground truth for evaluation
    Quality quality = Quality::GOOD;
};

// Rank-based AUROC; requires both classes present.
double auroc(const std::vector<ScoredRecord>& scored);
double auroc_from(const std::vector<double>& scores, const std::vector<int>& labels);

// Step-wise precision-recall integration (average precision); requires at
// least one positive.
double auprc(const std::vector<ScoredRecord>& scored);
double auprc_from(const std::vector<double>& scores, const std::vector<int>& labels);

struct SubgroupMetrics {
    std::optional<double> auroc_good, auroc_bad, auprc_good, auprc_bad;
    std::optional<double> auroc_drop_pct;  // 100 * (good - bad) / good
    size_t n_good = 0, n_bad = 0;
};

// Metrics per GOOD/BAD partition; undefined subgroups stay unset.
SubgroupMetrics subgroup_eval(const std::vector<ScoredRecord>& scored);

struct BootstrapResult {
    std::vector<double> auroc_draws;
    size_t skipped_draws = 0;  // degenerate after the retry cap
};

// One record per patient per draw; single-class draws are redrawn (up to
// 100 retries), then skipped with a count. draw_records, when given,
// receives the chosen record positions (into `scored`) per retained draw.
BootstrapResult bootstrap_auroc(const std::vector<ScoredRecord>& scored, size_t draws,
                                uint64_t seed,
                                std::vector<std::vector<size_t>>* draw_records = nullptr);

// Two-sided p-value; zero differences dropped, tied |differences| get mean
// ranks. All-zero differences -> p = 1.0 by convention.
double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

inline double bonferroni_threshold(double alpha, size_t comparisons) {
    return alpha / static_cast<double>(comparisons);
}

struct NeighborhoodStats {
    size_t query_id = 0;
    double purity = 0.0;  // fraction of the k neighbors whose observed label is correct
    double ccr = 0.0;     // fraction whose true class differs from the query's
    size_t k_used = 0;
};

// Euclidean k-NN in latent space; reference rows need observed + trusted
// labels, queries need a trusted class. Distance ties break by record id.
// k is clamped (with a warning flag) when the reference is smaller.
std::vector<NeighborhoodStats> latent_neighborhood_analysis(
    const Embedding& query_latents, const std::vector<int>& query_true,
    const Embedding& ref_latents, const std::vector<int>& ref_observed,
    const std::vector<int>& ref_true, size_t k, bool* k_clamped = nullptr);

struct TimingComparison {
    double median_epoch_seconds_a = 0.0;
    double median_epoch_seconds_b = 0.0;
    double overhead_ratio = 0.0;  // median(b) / median(a)
};

// Pre-training (autoencoder) time is reported separately by the caller.
TimingComparison timing_compare(const std::vector<EpochStats>& history_a,
                                const std::vector<EpochStats>& history_b);

// Aggregated report; optional sections serialize only when present.
struct MetricsReport {
    std::optional<double> auroc_all, auprc_all;
    std::optional<SubgroupMetrics> subgroups;
    std::optional<BootstrapResult> bootstrap;
    std::map<std::string, double> pairwise_p;  // "a_vs_b" -> p-value
    std::optional<double> significance_alpha, significance_threshold;
    std::optional<size_t> n_comparisons;
    std::optional<double> ae_pretrain_seconds;
    std::optional<TimingComparison> timing;
    std::optional<double> mean_purity, mean_ccr;
    size_t n_records = 0;

    nlohmann::json to_json() const;
};

std::vector<ScoredRecord> make_scored(const Dataset& ds, const std::vector<size_t>& indices,
                                      const std::vector<double>& scores, bool use_true_labels);

}  // namespace ppgaf
