// ============================================================================
// Training procedure: patient-level split, per-epoch shuffled mini-batches,
// CE / SCE / CMC loss modes, best-epoch-by-validation-loss selection, and
// the lambda grid search. One trainer exclusively owns its model and
// optimizer state; everything is deterministic under (inputs, seed).
// ============================================================================

#pragma once
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ppgaf/adam.hpp"
#include "ppgaf/autoencoder.hpp"
#include "ppgaf/dataset.hpp"
#include "ppgaf/embedding.hpp"
#include "ppgaf/losses.hpp"
#include "ppgaf/resnet.hpp"

namespace ppgaf {

enum class LossMode { CE, SCE, CMC };

const char* to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);
const char* to_string(NormMode m);
NormMode norm_mode_from_string(const std::string& s);

struct TrainConfig {
    double lambda1 = 0.01;
    double lambda2 = 0.001;
    size_t epochs = 50;
    size_t batch_size = 64;   // 1000 reproduces the reference protocol scale
    double lr = 1e-3;         // 1e-5 at full scale; 1e-3 suits desk-size runs
    uint64_t seed = 0;
    LossMode loss_mode = LossMode::CE;
    NormMode normalization_mode = NormMode::PAIR_MEAN;
    std::optional<double> inter_margin;  // off by default
    double val_fraction = 0.2;
    std::string preset = "TINY";
    bool use_batchnorm = true;
    double sce_alpha = 1.0;
    double sce_beta = 1.0;
    double sce_clamp_a = -4.0;

    void validate() const;
};

struct LossBreakdown {
    double l_ce = 0.0;
    double l_intra = 0.0;
    double l_inter = 0.0;
    double l_total = 0.0;  // l_ce + lambda1*l_intra + lambda2*l_inter, exactly
};

struct EpochStats {
    size_t epoch = 0;
    LossBreakdown train;
    double val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    Classifier<float> model;  // checkpoint of the best epoch
    std::vector<EpochStats> history;
    size_t best_epoch = 0;
    std::vector<size_t> train_idx;  // record indices
    std::vector<size_t> val_idx;
};

// Split at patient granularity: a seeded shuffle of the sorted patient list;
// at least one patient lands on each side.
std::pair<std::vector<std::string>, std::vector<std::string>> patient_split(
    const Dataset& ds, double val_fraction, uint64_t seed);

// Record indices for a set of patients, in manifest order.
std::vector<size_t> records_of_patients(const Dataset& ds, const std::vector<std::string>& patients);

// Called after every epoch; lets the CLI persist a last-epoch checkpoint and
// partial history so an interrupted run still leaves usable artifacts.
struct TrainHooks {
    std::function<void(const std::vector<EpochStats>&, Classifier<float>&)> on_epoch;
};

// cluster_ids must align with ds.records and is required in CMC mode
// (validation rows use nearest-centroid ids from the training-fit model).
TrainResult train(const Dataset& ds, const std::vector<int>* cluster_ids, const TrainConfig& cfg,
                  const TrainHooks* hooks = nullptr);

// AF probability (softmax component 1) per requested record, eval mode.
std::vector<double> score_records(Classifier<float>& model, const Dataset& ds,
                                  const std::vector<size_t>& indices, size_t batch_size = 256);

// Latent map F(x) per requested record, eval mode; rows align with indices.
Embedding latents_of(Classifier<float>& model, const Dataset& ds,
                     const std::vector<size_t>& indices, size_t batch_size = 256);

void write_history_jsonl(const std::string& path, const std::vector<EpochStats>& history);
std::vector<EpochStats> read_history_jsonl(const std::string& path);

struct GridCell {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double val_auroc = 0.0;
    size_t best_epoch = 0;
    std::string status;  // "ok" or "failed: ..."
};

struct GridSearchResult {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::vector<GridCell> table;
    TrainResult best;
    bool has_best = false;
};

// One CMC training per deduplicated grid point; selection by validation
// AUROC, ties by the smaller (lambda1, lambda2) lexicographically. Failed
// cells are recorded and skipped.
GridSearchResult grid_search_lambdas(const Dataset& ds, const std::vector<int>& cluster_ids,
                                     const std::vector<std::pair<double, double>>& grid,
                                     const TrainConfig& cfg);

void write_grid_csv(const std::string& path, const std::vector<GridCell>& table);

struct AeTrainResult {
    Autoencoder<float> model;
    double initial_mse = 0.0;  // holdout reconstruction error before training
    double final_mse = 0.0;    // and after
    double seconds = 0.0;
};

// Trains on the given record indices only (no validation/test leakage);
// the last ~10% of them (by position) form the holdout slice for the
// reported reconstruction MSE.
AeTrainResult train_autoencoder(const Dataset& ds, const std::vector<size_t>& train_indices,
                                size_t epochs, double lr, uint64_t seed, size_t latent_dim = 64,
                                size_t batch_size = 64);

}  // namespace ppgaf
