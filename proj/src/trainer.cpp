#include "ppgaf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ppgaf/errors.hpp"
#include "ppgaf/metrics.hpp"
#include "ppgaf/rng.hpp"
#include "ppgaf/util.hpp"

namespace ppgaf {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

const char* to_string(LossMode m) {
    switch (m) {
        case LossMode::CE: return "CE";
        case LossMode::SCE: return "SCE";
        case LossMode::CMC: return "CMC";
    }
    return "CE";
}

LossMode loss_mode_from_string(const std::string& s) {
    if (s == "CE") return LossMode::CE;
    if (s == "SCE") return LossMode::SCE;
    if (s == "CMC") return LossMode::CMC;
    throw ConfigError("unknown loss mode: " + s);
}

const char* to_string(NormMode m) { return m == NormMode::RAW_SUM ? "RAW_SUM" : "PAIR_MEAN"; }

NormMode norm_mode_from_string(const std::string& s) {
    if (s == "RAW_SUM") return NormMode::RAW_SUM;
    if (s == "PAIR_MEAN") return NormMode::PAIR_MEAN;
    throw ConfigError("unknown normalization mode: " + s);
}

void TrainConfig::validate() const {
    if (lambda1 < 0 || lambda2 < 0) throw ConfigError("train: lambdas must be >= 0");
    if (epochs == 0) throw ConfigError("train: epochs must be positive");
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (lr <= 0) throw ConfigError("train: lr must be positive");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("train: val_fraction must be in (0, 1)");
    if (inter_margin && *inter_margin <= 0) throw ConfigError("train: inter_margin must be > 0");
    ArchSpec::make(preset);  // throws on unknown preset
}

std::pair<std::vector<std::string>, std::vector<std::string>> patient_split(const Dataset& ds,
                                                                            double val_fraction,
                                                                            uint64_t seed) {
    std::vector<std::string> patients = ds.patient_ids_sorted();
    if (patients.size() < 2) throw SplitError("patient_split: need at least 2 patients");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("patient_split: val_fraction must be in (0, 1)");

    Rng rng(derive_seed(seed, 0x5B711));
    rng.shuffle(patients);

    size_t n_val = static_cast<size_t>(std::llround(val_fraction * patients.size()));
    n_val = std::clamp<size_t>(n_val, 1, patients.size() - 1);

    std::vector<std::string> val(patients.begin(), patients.begin() + n_val);
    std::vector<std::string> train(patients.begin() + n_val, patients.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

std::vector<size_t> records_of_patients(const Dataset& ds,
                                        const std::vector<std::string>& patients) {
    std::set<std::string> set(patients.begin(), patients.end());
    std::vector<size_t> out;
    for (size_t i = 0; i < ds.records.size(); ++i)
        if (set.count(ds.records[i].patient_id)) out.push_back(i);
    return out;
}

namespace {

struct BatchBuf {
    std::vector<float> x;
    std::vector<int> labels;
    std::vector<int> cluster_ids;
    size_t size = 0;
};

void fill_batch(const Dataset& ds, const std::vector<int>* cluster_ids,
                const std::vector<size_t>& idx, size_t at, size_t bs, size_t len, BatchBuf& buf) {
    buf.size = bs;
    buf.x.resize(bs * len);
    buf.labels.resize(bs);
    buf.cluster_ids.resize(cluster_ids ? bs : 0);
    for (size_t b = 0; b < bs; ++b) {
        const auto& rec = ds.records[idx[at + b]];
        std::memcpy(buf.x.data() + b * len, rec.samples.data(), 4 * len);
        buf.labels[b] = binary_label(rec.label);
        if (cluster_ids) buf.cluster_ids[b] = (*cluster_ids)[idx[at + b]];
    }
}

// Loss + gradient for one batch. The cluster terms are evaluated only when
// their weight is nonzero, which keeps a CMC run with lambda1=lambda2=0
// arithmetically identical to plain CE.
LossBreakdown batch_loss(Classifier<float>& model, const BatchBuf& buf, const TrainConfig& cfg,
                         bool train_mode, bool want_grad) {
    const size_t B = buf.size;
    ForwardOut<float> out = model.forward(buf.x, B, buf.x.size() / B, train_mode);

    LossGrad<float> head_loss;
    if (cfg.loss_mode == LossMode::SCE)
        head_loss = symmetric_cross_entropy(out.logits, buf.labels, 2, cfg.sce_alpha, cfg.sce_beta,
                                            cfg.sce_clamp_a, want_grad);
    else
        head_loss = cross_entropy(out.logits, buf.labels, 2, want_grad);

    LossBreakdown lb;
    lb.l_ce = head_loss.loss;

    const bool cmc_active =
        cfg.loss_mode == LossMode::CMC && (cfg.lambda1 != 0.0 || cfg.lambda2 != 0.0);
    std::vector<float> dlat;
    if (cmc_active) {
        const size_t d = model.spec().latent_dim();
        CmcTerms terms = cmc_losses(out.latents, B, d, buf.cluster_ids, cfg.normalization_mode,
                                    cfg.inter_margin);
        lb.l_intra = terms.intra;
        lb.l_inter = terms.inter;
        if (want_grad) {
            dlat.assign(out.latents.size(), 0.0f);
            cmc_backward(out.latents, B, d, buf.cluster_ids, cfg.normalization_mode, cfg.lambda1,
                         cfg.lambda2, dlat, cfg.inter_margin);
        }
    }
    lb.l_total = lb.l_ce + cfg.lambda1 * lb.l_intra + cfg.lambda2 * lb.l_inter;
    if (!std::isfinite(lb.l_total))
        throw NumericError("train: non-finite loss (l_ce=" + std::to_string(lb.l_ce) + ")");

    if (want_grad) {
        model.zero_grad();
        model.backward(head_loss.dlogits, cmc_active ? &dlat : nullptr);
    }
    return lb;
}

struct Snapshot {
    std::vector<std::vector<float>> values;
};

Snapshot take_snapshot(Classifier<float>& model) {
    Snapshot s;
    for (auto& p : model.params()) s.values.push_back(*p.value);
    return s;
}

void restore_snapshot(Classifier<float>& model, const Snapshot& s) {
    auto params = model.params();
    if (params.size() != s.values.size()) throw StateError("snapshot: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) *params[i].value = s.values[i];
}

}  // namespace

TrainResult train(const Dataset& ds, const std::vector<int>* cluster_ids, const TrainConfig& cfg,
                  const TrainHooks* hooks) {
    cfg.validate();
    if (ds.records.empty()) throw ConfigError("train: empty dataset");
    const size_t len = ds.segment_len();

    if (cfg.loss_mode == LossMode::CMC) {
        if (!cluster_ids) throw ConfigError("train: CMC mode requires cluster ids");
        if (cluster_ids->size() != ds.records.size())
            throw ShapeError("train: cluster ids must cover every record");
    }

    auto [train_patients, val_patients] = patient_split(ds, cfg.val_fraction, cfg.seed);

    TrainResult res;
    res.train_idx = records_of_patients(ds, train_patients);
    res.val_idx = records_of_patients(ds, val_patients);
    if (res.train_idx.empty() || res.val_idx.empty())
        throw SplitError("train: a split side has no records");

    Classifier<float> model(ArchSpec::make(cfg.preset, cfg.use_batchnorm));
    model.init(cfg.seed);
    Adam<float> opt(cfg.lr);
    auto params = model.params();

    Rng shuffle_rng(derive_seed(cfg.seed, 0x5F17));
    BatchBuf buf;
    Snapshot best;
    double best_val = std::numeric_limits<double>::infinity();

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = Clock::now();

        std::vector<size_t> order = res.train_idx;
        shuffle_rng.shuffle(order);

        double sum_ce = 0.0, sum_intra = 0.0, sum_inter = 0.0, sum_total = 0.0;
        size_t n_seen = 0;
        for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const size_t bs = std::min(cfg.batch_size, order.size() - at);
            fill_batch(ds, cluster_ids, order, at, bs, len, buf);
            LossBreakdown lb = batch_loss(model, buf, cfg, /*train=*/true, /*grad=*/true);
            opt.step(params);
            sum_ce += lb.l_ce * bs;
            sum_intra += lb.l_intra * bs;
            sum_inter += lb.l_inter * bs;
            sum_total += lb.l_total * bs;
            n_seen += bs;
        }

        double val_loss = 0.0;
        size_t val_seen = 0;
        for (size_t at = 0; at < res.val_idx.size(); at += cfg.batch_size) {
            const size_t bs = std::min(cfg.batch_size, res.val_idx.size() - at);
            fill_batch(ds, cluster_ids, res.val_idx, at, bs, len, buf);
            LossBreakdown lb = batch_loss(model, buf, cfg, /*train=*/false, /*grad=*/false);
            val_loss += lb.l_total * bs;
            val_seen += bs;
        }
        val_loss /= static_cast<double>(val_seen);

        EpochStats es;
        es.epoch = epoch;
        es.train.l_ce = sum_ce / n_seen;
        es.train.l_intra = sum_intra / n_seen;
        es.train.l_inter = sum_inter / n_seen;
        es.train.l_total = sum_total / n_seen;
        es.val_loss = val_loss;
        es.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        res.history.push_back(es);

        if (val_loss < best_val) {
            best_val = val_loss;
            best = take_snapshot(model);
            res.best_epoch = epoch;
        }
        if (hooks && hooks->on_epoch) hooks->on_epoch(res.history, model);
    }

    restore_snapshot(model, best);
    res.model = std::move(model);
    return res;
}

std::vector<double> score_records(Classifier<float>& model, const Dataset& ds,
                                  const std::vector<size_t>& indices, size_t batch_size) {
    const size_t len = ds.segment_len();
    std::vector<double> scores(indices.size());
    BatchBuf buf;
    for (size_t at = 0; at < indices.size(); at += batch_size) {
        const size_t bs = std::min(batch_size, indices.size() - at);
        fill_batch(ds, nullptr, indices, at, bs, len, buf);
        ForwardOut<float> out = model.forward(buf.x, bs, len, /*train=*/false);
        std::vector<double> p = softmax(out.logits, bs, 2);
        for (size_t b = 0; b < bs; ++b) scores[at + b] = p[b * 2 + 1];
    }
    return scores;
}

Embedding latents_of(Classifier<float>& model, const Dataset& ds,
                     const std::vector<size_t>& indices, size_t batch_size) {
    const size_t len = ds.segment_len();
    Embedding emb;
    emb.n = indices.size();
    emb.dim = model.spec().latent_dim();
    emb.data.resize(emb.n * emb.dim);
    BatchBuf buf;
    for (size_t at = 0; at < indices.size(); at += batch_size) {
        const size_t bs = std::min(batch_size, indices.size() - at);
        fill_batch(ds, nullptr, indices, at, bs, len, buf);
        ForwardOut<float> out = model.forward(buf.x, bs, len, /*train=*/false);
        std::memcpy(emb.data.data() + at * emb.dim, out.latents.data(), 4 * out.latents.size());
    }
    return emb;
}

void write_history_jsonl(const std::string& path, const std::vector<EpochStats>& history) {
    std::ostringstream out;
    for (const auto& es : history) {
        json j;
        j["epoch"] = es.epoch;
        j["l_ce"] = es.train.l_ce;
        j["l_intra"] = es.train.l_intra;
        j["l_inter"] = es.train.l_inter;
        j["l_total"] = es.train.l_total;
        j["val_loss"] = es.val_loss;
        j["seconds"] = es.seconds;
        out << j.dump() << "\n";
    }
    const std::string s = out.str();
    write_file_bytes(path, s.data(), s.size());
}

std::vector<EpochStats> read_history_jsonl(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::vector<EpochStats> history;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        EpochStats es;
        es.epoch = j.at("epoch").get<size_t>();
        es.train.l_ce = j.at("l_ce").get<double>();
        es.train.l_intra = j.at("l_intra").get<double>();
        es.train.l_inter = j.at("l_inter").get<double>();
        es.train.l_total = j.at("l_total").get<double>();
        es.val_loss = j.at("val_loss").get<double>();
        es.seconds = j.at("seconds").get<double>();
        history.push_back(es);
    }
    return history;
}

GridSearchResult grid_search_lambdas(const Dataset& ds, const std::vector<int>& cluster_ids,
                                     const std::vector<std::pair<double, double>>& grid,
                                     const TrainConfig& cfg) {
    if (grid.empty()) throw ConfigError("grid search: empty grid");

    std::vector<std::pair<double, double>> cells = grid;
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

    GridSearchResult res;
    double best_auroc = -1.0;

    for (const auto& [l1, l2] : cells) {
        TrainConfig cell_cfg = cfg;
        cell_cfg.loss_mode = LossMode::CMC;
        cell_cfg.lambda1 = l1;
        cell_cfg.lambda2 = l2;

        GridCell cell;
        cell.lambda1 = l1;
        cell.lambda2 = l2;
        try {
            TrainResult tr = train(ds, &cluster_ids, cell_cfg);
            std::vector<double> scores = score_records(tr.model, ds, tr.val_idx);
            std::vector<int> labels;
            labels.reserve(tr.val_idx.size());
            for (size_t i : tr.val_idx) labels.push_back(binary_label(ds.records[i].label));
            cell.val_auroc = auroc_from(scores, labels);
            cell.best_epoch = tr.best_epoch;
            cell.status = "ok";
            // ties go to the smaller (lambda1, lambda2); cells arrive in
            // ascending order so strict improvement is the right test
            if (cell.val_auroc > best_auroc) {
                best_auroc = cell.val_auroc;
                res.lambda1 = l1;
                res.lambda2 = l2;
                res.best = std::move(tr);
                res.has_best = true;
            }
        } catch (const std::exception& e) {
            cell.status = std::string("failed: ") + e.what();
        }
        res.table.push_back(cell);
    }
    if (!res.has_best) throw NumericError("grid search: every cell failed");
    return res;
}

void write_grid_csv(const std::string& path, const std::vector<GridCell>& table) {
    std::ostringstream out;
    out << "lambda1,lambda2,val_auroc,best_epoch,status\n";
    for (const auto& c : table) {
        json l1 = c.lambda1, l2 = c.lambda2, au = c.val_auroc;  // shortest round-trip floats
        out << l1.dump() << "," << l2.dump() << "," << au.dump() << "," << c.best_epoch << ","
            << c.status << "\n";
    }
    const std::string s = out.str();
    write_file_bytes(path, s.data(), s.size());
}

AeTrainResult train_autoencoder(const Dataset& ds, const std::vector<size_t>& train_indices,
                                size_t epochs, double lr, uint64_t seed, size_t latent_dim,
                                size_t batch_size) {
    if (train_indices.empty()) throw ConfigError("train_autoencoder: no training records");
    const size_t len = ds.segment_len();

    AeSpec spec;
    spec.input_len = len;
    spec.latent_dim = latent_dim;

    AeTrainResult res;
    res.model = Autoencoder<float>(spec);
    res.model.init(seed);
    Adam<float> opt(lr);
    auto params = res.model.params();

    // last ~10% of the provided indices form the holdout slice
    const size_t n_hold = std::max<size_t>(1, train_indices.size() / 10);
    std::vector<size_t> fit_idx(train_indices.begin(), train_indices.end() - n_hold);
    std::vector<size_t> hold_idx(train_indices.end() - n_hold, train_indices.end());
    if (fit_idx.empty()) fit_idx = train_indices;  // tiny datasets: overlap is fine

    auto holdout_mse = [&]() {
        double acc = 0.0;
        size_t seen = 0;
        std::vector<float> x;
        for (size_t at = 0; at < hold_idx.size(); at += batch_size) {
            const size_t bs = std::min(batch_size, hold_idx.size() - at);
            x.resize(bs * len);
            for (size_t b = 0; b < bs; ++b)
                std::memcpy(x.data() + b * len, ds.records[hold_idx[at + b]].samples.data(),
                            4 * len);
            std::vector<float> recon = res.model.forward(x, bs, /*train=*/false);
            acc += mse_loss(recon, x, /*grad=*/false).loss * bs;
            seen += bs;
        }
        return acc / static_cast<double>(seen);
    };

    const auto t0 = Clock::now();
    res.initial_mse = holdout_mse();

    Rng shuffle_rng(derive_seed(seed, 0xAE5F));
    std::vector<float> x;
    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<size_t> order = fit_idx;
        shuffle_rng.shuffle(order);
        for (size_t at = 0; at < order.size(); at += batch_size) {
            const size_t bs = std::min(batch_size, order.size() - at);
            x.resize(bs * len);
            for (size_t b = 0; b < bs; ++b)
                std::memcpy(x.data() + b * len, ds.records[order[at + b]].samples.data(), 4 * len);
            std::vector<float> recon = res.model.forward(x, bs, /*train=*/true);
            LossGrad<float> mse = mse_loss(recon, x);
            if (!std::isfinite(mse.loss)) throw NumericError("train_autoencoder: loss diverged");
            res.model.zero_grad();
            res.model.backward(mse.dlogits);
            opt.step(params);
        }
    }

    res.final_mse = holdout_mse();
    res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return res;
}

}  // namespace ppgaf
