// ============================================================================
// ppgaf — alarm-labeled PPG atrial fibrillation pipeline.
//
// Subcommands: synth, label, embed-cluster, train, grid-search, eval,
// analyze-latent, experiment, bench-timing. Every command validates its
// JSON config up front, never mutates its inputs, writes outputs only under
// the requested destination, and drops a run manifest (config hash, input
// hashes, output hashes) beside them.
//
// Exit codes: 0 ok, 1 I/O, 2 config, 3 undefined metric / bad data,
// 4 numeric failure.
// ============================================================================

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "ppgaf/checkpoint.hpp"
#include "ppgaf/config.hpp"
#include "ppgaf/errors.hpp"
#include "ppgaf/kernels.hpp"
#include "ppgaf/kmeans.hpp"
#include "ppgaf/metrics.hpp"
#include "ppgaf/util.hpp"
#include "ppgaf/waveform_io.hpp"

namespace fs = std::filesystem;
using namespace ppgaf;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Timer {
    Clock::time_point t0 = Clock::now();
    double seconds() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }
};

json load_and_validate(const std::string& path, const std::vector<std::string>& overrides) {
    json cfg = load_config_file(path);
    apply_overrides(cfg, overrides);
    validate_config(cfg);
    return cfg;
}

void ensure_outdir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::vector<size_t> all_indices(const Dataset& ds) {
    std::vector<size_t> idx(ds.records.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

std::vector<int> labels_of(const Dataset& ds, const std::vector<size_t>& idx, bool use_true) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (size_t i : idx) {
        const auto& r = ds.records[i];
        out.push_back(binary_label(use_true && r.true_label ? *r.true_label : r.label));
    }
    return out;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    CorpusSpec spec = parse_synth_section(cfg);

    Dataset ds = gen_labeled_corpus(spec);
    write_ppgd1(out, ds);

    RunManifest manifest("synth", cfg);
    manifest.add_output(out);
    manifest.set_wall_clock(timer.seconds());
    manifest.write(out + ".manifest.json");
    std::cout << "synth: wrote " << ds.records.size() << " records to " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// label
// ---------------------------------------------------------------------------

int cmd_label(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& waveform_dir, const std::string& alarm_csv,
              const std::string& out) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    LabelingRun run = parse_labeling_section(cfg);
    const uint64_t seed = config_seed(cfg);

    std::vector<std::string> wf_paths;
    for (const auto& entry : fs::directory_iterator(waveform_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ppgw")
            wf_paths.push_back(entry.path().string());
    std::sort(wf_paths.begin(), wf_paths.end());

    std::vector<Waveform> waveforms;
    for (const auto& p : wf_paths) {
        Waveform w = read_ppgw1(p);
        if (run.target_fs_hz && std::abs(w.fs_hz - *run.target_fs_hz) > 1e-9)
            w = resample(w, *run.target_fs_hz);
        waveforms.push_back(std::move(w));
    }

    std::vector<uint8_t> csv_bytes = read_file_bytes(alarm_csv);
    AlarmLog log = parse_alarm_log(std::string(csv_bytes.begin(), csv_bytes.end()));
    if (log.unknown_type_count > 0)
        std::cerr << "label: warning: " << log.unknown_type_count
                  << " alarm rows with unknown types mapped to OTHER\n";

    ExtractResult af = extract_af_segments(log.events, waveforms, run.labeling);
    ExtractResult pvc = extract_pvc_segments(log.events, waveforms, run.labeling);
    ExtractResult nsr = extract_nsr_segments(log.events, waveforms, run.labeling);

    Dataset ds = assemble_dataset(af.segments, pvc.segments, nsr.segments, run.balance, seed);
    ds.gen_params = {{"source", "label"},
                     {"alarm_csv", alarm_csv},
                     {"unknown_alarm_types", log.unknown_type_count},
                     {"af_skipped_out_of_bounds", af.skipped_out_of_bounds},
                     {"pvc_skipped_out_of_bounds", pvc.skipped_out_of_bounds},
                     {"pvc_excluded_near_af", pvc.excluded_near_af},
                     {"nsr_skipped_out_of_bounds", nsr.skipped_out_of_bounds}};
    write_ppgd1(out, ds);

    RunManifest manifest("label", cfg);
    manifest.add_input(alarm_csv);
    for (const auto& p : wf_paths) manifest.add_input(p);
    manifest.add_output(out);
    manifest.set_wall_clock(timer.seconds());
    manifest.write(out + ".manifest.json");

    std::cout << "label: " << af.segments.size() << " AF, " << pvc.segments.size() << " PVC, "
              << nsr.segments.size() << " NSR segments -> " << ds.records.size()
              << " records (excluded near AF: " << pvc.excluded_near_af
              << ", out of bounds: " << af.skipped_out_of_bounds + pvc.skipped_out_of_bounds +
                     nsr.skipped_out_of_bounds
              << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// embed-cluster
// ---------------------------------------------------------------------------

int cmd_embed_cluster(const std::string& config_path, const std::vector<std::string>& overrides,
                      const std::string& dataset_path, const std::string& outdir) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    ClusterConfig cc = parse_cluster_section(cfg);
    TrainConfig tc = parse_train_section(cfg);
    const uint64_t seed = config_seed(cfg);

    Dataset ds = read_ppgd1(dataset_path);
    ensure_outdir(outdir);

    auto [train_patients, val_patients] = patient_split(ds, tc.val_fraction, seed);
    std::vector<size_t> train_idx = records_of_patients(ds, train_patients);
    if (cc.m > train_idx.size())
        throw ConfigError("embed-cluster: cluster.m exceeds the training record count");

    const std::string ae_path = (fs::path(outdir) / "ae.ckpt").string();
    double ae_seconds = 0.0;
    bool cached = false;
    Autoencoder<float> ae;
    if (fs::exists(ae_path)) {
        ae = load_autoencoder(ae_path);
        if (ae.spec().input_len != ds.segment_len())
            throw ConfigError("embed-cluster: cached autoencoder input length mismatch");
        cached = true;
        std::cout << "embed-cluster: reusing cached autoencoder " << ae_path << "\n";
    } else {
        AeTrainResult tr =
            train_autoencoder(ds, train_idx, cc.ae_epochs, cc.ae_lr, seed, cc.latent_dim, cc.ae_batch);
        ae = std::move(tr.model);
        ae_seconds = tr.seconds;
        save_autoencoder(ae_path, ae);
        std::cout << "embed-cluster: autoencoder holdout MSE " << tr.initial_mse << " -> "
                  << tr.final_mse << " in " << tr.seconds << " s\n";
    }

    Embedding all = embed(ae, ds);
    const std::string emb_path = (fs::path(outdir) / "embeddings.emb").string();
    write_emb1(emb_path, all);

    Embedding train_emb;
    train_emb.dim = all.dim;
    train_emb.n = train_idx.size();
    train_emb.data.reserve(train_emb.n * train_emb.dim);
    for (size_t i : train_idx)
        train_emb.data.insert(train_emb.data.end(), all.row(i), all.row(i) + all.dim);

    ClusterModel cm = kmeans(train_emb, cc.m, seed);
    const std::string cm_path = (fs::path(outdir) / "cluster.json").string();
    write_cluster_model(cm_path, cm);

    json timing = {{"ae_pretrain_seconds", ae_seconds}, {"cached", cached}};
    const std::string timing_path = (fs::path(outdir) / "ae_timing.json").string();
    {
        const std::string s = timing.dump(2);
        write_file_bytes(timing_path, s.data(), s.size());
    }

    RunManifest manifest("embed-cluster", cfg);
    manifest.add_input(dataset_path);
    manifest.add_output(ae_path);
    manifest.add_output(emb_path);
    manifest.add_output(cm_path);
    manifest.set_wall_clock(timer.seconds());
    manifest.write((fs::path(outdir) / "run_manifest.json").string());

    std::cout << "embed-cluster: M=" << cm.m << " inertia=" << cm.inertia << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train / grid-search
// ---------------------------------------------------------------------------

std::vector<int> cluster_ids_for(const Dataset& ds, const std::string& emb_path,
                                 const std::string& cluster_path) {
    Embedding emb = read_emb1(emb_path);
    if (emb.n != ds.records.size())
        throw ShapeError("train: embeddings row count does not match the dataset");
    ClusterModel cm = read_cluster_model(cluster_path);
    return assign(cm, emb);
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& dataset_path, const std::string& emb_path,
              const std::string& cluster_path, const std::string& outdir) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    TrainConfig tc = parse_train_section(cfg);

    Dataset ds = read_ppgd1(dataset_path);
    ensure_outdir(outdir);

    std::vector<int> ids;
    const std::vector<int>* ids_ptr = nullptr;
    if (tc.loss_mode == LossMode::CMC) {
        if (emb_path.empty() || cluster_path.empty())
            throw ConfigError("train: CMC mode needs --embeddings and --cluster-model");
        ids = cluster_ids_for(ds, emb_path, cluster_path);
        ids_ptr = &ids;
    }

    const std::string hist_path = (fs::path(outdir) / "history.jsonl").string();
    const std::string last_path = (fs::path(outdir) / "last.ckpt").string();
    TrainHooks hooks;
    hooks.on_epoch = [&](const std::vector<EpochStats>& history, Classifier<float>& model) {
        write_history_jsonl(hist_path, history);
        save_classifier(last_path, model);
    };

    TrainResult res = train(ds, ids_ptr, tc, &hooks);

    const std::string model_path = (fs::path(outdir) / "model.ckpt").string();
    save_classifier(model_path, res.model);
    write_history_jsonl(hist_path, res.history);

    RunManifest manifest("train", cfg);
    manifest.add_input(dataset_path);
    if (!emb_path.empty()) manifest.add_input(emb_path);
    if (!cluster_path.empty()) manifest.add_input(cluster_path);
    manifest.add_output(model_path);
    manifest.add_output(hist_path);
    manifest.add_stable_hash(hist_path, history_content_sha256(res.history));
    manifest.set_wall_clock(timer.seconds());
    manifest.write((fs::path(outdir) / "run_manifest.json").string());

    std::cout << "train: best epoch " << res.best_epoch << " val_loss "
              << res.history[res.best_epoch].val_loss << " -> " << model_path << "\n";
    return 0;
}

int cmd_grid_search(const std::string& config_path, const std::vector<std::string>& overrides,
                    const std::string& dataset_path, const std::string& emb_path,
                    const std::string& cluster_path, const std::string& outdir) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    TrainConfig tc = parse_train_section(cfg);
    GridConfig grid = parse_grid_section(cfg);

    Dataset ds = read_ppgd1(dataset_path);
    ensure_outdir(outdir);
    std::vector<int> ids = cluster_ids_for(ds, emb_path, cluster_path);

    GridSearchResult res = grid_search_lambdas(ds, ids, grid.cells, tc);

    const std::string csv_path = (fs::path(outdir) / "grid.csv").string();
    write_grid_csv(csv_path, res.table);
    const std::string model_path = (fs::path(outdir) / "model.ckpt").string();
    save_classifier(model_path, res.best.model);
    const std::string hist_path = (fs::path(outdir) / "history.jsonl").string();
    write_history_jsonl(hist_path, res.best.history);

    json best = {{"lambda1", res.lambda1}, {"lambda2", res.lambda2}};
    const std::string best_path = (fs::path(outdir) / "best_lambdas.json").string();
    {
        const std::string s = best.dump(2);
        write_file_bytes(best_path, s.data(), s.size());
    }

    RunManifest manifest("grid-search", cfg);
    manifest.add_input(dataset_path);
    manifest.add_input(emb_path);
    manifest.add_input(cluster_path);
    manifest.add_output(csv_path);
    manifest.add_output(model_path);
    manifest.add_output(best_path);
    manifest.set_wall_clock(timer.seconds());
    manifest.write((fs::path(outdir) / "run_manifest.json").string());

    std::cout << "grid-search: best (lambda1, lambda2) = (" << res.lambda1 << ", " << res.lambda2
              << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

MetricsReport evaluate_checkpoint(Classifier<float>& model, const Dataset& ds,
                                  const EvalConfig& ec, uint64_t seed) {
    std::vector<size_t> idx = all_indices(ds);
    std::vector<double> scores = score_records(model, ds, idx);
    std::vector<ScoredRecord> scored = make_scored(ds, idx, scores, ec.use_true_labels);

    MetricsReport rep;
    rep.n_records = scored.size();
    rep.auroc_all = auroc(scored);
    rep.auprc_all = auprc(scored);
    rep.subgroups = subgroup_eval(scored);
    rep.bootstrap = bootstrap_auroc(scored, ec.bootstrap_draws, seed);
    rep.significance_alpha = ec.alpha;
    rep.n_comparisons = ec.n_comparisons;
    rep.significance_threshold = bonferroni_threshold(ec.alpha, ec.n_comparisons);
    return rep;
}

void write_eval_artifacts(const MetricsReport& rep, const std::string& outdir,
                          RunManifest& manifest) {
    const std::string metrics_path = (fs::path(outdir) / "metrics.json").string();
    {
        const std::string s = rep.to_json().dump(2);
        write_file_bytes(metrics_path, s.data(), s.size());
    }
    manifest.add_output(metrics_path);

    if (rep.bootstrap) {
        std::ostringstream csv;
        csv << "draw,auroc\n";
        for (size_t d = 0; d < rep.bootstrap->auroc_draws.size(); ++d)
            csv << d << "," << json(rep.bootstrap->auroc_draws[d]).dump() << "\n";
        const std::string bs_path = (fs::path(outdir) / "bootstrap.csv").string();
        const std::string s = csv.str();
        write_file_bytes(bs_path, s.data(), s.size());
        manifest.add_output(bs_path);
    }

    if (rep.subgroups) {
        std::ostringstream csv;
        csv << "quality,n,auroc,auprc\n";
        auto row = [&](const char* name, size_t n, const std::optional<double>& roc,
                       const std::optional<double>& prc) {
            csv << name << "," << n << "," << (roc ? json(*roc).dump() : "undefined") << ","
                << (prc ? json(*prc).dump() : "undefined") << "\n";
        };
        row("GOOD", rep.subgroups->n_good, rep.subgroups->auroc_good, rep.subgroups->auprc_good);
        row("BAD", rep.subgroups->n_bad, rep.subgroups->auroc_bad, rep.subgroups->auprc_bad);
        const std::string sg_path = (fs::path(outdir) / "subgroups.csv").string();
        const std::string s = csv.str();
        write_file_bytes(sg_path, s.data(), s.size());
        manifest.add_output(sg_path);
    }
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& ckpt_path, const std::string& dataset_path,
             const std::string& outdir) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    EvalConfig ec = parse_eval_section(cfg);
    const uint64_t seed = config_seed(cfg);

    Classifier<float> model = load_classifier(ckpt_path);
    Dataset ds = read_ppgd1(dataset_path);
    ensure_outdir(outdir);

    MetricsReport rep = evaluate_checkpoint(model, ds, ec, seed);

    RunManifest manifest("eval", cfg);
    manifest.add_input(ckpt_path);
    manifest.add_input(dataset_path);
    write_eval_artifacts(rep, outdir, manifest);
    manifest.set_wall_clock(timer.seconds());
    manifest.write((fs::path(outdir) / "run_manifest.json").string());

    std::cout << "eval: AUROC " << *rep.auroc_all << " AUPRC " << *rep.auprc_all << " over "
              << rep.n_records << " records\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze-latent
// ---------------------------------------------------------------------------

int cmd_analyze_latent(const std::string& config_path, const std::vector<std::string>& overrides,
                       const std::string& ckpt_path, const std::string& query_path,
                       const std::string& reference_path, const std::string& out_csv) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    LatentConfig lc = parse_latent_section(cfg);
    const uint64_t seed = config_seed(cfg);

    Classifier<float> model = load_classifier(ckpt_path);
    Dataset query_ds = read_ppgd1(query_path);
    Dataset ref_ds = read_ppgd1(reference_path);

    // seeded query sample
    std::vector<size_t> q_idx = all_indices(query_ds);
    if (q_idx.size() > lc.n_queries) {
        Rng rng(derive_seed(seed, 0x9E));
        rng.shuffle(q_idx);
        q_idx.resize(lc.n_queries);
        std::sort(q_idx.begin(), q_idx.end());
    }
    std::vector<size_t> r_idx = all_indices(ref_ds);

    Embedding q_lat = latents_of(model, query_ds, q_idx);
    Embedding r_lat = latents_of(model, ref_ds, r_idx);

    std::vector<int> q_true = labels_of(query_ds, q_idx, /*use_true=*/true);
    std::vector<int> r_obs = labels_of(ref_ds, r_idx, /*use_true=*/false);
    std::vector<int> r_true = labels_of(ref_ds, r_idx, /*use_true=*/true);

    bool clamped = false;
    auto stats = latent_neighborhood_analysis(q_lat, q_true, r_lat, r_obs, r_true, lc.k, &clamped);
    if (clamped)
        std::cerr << "analyze-latent: warning: k clamped to the reference size ("
                  << r_idx.size() << ")\n";

    std::ostringstream csv;
    csv << "query_record,patient_id,purity,ccr,k\n";
    for (size_t q = 0; q < stats.size(); ++q)
        csv << q_idx[q] << "," << query_ds.records[q_idx[q]].patient_id << ","
            << json(stats[q].purity).dump() << "," << json(stats[q].ccr).dump() << ","
            << stats[q].k_used << "\n";
    const std::string s = csv.str();
    write_file_bytes(out_csv, s.data(), s.size());

    RunManifest manifest("analyze-latent", cfg);
    manifest.add_input(ckpt_path);
    manifest.add_input(query_path);
    manifest.add_input(reference_path);
    manifest.add_output(out_csv);
    manifest.set_wall_clock(timer.seconds());
    manifest.write(out_csv + ".manifest.json");

    double mean_purity = 0.0, mean_ccr = 0.0;
    for (const auto& st : stats) {
        mean_purity += st.purity;
        mean_ccr += st.ccr;
    }
    mean_purity /= static_cast<double>(stats.size());
    mean_ccr /= static_cast<double>(stats.size());
    std::cout << "analyze-latent: " << stats.size() << " queries, mean purity " << mean_purity
              << ", mean ccr " << mean_ccr << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

// Patient-coherent subsample: whole patients in seeded order until the
// target count, the last patient trimmed to hit it exactly.
Dataset subsample_patients(const Dataset& pool, size_t target_records, uint64_t seed) {
    std::vector<std::string> patients = pool.patient_ids_sorted();
    Rng rng(derive_seed(seed, 0x5A));
    rng.shuffle(patients);

    std::map<std::string, std::vector<size_t>> by_patient;
    for (size_t i = 0; i < pool.records.size(); ++i)
        by_patient[pool.records[i].patient_id].push_back(i);

    Dataset out;
    out.gen_params = pool.gen_params;
    for (const auto& p : patients) {
        if (out.records.size() >= target_records) break;
        for (size_t i : by_patient[p]) {
            if (out.records.size() >= target_records) break;
            out.records.push_back(pool.records[i]);
        }
    }
    if (out.records.size() < target_records)
        throw ConfigError("experiment: train pool smaller than the requested cell size");
    return out;
}

int cmd_experiment(const std::string& config_path, const std::vector<std::string>& overrides,
                   const std::string& pool_path, const std::string& test_path,
                   const std::string& outdir) {
    Timer timer;
    json cfg = load_and_validate(config_path, overrides);
    ExperimentConfig ex = parse_experiment_section(cfg);
    TrainConfig base_tc = parse_train_section(cfg);
    ClusterConfig cc = parse_cluster_section(cfg);
    EvalConfig ec = parse_eval_section(cfg);
    const uint64_t seed = config_seed(cfg);

    Dataset pool = read_ppgd1(pool_path);
    Dataset test = read_ppgd1(test_path);
    ensure_outdir(outdir);

    RunManifest manifest("experiment", cfg);
    manifest.add_input(pool_path);
    manifest.add_input(test_path);

    struct SummaryRow {
        std::string cell_id, size_name, preset, loss_mode;
        size_t records;
        MetricsReport rep;
    };
    std::vector<SummaryRow> rows;

    size_t cell_index = 0;
    for (const auto& size : ex.sizes)
        for (const auto& preset : ex.presets)
            for (LossMode mode : ex.loss_modes) {
                const uint64_t cell_seed = derive_seed(seed, 1000 + cell_index);
                std::ostringstream id;
                id << std::setw(2) << std::setfill('0') << cell_index << "_" << size.name << "_"
                   << preset << "_" << to_string(mode);
                const std::string cell_id = id.str();
                const std::string cell_dir = (fs::path(outdir) / ("cell_" + cell_id)).string();
                ensure_outdir(cell_dir);

                Dataset cell_ds = subsample_patients(pool, size.records, cell_seed);
                if (size.labels == "true") {
                    for (auto& r : cell_ds.records) {
                        if (!r.true_label)
                            throw ConfigError("experiment: clean-label cell needs true labels");
                        r.label = *r.true_label;
                    }
                }

                TrainConfig tc = base_tc;
                tc.preset = preset;
                tc.loss_mode = mode;
                tc.seed = cell_seed;

                std::vector<int> ids;
                const std::vector<int>* ids_ptr = nullptr;
                double ae_seconds = 0.0;
                if (mode == LossMode::CMC) {
                    auto [tp, vp] = patient_split(cell_ds, tc.val_fraction, cell_seed);
                    auto tidx = records_of_patients(cell_ds, tp);
                    AeTrainResult ae = train_autoencoder(cell_ds, tidx, cc.ae_epochs, cc.ae_lr,
                                                         cell_seed, cc.latent_dim, cc.ae_batch);
                    ae_seconds = ae.seconds;
                    Embedding all = embed(ae.model, cell_ds);
                    Embedding temb;
                    temb.dim = all.dim;
                    temb.n = tidx.size();
                    for (size_t i : tidx)
                        temb.data.insert(temb.data.end(), all.row(i), all.row(i) + all.dim);
                    ClusterModel cm = kmeans(temb, cc.m, cell_seed);
                    ids = assign(cm, all);
                    ids_ptr = &ids;
                }

                TrainResult tr = train(cell_ds, ids_ptr, tc);
                save_classifier((fs::path(cell_dir) / "model.ckpt").string(), tr.model);
                write_history_jsonl((fs::path(cell_dir) / "history.jsonl").string(), tr.history);

                MetricsReport rep = evaluate_checkpoint(tr.model, test, ec, cell_seed);
                if (ae_seconds > 0.0) rep.ae_pretrain_seconds = ae_seconds;
                {
                    const std::string s = rep.to_json().dump(2);
                    const std::string mp = (fs::path(cell_dir) / "metrics.json").string();
                    write_file_bytes(mp, s.data(), s.size());
                    manifest.add_output(mp);
                }

                rows.push_back({cell_id, size.name, preset, to_string(mode), size.records, rep});
                std::cout << "experiment: cell " << cell_id << " AUROC " << *rep.auroc_all << "\n";
                ++cell_index;
            }

    std::sort(rows.begin(), rows.end(),
              [](const SummaryRow& a, const SummaryRow& b) { return a.cell_id < b.cell_id; });

    std::ostringstream summary;
    summary << "cell_id,size_name,train_records,preset,loss_mode,auroc,auprc,auroc_good,auroc_bad,"
               "drop_pct\n";
    std::ostringstream fig5;
    fig5 << "method,auroc_good,drop_pct\n";
    for (const auto& r : rows) {
        const auto& sg = *r.rep.subgroups;
        summary << r.cell_id << "," << r.size_name << "," << r.records << "," << r.preset << ","
                << r.loss_mode << "," << json(*r.rep.auroc_all).dump() << ","
                << json(*r.rep.auprc_all).dump() << ","
                << (sg.auroc_good ? json(*sg.auroc_good).dump() : "undefined") << ","
                << (sg.auroc_bad ? json(*sg.auroc_bad).dump() : "undefined") << ","
                << (sg.auroc_drop_pct ? json(*sg.auroc_drop_pct).dump() : "undefined") << "\n";
        fig5 << r.cell_id << ","
             << (sg.auroc_good ? json(*sg.auroc_good).dump() : "undefined") << ","
             << (sg.auroc_drop_pct ? json(*sg.auroc_drop_pct).dump() : "undefined") << "\n";
    }
    const std::string summary_path = (fs::path(outdir) / "summary.csv").string();
    const std::string fig5_path = (fs::path(outdir) / "fig5.csv").string();
    {
        const std::string s = summary.str();
        write_file_bytes(summary_path, s.data(), s.size());
        const std::string f = fig5.str();
        write_file_bytes(fig5_path, f.data(), f.size());
    }
    manifest.add_output(summary_path);
    manifest.add_output(fig5_path);
    manifest.set_wall_clock(timer.seconds());
    manifest.write((fs::path(outdir) / "run_manifest.json").string());
    std::cout << "experiment: " << rows.size() << " cells -> " << summary_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench-timing
// ---------------------------------------------------------------------------

int cmd_bench_timing(const std::string& outdir) {
    ensure_outdir(outdir);
    json bench;

    // Kernel micro-benchmarks: serial reference vs OpenMP.
    {
        const size_t B = 64, Cin = 8, Lin = 600, Cout = 16, K = 3;
        Rng rng(1);
        std::vector<float> x(B * Cin * Lin), w(Cout * Cin * K), bias(Cout);
        for (auto& v : x) v = static_cast<float>(rng.normal());
        for (auto& v : w) v = static_cast<float>(rng.normal());
        const size_t Lout = kernels::conv_out_len(Lin, K, 1, 1);
        std::vector<float> y(B * Cout * Lout);

        auto time_it = [](auto&& fn, int reps) {
            Timer t;
            for (int r = 0; r < reps; ++r) fn();
            return t.seconds() / reps;
        };
        const double serial_s = time_it(
            [&] {
                kernels::serial::conv1d_forward(x.data(), B, Cin, Lin, w.data(), bias.data(), Cout,
                                                K, 1, 1, y.data(), Lout);
            },
            20);
        const double omp_s = time_it(
            [&] {
                kernels::conv1d_forward(x.data(), B, Cin, Lin, w.data(), bias.data(), Cout, K, 1, 1,
                                        y.data(), Lout);
            },
            20);
        bench["conv1d_forward"] = {{"serial_s", serial_s},
                                   {"openmp_s", omp_s},
                                   {"speedup", serial_s / omp_s}};
        std::cout << "conv1d_forward: serial " << serial_s << " s, openmp " << omp_s
                  << " s, speedup " << serial_s / omp_s << "\n";

        const size_t Bp = 256, D = 64;
        std::vector<float> lat(Bp * D);
        for (auto& v : lat) v = static_cast<float>(rng.normal());
        std::vector<int> ids(Bp);
        for (auto& c : ids) c = static_cast<int>(rng.below(6));
        double i1, e1;
        size_t p1, p2;
        const double pw_serial = time_it(
            [&] {
                kernels::serial::pairwise_cluster_sums(lat.data(), Bp, D, ids.data(), &i1, &e1, &p1,
                                                       &p2);
            },
            20);
        const double pw_omp = time_it(
            [&] { kernels::pairwise_cluster_sums(lat.data(), Bp, D, ids.data(), &i1, &e1, &p1, &p2); },
            20);
        bench["pairwise_cluster_sums"] = {{"serial_s", pw_serial},
                                          {"openmp_s", pw_omp},
                                          {"speedup", pw_serial / pw_omp}};
        std::cout << "pairwise_cluster_sums: serial " << pw_serial << " s, openmp " << pw_omp
                  << " s, speedup " << pw_serial / pw_omp << "\n";
    }

    // CE vs CMC per-epoch wall clock on a small synthetic corpus.
    {
        CorpusSpec spec;
        spec.n_patients = 40;
        spec.segs_per_patient = 10;
        spec.window_s = 30.0;
        spec.fs_hz = 40.0;
        spec.seed = 7;
        spec.mix_af = 0.5;
        spec.mix_nsr = 0.3;
        spec.mix_pvc = 0.2;
        spec.noise.p_bad_quality = 0.3;
        spec.noise.p_flip_good = 0.1;
        spec.noise.p_flip_bad = 0.3;
        Dataset ds = gen_labeled_corpus(spec);

        auto [tp, vp] = patient_split(ds, 0.2, 7);
        auto tidx = records_of_patients(ds, tp);
        AeTrainResult ae = train_autoencoder(ds, tidx, 2, 1e-3, 7, 32, 64);
        Embedding all = embed(ae.model, ds);
        Embedding temb;
        temb.dim = all.dim;
        temb.n = tidx.size();
        for (size_t i : tidx) temb.data.insert(temb.data.end(), all.row(i), all.row(i) + all.dim);
        ClusterModel cm = kmeans(temb, 6, 7);
        std::vector<int> ids = assign(cm, all);

        TrainConfig ce;
        ce.loss_mode = LossMode::CE;
        ce.epochs = 3;
        ce.batch_size = 64;
        ce.seed = 7;
        TrainConfig cmc = ce;
        cmc.loss_mode = LossMode::CMC;
        cmc.lambda1 = 0.01;
        cmc.lambda2 = 0.001;

        TrainResult r_ce = train(ds, nullptr, ce);
        TrainResult r_cmc = train(ds, &ids, cmc);
        TimingComparison cmp = timing_compare(r_ce.history, r_cmc.history);
        bench["epoch_timing"] = {{"ce_median_s", cmp.median_epoch_seconds_a},
                                 {"cmc_median_s", cmp.median_epoch_seconds_b},
                                 {"overhead_ratio", cmp.overhead_ratio},
                                 {"ae_pretrain_seconds", ae.seconds}};
        std::cout << "epoch timing: CE " << cmp.median_epoch_seconds_a << " s, CMC "
                  << cmp.median_epoch_seconds_b << " s, ratio " << cmp.overhead_ratio
                  << " (AE pretrain " << ae.seconds << " s)\n";
    }

    const std::string out_path = (fs::path(outdir) / "bench.json").string();
    const std::string s = bench.dump(2);
    write_file_bytes(out_path, s.data(), s.size());
    std::cout << "bench-timing: wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
    if (const char* env = std::getenv("CMC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
#endif

    CLI::App app{"Alarm-labeled PPG atrial fibrillation pipeline"};
    app.require_subcommand(1);

    std::string config_path, out, outdir, waveform_dir, alarm_csv, dataset_path, emb_path,
        cluster_path, ckpt_path, query_path, reference_path, pool_path, test_path;
    std::vector<std::string> overrides;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--set", overrides, "Override config keys: section.key=value");
    };

    CLI::App* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
    add_config(synth);
    synth->add_option("--out", out, "Output PPGD1 dataset")->required();

    CLI::App* label = app.add_subcommand("label", "Label waveforms from an alarm log");
    add_config(label);
    label->add_option("--waveforms", waveform_dir, "Directory of PPGW1 files")->required();
    label->add_option("--alarms", alarm_csv, "Alarm CSV")->required();
    label->add_option("--out", out, "Output PPGD1 dataset")->required();

    CLI::App* embed_cluster =
        app.add_subcommand("embed-cluster", "Train the autoencoder, embed, fit K-means");
    add_config(embed_cluster);
    embed_cluster->add_option("--dataset", dataset_path, "PPGD1 dataset")->required();
    embed_cluster->add_option("--outdir", outdir, "Output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "Train a classifier (CE / SCE / CMC)");
    add_config(train_cmd);
    train_cmd->add_option("--dataset", dataset_path, "PPGD1 dataset")->required();
    train_cmd->add_option("--embeddings", emb_path, "EMB1 file (CMC mode)");
    train_cmd->add_option("--cluster-model", cluster_path, "Cluster model JSON (CMC mode)");
    train_cmd->add_option("--outdir", outdir, "Output directory")->required();

    CLI::App* grid = app.add_subcommand("grid-search", "Grid search over (lambda1, lambda2)");
    add_config(grid);
    grid->add_option("--dataset", dataset_path, "PPGD1 dataset")->required();
    grid->add_option("--embeddings", emb_path, "EMB1 file")->required();
    grid->add_option("--cluster-model", cluster_path, "Cluster model JSON")->required();
    grid->add_option("--outdir", outdir, "Output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    add_config(eval_cmd);
    eval_cmd->add_option("--checkpoint", ckpt_path, "CKPT1 classifier")->required();
    eval_cmd->add_option("--dataset", dataset_path, "PPGD1 dataset")->required();
    eval_cmd->add_option("--outdir", outdir, "Output directory")->required();

    CLI::App* latent = app.add_subcommand("analyze-latent", "Nearest-neighbor purity / CCR");
    add_config(latent);
    latent->add_option("--checkpoint", ckpt_path, "CKPT1 classifier")->required();
    latent->add_option("--query", query_path, "Query PPGD1 dataset")->required();
    latent->add_option("--reference", reference_path, "Reference PPGD1 dataset")->required();
    latent->add_option("--out", out, "Output CSV")->required();

    CLI::App* experiment = app.add_subcommand("experiment", "Size x depth x loss comparison grid");
    add_config(experiment);
    experiment->add_option("--train-pool", pool_path, "Training pool PPGD1")->required();
    experiment->add_option("--test", test_path, "Test PPGD1")->required();
    experiment->add_option("--outdir", outdir, "Output directory")->required();

    CLI::App* bench = app.add_subcommand("bench-timing", "Kernel and epoch timing benchmarks");
    bench->add_option("--out", outdir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(config_path, overrides, out);
        if (label->parsed()) return cmd_label(config_path, overrides, waveform_dir, alarm_csv, out);
        if (embed_cluster->parsed())
            return cmd_embed_cluster(config_path, overrides, dataset_path, outdir);
        if (train_cmd->parsed())
            return cmd_train(config_path, overrides, dataset_path, emb_path, cluster_path, outdir);
        if (grid->parsed())
            return cmd_grid_search(config_path, overrides, dataset_path, emb_path, cluster_path,
                                   outdir);
        if (eval_cmd->parsed())
            return cmd_eval(config_path, overrides, ckpt_path, dataset_path, outdir);
        if (latent->parsed())
            return cmd_analyze_latent(config_path, overrides, ckpt_path, query_path, reference_path,
                                      out);
        if (experiment->parsed())
            return cmd_experiment(config_path, overrides, pool_path, test_path, outdir);
        if (bench->parsed()) return cmd_bench_timing(outdir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const UndefinedMetric& e) {
        std::cerr << "undefined metric: " << e.what() << "\n";
        return 3;
    } catch (const EmptyClass& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const TooFewPoints& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const SplitError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DeficitTooLarge& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
