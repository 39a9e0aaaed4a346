#include "ppgaf/config.hpp"

#include <set>

#include "ppgaf/errors.hpp"
#include "ppgaf/util.hpp"

namespace ppgaf {

using nlohmann::json;

json load_config_file(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    json cfg;
    try {
        cfg = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config: top level must be an object");
    return cfg;
}

void apply_overrides(json& cfg, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must look like section.key=value: " + ov);
        const std::string path = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);

        json* node = &cfg;
        size_t at = 0;
        while (true) {
            const size_t dot = path.find('.', at);
            const std::string key = path.substr(at, dot == std::string::npos ? dot : dot - at);
            if (key.empty()) throw ConfigError("override has an empty key segment: " + ov);
            if (dot == std::string::npos) {
                try {
                    (*node)[key] = json::parse(value);
                } catch (const json::exception&) {
                    (*node)[key] = value;  // bare string
                }
                break;
            }
            node = &(*node)[key];
            at = dot + 1;
        }
    }
}

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [key, val] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key `" + where + "." + key + "`");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for `" + key + "`: " + e.what());
    }
}

const json kEmpty = json::object();

const json& section(const json& cfg, const std::string& name) {
    if (!cfg.contains(name)) return kEmpty;
    if (!cfg.at(name).is_object()) throw ConfigError("config: section `" + name + "` must be an object");
    return cfg.at(name);
}

}  // namespace

void validate_config(const json& cfg) {
    check_keys(cfg,
               {"schema_version", "seed", "synth", "labeling", "train", "cluster", "eval", "latent",
                "grid", "experiment"},
               "<top>");
    if (!cfg.contains("schema_version"))
        throw ConfigError("config: missing required key `schema_version`");
    if (cfg.at("schema_version").get<int>() != kSchemaVersion)
        throw ConfigError("config: unsupported schema_version (expected " +
                          std::to_string(kSchemaVersion) + ")");

    if (cfg.contains("synth")) {
        check_keys(cfg.at("synth"),
                   {"n_patients", "segs_per_patient", "mix_af", "mix_nsr", "mix_pvc", "window_s",
                    "fs_hz", "mixed_patients", "patient_prefix", "noise", "mean_rr_s",
                    "rr_jitter_s", "pvc_period"},
                   "synth");
        if (cfg.at("synth").contains("noise"))
            check_keys(cfg.at("synth").at("noise"),
                       {"p_flip_good", "p_flip_bad", "p_bad_quality", "light_noise_sigma",
                        "wander_amp", "noise_sigma", "burst_fraction"},
                       "synth.noise");
    }
    if (cfg.contains("labeling")) {
        check_keys(cfg.at("labeling"),
                   {"window_s", "half_window_s", "pvc_exclusion_s", "nsr_min_gap_s",
                    "sqi_threshold", "dedup_window_s", "target_fs_hz", "balance"},
                   "labeling");
        if (cfg.at("labeling").contains("balance") && !cfg.at("labeling").at("balance").is_null())
            check_keys(cfg.at("labeling").at("balance"), {"af", "non_af"}, "labeling.balance");
    }
    if (cfg.contains("train"))
        check_keys(cfg.at("train"),
                   {"lambda1", "lambda2", "epochs", "batch_size", "lr", "loss_mode",
                    "normalization_mode", "inter_margin", "val_fraction", "preset",
                    "use_batchnorm", "sce_alpha", "sce_beta", "sce_clamp_a"},
                   "train");
    if (cfg.contains("cluster"))
        check_keys(cfg.at("cluster"), {"m", "ae_epochs", "ae_lr", "latent_dim", "ae_batch"},
                   "cluster");
    if (cfg.contains("eval"))
        check_keys(cfg.at("eval"), {"bootstrap_draws", "use_true_labels", "alpha", "n_comparisons"},
                   "eval");
    if (cfg.contains("latent")) check_keys(cfg.at("latent"), {"k", "n_queries"}, "latent");
    if (cfg.contains("grid")) check_keys(cfg.at("grid"), {"lambda1", "lambda2"}, "grid");
    if (cfg.contains("experiment")) {
        check_keys(cfg.at("experiment"), {"sizes", "presets", "loss_modes"}, "experiment");
        if (cfg.at("experiment").contains("sizes"))
            for (const auto& s : cfg.at("experiment").at("sizes"))
                check_keys(s, {"name", "records", "labels"}, "experiment.sizes[]");
    }
}

uint64_t config_seed(const json& cfg) { return get_or<uint64_t>(cfg, "seed", 0); }

CorpusSpec parse_synth_section(const json& cfg) {
    const json& s = section(cfg, "synth");
    CorpusSpec spec;
    spec.n_patients = get_or<size_t>(s, "n_patients", spec.n_patients);
    spec.segs_per_patient = get_or<size_t>(s, "segs_per_patient", spec.segs_per_patient);
    spec.mix_af = get_or<double>(s, "mix_af", spec.mix_af);
    spec.mix_nsr = get_or<double>(s, "mix_nsr", spec.mix_nsr);
    spec.mix_pvc = get_or<double>(s, "mix_pvc", spec.mix_pvc);
    spec.window_s = get_or<double>(s, "window_s", spec.window_s);
    spec.fs_hz = get_or<double>(s, "fs_hz", spec.fs_hz);
    spec.mixed_patients = get_or<bool>(s, "mixed_patients", spec.mixed_patients);
    spec.patient_prefix = get_or<std::string>(s, "patient_prefix", spec.patient_prefix);
    spec.rhythm.mean_rr_s = get_or<double>(s, "mean_rr_s", spec.rhythm.mean_rr_s);
    spec.rhythm.rr_jitter_s = get_or<double>(s, "rr_jitter_s", spec.rhythm.rr_jitter_s);
    spec.rhythm.pvc_period = get_or<int>(s, "pvc_period", spec.rhythm.pvc_period);
    spec.seed = config_seed(cfg);
    if (s.contains("noise")) {
        const json& n = s.at("noise");
        spec.noise.p_flip_good = get_or<double>(n, "p_flip_good", spec.noise.p_flip_good);
        spec.noise.p_flip_bad = get_or<double>(n, "p_flip_bad", spec.noise.p_flip_bad);
        spec.noise.p_bad_quality = get_or<double>(n, "p_bad_quality", spec.noise.p_bad_quality);
        spec.noise.light_noise_sigma =
            get_or<double>(n, "light_noise_sigma", spec.noise.light_noise_sigma);
        spec.noise.wander_amp = get_or<double>(n, "wander_amp", spec.noise.wander_amp);
        spec.noise.noise_sigma = get_or<double>(n, "noise_sigma", spec.noise.noise_sigma);
        spec.noise.burst_fraction = get_or<double>(n, "burst_fraction", spec.noise.burst_fraction);
    }
    spec.validate();
    return spec;
}

LabelingRun parse_labeling_section(const json& cfg) {
    const json& s = section(cfg, "labeling");
    LabelingRun run;
    run.labeling.window_s = get_or<double>(s, "window_s", run.labeling.window_s);
    run.labeling.half_window_s = get_or<double>(s, "half_window_s", run.labeling.half_window_s);
    run.labeling.pvc_exclusion_s =
        get_or<double>(s, "pvc_exclusion_s", run.labeling.pvc_exclusion_s);
    run.labeling.nsr_min_gap_s = get_or<double>(s, "nsr_min_gap_s", run.labeling.nsr_min_gap_s);
    run.labeling.sqi_threshold = get_or<double>(s, "sqi_threshold", run.labeling.sqi_threshold);
    if (s.contains("dedup_window_s") && !s.at("dedup_window_s").is_null())
        run.labeling.dedup_window_s = s.at("dedup_window_s").get<double>();
    if (s.contains("target_fs_hz") && !s.at("target_fs_hz").is_null())
        run.target_fs_hz = s.at("target_fs_hz").get<double>();
    if (s.contains("balance") && !s.at("balance").is_null()) {
        BalanceSpec b;
        b.af = get_or<double>(s.at("balance"), "af", 1.0);
        b.non_af = get_or<double>(s.at("balance"), "non_af", 1.0);
        run.balance = b;
    }
    run.labeling.validate();
    return run;
}

TrainConfig parse_train_section(const json& cfg) {
    const json& s = section(cfg, "train");
    TrainConfig tc;
    tc.lambda1 = get_or<double>(s, "lambda1", tc.lambda1);
    tc.lambda2 = get_or<double>(s, "lambda2", tc.lambda2);
    tc.epochs = get_or<size_t>(s, "epochs", tc.epochs);
    tc.batch_size = get_or<size_t>(s, "batch_size", tc.batch_size);
    tc.lr = get_or<double>(s, "lr", tc.lr);
    tc.seed = config_seed(cfg);
    tc.loss_mode = loss_mode_from_string(get_or<std::string>(s, "loss_mode", "CE"));
    tc.normalization_mode =
        norm_mode_from_string(get_or<std::string>(s, "normalization_mode", "PAIR_MEAN"));
    if (s.contains("inter_margin") && !s.at("inter_margin").is_null())
        tc.inter_margin = s.at("inter_margin").get<double>();
    tc.val_fraction = get_or<double>(s, "val_fraction", tc.val_fraction);
    tc.preset = get_or<std::string>(s, "preset", tc.preset);
    tc.use_batchnorm = get_or<bool>(s, "use_batchnorm", tc.use_batchnorm);
    tc.sce_alpha = get_or<double>(s, "sce_alpha", tc.sce_alpha);
    tc.sce_beta = get_or<double>(s, "sce_beta", tc.sce_beta);
    tc.sce_clamp_a = get_or<double>(s, "sce_clamp_a", tc.sce_clamp_a);
    tc.validate();
    return tc;
}

ClusterConfig parse_cluster_section(const json& cfg) {
    const json& s = section(cfg, "cluster");
    ClusterConfig cc;
    cc.m = get_or<size_t>(s, "m", cc.m);
    cc.ae_epochs = get_or<size_t>(s, "ae_epochs", cc.ae_epochs);
    cc.ae_lr = get_or<double>(s, "ae_lr", cc.ae_lr);
    cc.latent_dim = get_or<size_t>(s, "latent_dim", cc.latent_dim);
    cc.ae_batch = get_or<size_t>(s, "ae_batch", cc.ae_batch);
    if (cc.m < 2) throw ConfigError("config: cluster.m must be >= 2");
    if (cc.ae_epochs == 0 || cc.ae_batch == 0 || cc.latent_dim == 0 || cc.ae_lr <= 0)
        throw ConfigError("config: cluster parameters must be positive");
    return cc;
}

EvalConfig parse_eval_section(const json& cfg) {
    const json& s = section(cfg, "eval");
    EvalConfig ec;
    ec.bootstrap_draws = get_or<size_t>(s, "bootstrap_draws", ec.bootstrap_draws);
    ec.use_true_labels = get_or<bool>(s, "use_true_labels", ec.use_true_labels);
    ec.alpha = get_or<double>(s, "alpha", ec.alpha);
    ec.n_comparisons = get_or<size_t>(s, "n_comparisons", ec.n_comparisons);
    if (ec.alpha <= 0 || ec.alpha >= 1) throw ConfigError("config: eval.alpha must be in (0,1)");
    if (ec.n_comparisons == 0) throw ConfigError("config: eval.n_comparisons must be positive");
    return ec;
}

LatentConfig parse_latent_section(const json& cfg) {
    const json& s = section(cfg, "latent");
    LatentConfig lc;
    lc.k = get_or<size_t>(s, "k", lc.k);
    lc.n_queries = get_or<size_t>(s, "n_queries", lc.n_queries);
    if (lc.k == 0 || lc.n_queries == 0)
        throw ConfigError("config: latent.k and latent.n_queries must be positive");
    return lc;
}

GridConfig parse_grid_section(const json& cfg) {
    const json& s = section(cfg, "grid");
    std::vector<double> l1 = get_or<std::vector<double>>(s, "lambda1", {0.0, 1e-3, 1e-2, 1e-1});
    std::vector<double> l2 = get_or<std::vector<double>>(s, "lambda2", {0.0, 1e-3, 1e-2, 1e-1});
    GridConfig gc;
    for (double a : l1)
        for (double b : l2) gc.cells.emplace_back(a, b);
    if (gc.cells.empty()) throw ConfigError("config: grid must be non-empty");
    return gc;
}

ExperimentConfig parse_experiment_section(const json& cfg) {
    if (!cfg.contains("experiment")) throw ConfigError("config: missing `experiment` section");
    const json& s = cfg.at("experiment");
    ExperimentConfig ec;
    for (const auto& sz : s.at("sizes")) {
        ExperimentSize e;
        e.name = sz.at("name").get<std::string>();
        e.records = sz.at("records").get<size_t>();
        e.labels = get_or<std::string>(sz, "labels", "observed");
        if (e.labels != "observed" && e.labels != "true")
            throw ConfigError("config: experiment size labels must be `observed` or `true`");
        ec.sizes.push_back(std::move(e));
    }
    ec.presets = get_or<std::vector<std::string>>(s, "presets", {"TINY"});
    for (const std::string& m :
         get_or<std::vector<std::string>>(s, "loss_modes", {"CE", "CMC"}))
        ec.loss_modes.push_back(loss_mode_from_string(m));
    if (ec.sizes.empty() || ec.presets.empty() || ec.loss_modes.empty())
        throw ConfigError("config: experiment needs sizes, presets and loss_modes");
    return ec;
}

// ---------------------------------------------------------------------------

RunManifest::RunManifest(std::string command, const json& cfg) {
    const std::string dump = cfg.dump();
    doc_["command"] = std::move(command);
    doc_["tool_version"] = tool_version();
    doc_["config_sha256"] = sha256_hex(dump.data(), dump.size());
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::object();
    doc_["stable_hashes"] = json::object();
    doc_["wall_clock_s"] = 0.0;
}

void RunManifest::add_input(const std::string& path) {
    doc_["inputs"][path] = sha256_file_hex(path);
}

void RunManifest::add_output(const std::string& path) {
    doc_["outputs"][path] = sha256_file_hex(path);
}

void RunManifest::add_stable_hash(const std::string& path, const std::string& sha256) {
    doc_["stable_hashes"][path] = sha256;
}

void RunManifest::set_wall_clock(double seconds) { doc_["wall_clock_s"] = seconds; }

void RunManifest::write(const std::string& path) const {
    const std::string s = doc_.dump(2);
    write_file_bytes(path, s.data(), s.size());
}

std::string history_content_sha256(const std::vector<EpochStats>& history) {
    std::string payload;
    for (const auto& es : history) {
        json j;
        j["epoch"] = es.epoch;
        j["l_ce"] = es.train.l_ce;
        j["l_intra"] = es.train.l_intra;
        j["l_inter"] = es.train.l_inter;
        j["l_total"] = es.train.l_total;
        j["val_loss"] = es.val_loss;
        payload += j.dump();
        payload += '\n';
    }
    return sha256_hex(payload.data(), payload.size());
}

}  // namespace ppgaf
