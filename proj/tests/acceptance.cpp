// ============================================================================
// Acceptance battery: runs every acceptance criterion end to end and prints
// one PASS/FAIL line per criterion. Exit code = number of failures.
//
//   acceptance --cli <path-to-ppgaf-binary> [--outdir DIR]
//
// Criteria 7-10 share one desk-scale battery: five seeded synthetic
// corpora (4000 train / 1000 clean-test segments at 40 Hz, quality-
// conditioned label flips 0.45/0.15 at 40% bad quality), a TINY model,
// M=6 clusters, CE vs CMC with the lambda pair selected by grid search on
// the first seed.
// ============================================================================

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "ppgaf/alarms.hpp"
#include "ppgaf/checkpoint.hpp"
#include "ppgaf/config.hpp"
#include "ppgaf/errors.hpp"
#include "ppgaf/kmeans.hpp"
#include "ppgaf/metrics.hpp"
#include "ppgaf/synth.hpp"
#include "ppgaf/util.hpp"
#include "ppgaf/waveform_io.hpp"
#include "gradcheck_common.hpp"

namespace fs = std::filesystem;
using namespace ppgaf;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli_path;
std::string g_outdir = "acceptance_out";
int g_failures = 0;

struct Criterion {
    int id;
    std::string summary;
    bool pass = true;
    std::vector<std::string> notes;
    Clock::time_point t0 = Clock::now();

    Criterion(int id_, std::string summary_) : id(id_), summary(std::move(summary_)) {}

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("FAILED: " + what);
        }
    }
    void note(const std::string& s) { notes.push_back(s); }

    void finish() {
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << summary << " ("
                  << std::fixed << std::setprecision(1) << secs << " s)\n";
        for (const auto& n : notes) std::cout << "       " << n << "\n";
        std::cout.flush();
        if (!pass) ++g_failures;
    }
};

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Criterion 1: loss-formula oracle.
// ---------------------------------------------------------------------------

// Independent brute-force evaluation of the ordered double sums.
void brute_force_cmc(const std::vector<float>& latents, size_t B, size_t D,
                     const std::vector<int>& ids, double* intra, double* inter) {
    double si = 0.0, se = 0.0;
    for (size_t i = 0; i < B; ++i)
        for (size_t j = 0; j < B; ++j) {
            if (i == j) continue;
            double d2 = 0.0;
            for (size_t k = 0; k < D; ++k) {
                const double diff = static_cast<double>(latents[i * D + k]) -
                                    static_cast<double>(latents[j * D + k]);
                d2 += diff * diff;
            }
            if (ids[i] == ids[j])
                si += std::sqrt(d2);
            else
                se += std::sqrt(d2);
        }
    *intra = si;
    *inter = -se;
}

void criterion_1() {
    Criterion c(1, "cmc_losses fixture (8, -80) and brute-force agreement on 100 random batches");

    std::vector<float> latents = {0.0f, 2.0f, 10.0f, 12.0f};
    std::vector<int> ids = {0, 0, 1, 1};
    CmcTerms t = cmc_losses(latents, 4, 1, ids, NormMode::RAW_SUM);
    c.require(t.intra == 8.0, "fixture l_intra == 8 exactly, got " + std::to_string(t.intra));
    c.require(t.inter == -80.0, "fixture l_inter == -80 exactly, got " + std::to_string(t.inter));

    Rng rng(0xC1);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t B = 2 + rng.below(15);  // <= 16 points
        const size_t D = 1 + rng.below(4);
        std::vector<float> lat(B * D);
        for (auto& v : lat) v = static_cast<float>(rng.normal());
        std::vector<int> cl(B);
        for (auto& v : cl) v = static_cast<int>(rng.below(4));  // <= 4 clusters

        double oi, oe;
        brute_force_cmc(lat, B, D, cl, &oi, &oe);
        CmcTerms got = cmc_losses(lat, B, D, cl, NormMode::RAW_SUM);
        const double ri = std::abs(got.intra - oi) / std::max(1.0, std::abs(oi));
        const double re = std::abs(got.inter - oe) / std::max(1.0, std::abs(oe));
        if (ri >= 1e-5 || re >= 1e-5) {
            c.require(false, "oracle disagreement at trial " + std::to_string(trial));
            break;
        }
    }
    c.require(elapsed(c.t0) < 1.0, "runtime under 1 s");
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 2: reduction equivalence.
// ---------------------------------------------------------------------------

void criterion_2() {
    Criterion c(2, "CMC(lambda=0) loss history bit-identical to CE (TINY, 3 epochs, 512 segments)");

    CorpusSpec spec;
    spec.n_patients = 32;
    spec.segs_per_patient = 16;
    spec.window_s = 30.0;
    spec.fs_hz = 40.0;
    spec.seed = 0xC2;
    spec.mix_af = 0.5;
    spec.mix_nsr = 0.3;
    spec.mix_pvc = 0.2;
    spec.noise.p_flip_good = 0.15;
    spec.noise.p_flip_bad = 0.45;
    spec.noise.p_bad_quality = 0.4;
    Dataset ds = gen_labeled_corpus(spec);
    c.require(ds.records.size() == 512, "corpus has 512 segments");

    std::vector<int> ids(ds.records.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = binary_label(ds.records[i].label);

    TrainConfig ce;
    ce.loss_mode = LossMode::CE;
    ce.epochs = 3;
    ce.batch_size = 64;
    ce.lr = 1e-3;
    ce.seed = 0xC2;
    TrainConfig cmc = ce;
    cmc.loss_mode = LossMode::CMC;
    cmc.lambda1 = 0.0;
    cmc.lambda2 = 0.0;

    TrainResult a = train(ds, nullptr, ce);
    TrainResult b = train(ds, &ids, cmc);
    c.require(a.history.size() == b.history.size(), "equal epoch counts");
    for (size_t e = 0; e < a.history.size(); ++e) {
        c.require(a.history[e].train.l_ce == b.history[e].train.l_ce &&
                      a.history[e].train.l_intra == b.history[e].train.l_intra &&
                      a.history[e].train.l_inter == b.history[e].train.l_inter &&
                      a.history[e].train.l_total == b.history[e].train.l_total &&
                      a.history[e].val_loss == b.history[e].val_loss,
                  "epoch " + std::to_string(e) + " losses bit-identical");
    }
    c.require(elapsed(c.t0) < 60.0, "runtime under 1 min");
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 3: gradient fidelity.
// ---------------------------------------------------------------------------

void criterion_3() {
    Criterion c(3, "finite-difference checks: every layer type + full combined loss, 20 seeds");
    using nn_test::FdTol;

    double worst_d = 0.0, worst_f = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        worst_d = std::max({worst_d, gradcheck::check_conv<double>(seed, 1),
                            gradcheck::check_conv<double>(seed, 2),
                            gradcheck::check_batchnorm<double>(seed),
                            gradcheck::check_relu<double>(seed),
                            gradcheck::check_maxpool<double>(seed),
                            gradcheck::check_dense<double>(seed),
                            gradcheck::check_gap_upsample<double>(seed),
                            gradcheck::check_head_losses<double>(seed),
                            gradcheck::check_cmc_terms<double>(seed, NormMode::RAW_SUM, false),
                            gradcheck::check_cmc_terms<double>(seed, NormMode::PAIR_MEAN, false),
                            gradcheck::check_cmc_terms<double>(seed, NormMode::PAIR_MEAN, true),
                            gradcheck::check_eq4_loss<double>(seed)});
        worst_f = std::max({worst_f, gradcheck::check_conv<float>(seed, 1),
                            gradcheck::check_relu<float>(seed),
                            gradcheck::check_maxpool<float>(seed),
                            gradcheck::check_dense<float>(seed),
                            gradcheck::check_gap_upsample<float>(seed),
                            gradcheck::check_head_losses<float>(seed),
                            gradcheck::check_cmc_terms<float>(seed, NormMode::PAIR_MEAN, false),
                            gradcheck::check_eq4_loss<float>(seed)});
    }
    for (uint64_t seed = 0; seed < 3; ++seed) {
        worst_d = std::max({worst_d, gradcheck::check_full_model<double>(seed, true),
                            gradcheck::check_autoencoder<double>(seed)});
    }

    std::ostringstream msg;
    msg << "worst rel err: double " << worst_d << " (tol 1e-6), float " << worst_f
        << " (tol 1e-3)";
    c.note(msg.str());
    c.require(worst_d < FdTol<double>::tol, "64-bit mode below 1e-6");
    c.require(worst_f < FdTol<float>::tol, "32-bit mode below 1e-3");
    c.require(elapsed(c.t0) < 120.0, "runtime under 2 min");
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 4: K-means invariants.
// ---------------------------------------------------------------------------

void criterion_4() {
    Criterion c(4, "K-means: {0,1,10,11} fixture exact, Lloyd monotonicity, fixed point");

    Embedding e;
    e.n = 4;
    e.dim = 1;
    e.data = {0.0f, 1.0f, 10.0f, 11.0f};
    ClusterModel cm = kmeans(e, 2, 0);
    std::vector<double> cents = {cm.centroids[0], cm.centroids[1]};
    std::sort(cents.begin(), cents.end());
    c.require(cents[0] == 0.5 && cents[1] == 10.5, "centroids {0.5, 10.5} exact");
    c.require(cm.inertia == 1.0, "inertia exactly 1.0");

    // inertia monotonicity is asserted inside every Lloyd iteration; random
    // fits exercise it, then the fixed-point property is verified explicitly
    Rng rng(0xC4);
    for (int trial = 0; trial < 25; ++trial) {
        const size_t n = 20 + rng.below(200);
        const size_t d = 1 + rng.below(8);
        const size_t m = 2 + rng.below(5);
        Embedding emb;
        emb.n = n;
        emb.dim = d;
        emb.data.resize(n * d);
        for (auto& v : emb.data) v = static_cast<float>(rng.normal(rng.below(3) * 4.0, 1.0));
        ClusterModel fit;
        try {
            fit = kmeans(emb, m, trial);
        } catch (const NumericError& ex) {
            c.require(false, std::string("inertia monotonicity violated: ") + ex.what());
            break;
        }
        auto ids = assign(fit, emb);
        // one more assignment + centroid update changes nothing
        std::vector<double> sums(fit.m * d, 0.0);
        std::vector<size_t> counts(fit.m, 0);
        for (size_t i = 0; i < n; ++i) {
            for (size_t k = 0; k < d; ++k) sums[ids[i] * d + k] += emb.row(i)[k];
            ++counts[ids[i]];
        }
        bool fixed = true;
        for (size_t cl = 0; cl < fit.m && fixed; ++cl) {
            if (counts[cl] == 0) continue;
            for (size_t k = 0; k < d; ++k)
                if (std::abs(sums[cl * d + k] / counts[cl] - fit.centroids[cl * d + k]) > 1e-7)
                    fixed = false;
        }
        if (!fixed || assign(fit, emb) != ids) {
            c.require(false, "fixed-point property at trial " + std::to_string(trial));
            break;
        }
    }
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 5: labeling golden scenario.
// ---------------------------------------------------------------------------

void criterion_5() {
    Criterion c(5, "labeling golden scenario yields the exact expected segment set");

    // Coverage spans [40, 180) and [235, 530): the pair's AF alarm at 215 s
    // has no covering window and is dropped by the bounds rule.
    RhythmSpec rhythm;
    std::vector<Waveform> wfs;
    wfs.push_back(gen_beat_train(rhythm, 140.0, 40.0, 10));
    wfs[0].patient_id = "p1";
    wfs[0].start_time_ms = 40000;
    wfs.push_back(gen_beat_train(rhythm, 295.0, 40.0, 11));
    wfs[1].patient_id = "p1";
    wfs[1].start_time_ms = 235000;

    auto ev = [](double t_s, AlarmType type) {
        return AlarmEvent{"p1", static_cast<int64_t>(t_s * 1000.0), type};
    };
    std::vector<AlarmEvent> events = {ev(100, AlarmType::AF),    ev(150, AlarmType::OTHER),
                                      ev(200, AlarmType::PVC),   ev(215, AlarmType::AF),
                                      ev(260, AlarmType::OTHER), ev(300, AlarmType::VT),
                                      ev(350, AlarmType::OTHER), ev(400, AlarmType::VFIB),
                                      ev(500, AlarmType::VFIB)};
    LabelingConfig cfg;

    auto af = extract_af_segments(events, wfs, cfg);
    auto pvc = extract_pvc_segments(events, wfs, cfg);
    auto nsr = extract_nsr_segments(events, wfs, cfg);

    c.require(af.segments.size() == 1 && af.segments[0].t_start_ms == 85000,
              "one AF segment [85, 115)");
    c.require(af.skipped_out_of_bounds == 1, "the pair's AF alarm skipped (uncovered window)");
    c.require(pvc.excluded_near_af == 1, "PVC at 200 s excluded by the AF within 30 s");
    c.require(pvc.segments.size() == 1 && pvc.segments[0].t_start_ms == 285000,
              "one PVC segment [285, 315)");
    c.require(nsr.segments.size() == 1 && nsr.segments[0].t_start_ms == 435000,
              "one NSR segment [435, 465)");

    Dataset ds = assemble_dataset(af.segments, pvc.segments, nsr.segments, std::nullopt, 0);
    c.require(ds.records.size() == 3, "assembled dataset has exactly 3 records");
    const char* want_label[3] = {"AF", "PVC", "NSR"};
    const int64_t want_start[3] = {85000, 285000, 435000};
    for (size_t i = 0; i < 3; ++i) {
        c.require(std::string(to_string(ds.records[i].label)) == want_label[i] &&
                      ds.records[i].t_start_ms == want_start[i] &&
                      ds.records[i].samples.size() == 1200,
                  "record " + std::to_string(i) + " exact");
    }

    // byte-exact manifest across repeated extraction
    auto af2 = extract_af_segments(events, wfs, cfg);
    auto pvc2 = extract_pvc_segments(events, wfs, cfg);
    auto nsr2 = extract_nsr_segments(events, wfs, cfg);
    Dataset ds2 = assemble_dataset(af2.segments, pvc2.segments, nsr2.segments, std::nullopt, 0);
    c.require(ppgd1_manifest_json(ds) == ppgd1_manifest_json(ds2), "manifest byte-identical");
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 6: metric oracles.
// ---------------------------------------------------------------------------

double auroc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
    double acc = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < s.size(); ++i)
        for (size_t j = 0; j < s.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                acc += 1.0;
            else if (s[i] == s[j])
                acc += 0.5;
        }
    return acc / static_cast<double>(pairs);
}

void wilcoxon_enum(const std::vector<double>& ranks, size_t i, double acc, double w_obs, size_t& le,
                   size_t& ge) {
    if (i == ranks.size()) {
        if (acc <= w_obs + 1e-9) ++le;
        if (acc >= w_obs - 1e-9) ++ge;
        return;
    }
    wilcoxon_enum(ranks, i + 1, acc, w_obs, le, ge);
    wilcoxon_enum(ranks, i + 1, acc + ranks[i], w_obs, le, ge);
}

double wilcoxon_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    if (d.empty()) return 1.0;
    const size_t n = d.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t x, size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = (i + 1 + j + 1) / 2.0;
        i = j + 1;
    }
    double w = 0.0;
    for (size_t k = 0; k < n; ++k)
        if (d[k] > 0) w += rank[k];
    size_t le = 0, ge = 0;
    wilcoxon_enum(rank, 0, 0.0, w, le, ge);
    const double total = std::pow(2.0, static_cast<double>(n));
    return std::min(1.0, 2.0 * std::min(le / total, ge / total));
}

void criterion_6() {
    Criterion c(6, "AUROC pair-concordance oracle (200 instances), exact Wilcoxon, fixtures");

    c.require(auroc_from({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75,
              "[0.1,0.4,0.35,0.8]/[0,0,1,1] -> 0.75");

    Rng rng(0xC6);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 2 + rng.below(199);
        std::vector<double> s(n);
        std::vector<int> y(n);
        bool both = false;
        while (!both) {
            for (auto& v : y) v = static_cast<int>(rng.below(2));
            both = std::count(y.begin(), y.end(), 1) > 0 &&
                   std::count(y.begin(), y.end(), 0) > 0;
        }
        for (auto& v : s) v = static_cast<double>(rng.below(9)) / 8.0;  // frequent ties
        if (std::abs(auroc_from(s, y) - auroc_oracle(s, y)) >= 1e-12) {
            c.require(false, "AUROC oracle mismatch at trial " + std::to_string(trial));
            break;
        }
    }

    c.require(wilcoxon_signed_rank({1, 2, 3}, {0, 0, 0}) == 0.25, "diffs [1,2,3] -> p = 0.25");
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 1 + rng.below(12);
        std::vector<double> a(n), b(n);
        for (size_t i = 0; i < n; ++i) {
            a[i] = static_cast<double>(rng.below(5));
            b[i] = static_cast<double>(rng.below(5));
        }
        if (std::abs(wilcoxon_signed_rank(a, b) - wilcoxon_oracle(a, b)) > 1e-12) {
            c.require(false, "Wilcoxon enumeration mismatch at trial " + std::to_string(trial));
            break;
        }
    }
    c.finish();
}

// ---------------------------------------------------------------------------
// Criteria 7-10 share one battery.
// ---------------------------------------------------------------------------

struct SeedRun {
    double ce_auroc = 0.0, cmc_auroc = 0.0;
    SubgroupMetrics ce_sub, cmc_sub;
    double ce_purity = 0.0, ce_ccr = 0.0, cmc_purity = 0.0, cmc_ccr = 0.0;
    std::vector<EpochStats> ce_hist, cmc_hist;
    double ae_seconds = 0.0;
};

struct Battery {
    bool ran = false;
    double lambda1 = 0.0, lambda2 = 0.0;
    std::vector<GridCell> grid_table;
    std::vector<SeedRun> runs;
    double seconds = 0.0;
};

Battery g_battery;

CorpusSpec battery_train_spec(uint64_t seed) {
    CorpusSpec spec;
    spec.n_patients = 200;
    spec.segs_per_patient = 20;  // 4000 training segments
    spec.window_s = 30.0;
    spec.fs_hz = 40.0;
    spec.seed = derive_seed(0xACCE, seed);
    spec.mix_af = 0.5;
    spec.mix_nsr = 0.3;
    spec.mix_pvc = 0.2;
    spec.noise.p_flip_good = 0.15;
    spec.noise.p_flip_bad = 0.45;
    spec.noise.p_bad_quality = 0.4;
    // baseline-wander corruption only: degrades the bad stratum while the
    // autoencoder embedding stays organized by rhythm
    spec.noise.wander_amp = 0.4;
    spec.noise.noise_sigma = 0.0;
    spec.noise.burst_fraction = 0.0;
    return spec;
}

void run_battery() {
    if (g_battery.ran) return;
    const auto t0 = Clock::now();
    std::cout << "-- running the criterion 7-10 battery (5 seeds, CE vs CMC) --\n";

    const size_t kSeeds = 5;
    for (uint64_t seed = 0; seed < kSeeds; ++seed) {
        Dataset train_ds = gen_labeled_corpus(battery_train_spec(seed));

        CorpusSpec test_spec = battery_train_spec(seed);
        test_spec.n_patients = 50;  // 1000 clean-test segments
        test_spec.seed = derive_seed(0xACCE, 100 + seed);
        test_spec.noise.p_flip_good = 0.0;
        test_spec.noise.p_flip_bad = 0.0;
        test_spec.patient_prefix = "test";
        Dataset test_ds = gen_labeled_corpus(test_spec);

        auto [train_p, val_p] = patient_split(train_ds, 0.2, seed);
        std::vector<size_t> tidx = records_of_patients(train_ds, train_p);

        AeTrainResult ae = train_autoencoder(train_ds, tidx, 8, 2e-3, seed, 64, 64);
        Embedding all = embed(ae.model, train_ds);
        Embedding temb;
        temb.dim = all.dim;
        temb.n = tidx.size();
        for (size_t i : tidx) temb.data.insert(temb.data.end(), all.row(i), all.row(i) + all.dim);
        ClusterModel cm = kmeans(temb, 6, seed);
        std::vector<int> ids = assign(cm, all);

        TrainConfig base;
        base.preset = "TINY";
        base.epochs = 8;
        base.batch_size = 64;
        base.lr = 1e-3;
        base.seed = seed;
        base.val_fraction = 0.2;

        SeedRun run;
        run.ae_seconds = ae.seconds;

        TrainResult cmc_result;
        if (seed == 0) {
            // lambda grid selected once by validation AUROC on the first seed
            std::vector<std::pair<double, double>> grid = {{0.1, 0.01}, {0.3, 0.03}};
            GridSearchResult gs = grid_search_lambdas(train_ds, ids, grid, base);
            g_battery.lambda1 = gs.lambda1;
            g_battery.lambda2 = gs.lambda2;
            g_battery.grid_table = gs.table;
            cmc_result = std::move(gs.best);
            std::cout << "   grid-selected (lambda1, lambda2) = (" << g_battery.lambda1 << ", "
                      << g_battery.lambda2 << ")\n";
        } else {
            TrainConfig cmc_cfg = base;
            cmc_cfg.loss_mode = LossMode::CMC;
            cmc_cfg.lambda1 = g_battery.lambda1;
            cmc_cfg.lambda2 = g_battery.lambda2;
            cmc_result = train(train_ds, &ids, cmc_cfg);
        }

        TrainConfig ce_cfg = base;
        ce_cfg.loss_mode = LossMode::CE;
        TrainResult ce_result = train(train_ds, nullptr, ce_cfg);

        run.ce_hist = ce_result.history;
        run.cmc_hist = cmc_result.history;

        // clean-test evaluation (true labels)
        std::vector<size_t> test_idx(test_ds.records.size());
        for (size_t i = 0; i < test_idx.size(); ++i) test_idx[i] = i;
        auto evaluate = [&](TrainResult& tr, double& roc, SubgroupMetrics& sub) {
            std::vector<double> scores = score_records(tr.model, test_ds, test_idx);
            std::vector<ScoredRecord> scored = make_scored(test_ds, test_idx, scores, true);
            roc = auroc(scored);
            sub = subgroup_eval(scored);
        };
        evaluate(ce_result, run.ce_auroc, run.ce_sub);
        evaluate(cmc_result, run.cmc_auroc, run.cmc_sub);

        // latent neighborhood protocol: 100 seeded queries from the test
        // set, top-50 neighbors from the training records
        std::vector<size_t> q_idx = test_idx;
        Rng qrng(derive_seed(0xACCE, 200 + seed));
        qrng.shuffle(q_idx);
        q_idx.resize(100);
        std::sort(q_idx.begin(), q_idx.end());
        std::vector<size_t> ref_idx(train_ds.records.size());
        for (size_t i = 0; i < ref_idx.size(); ++i) ref_idx[i] = i;

        std::vector<int> q_true, ref_obs, ref_true;
        for (size_t i : q_idx) q_true.push_back(binary_label(*test_ds.records[i].true_label));
        for (size_t i : ref_idx) {
            ref_obs.push_back(binary_label(train_ds.records[i].label));
            ref_true.push_back(binary_label(*train_ds.records[i].true_label));
        }

        auto neighborhood = [&](TrainResult& tr, double& purity, double& ccr) {
            Embedding q_lat = latents_of(tr.model, test_ds, q_idx);
            Embedding r_lat = latents_of(tr.model, train_ds, ref_idx);
            auto stats = latent_neighborhood_analysis(q_lat, q_true, r_lat, ref_obs, ref_true, 50);
            purity = 0.0;
            ccr = 0.0;
            for (const auto& st : stats) {
                purity += st.purity;
                ccr += st.ccr;
            }
            purity /= static_cast<double>(stats.size());
            ccr /= static_cast<double>(stats.size());
        };
        neighborhood(ce_result, run.ce_purity, run.ce_ccr);
        neighborhood(cmc_result, run.cmc_purity, run.cmc_ccr);

        std::cout << "   seed " << seed << ": CE " << std::setprecision(4) << run.ce_auroc
                  << " CMC " << run.cmc_auroc << " | purity " << run.ce_purity << " vs "
                  << run.cmc_purity << " | ccr " << run.ce_ccr << " vs " << run.cmc_ccr << "\n";
        g_battery.runs.push_back(std::move(run));
    }
    g_battery.seconds = elapsed(t0);
    g_battery.ran = true;
}

void criterion_7() {
    Criterion c(7, "desk-scale robustness trend: CMC vs CE over 5 seeds");
    run_battery();
    c.t0 = Clock::now() - std::chrono::microseconds(static_cast<long>(g_battery.seconds * 1e6));

    double mean_ce = 0.0, mean_cmc = 0.0;
    size_t wins = 0;
    for (const auto& r : g_battery.runs) {
        mean_ce += r.ce_auroc;
        mean_cmc += r.cmc_auroc;
        if (r.cmc_auroc > r.ce_auroc) ++wins;
    }
    mean_ce /= g_battery.runs.size();
    mean_cmc /= g_battery.runs.size();

    std::ostringstream msg;
    msg << "mean AUROC: CE " << std::setprecision(4) << mean_ce << ", CMC " << mean_cmc
        << "; CMC strictly better in " << wins << "/5 seeds; lambda = (" << g_battery.lambda1
        << ", " << g_battery.lambda2 << ")";
    c.note(msg.str());

    c.require(mean_cmc >= mean_ce - 0.005, "mean AUROC(CMC) >= mean AUROC(CE) - 0.005");
    c.require(wins >= 3, "CMC strictly exceeds CE in at least 3 of 5 seeds");
    c.require(g_battery.seconds < 1200.0,
              "battery under 20 min (took " + std::to_string(g_battery.seconds) + " s)");
    c.finish();
}

void criterion_8() {
    Criterion c(8, "quality-subgroup shape: GOOD >= BAD AUROC for every method + Fig.5 CSV");
    run_battery();

    double ce_good = 0.0, ce_drop = 0.0, cmc_good = 0.0, cmc_drop = 0.0;
    for (size_t s = 0; s < g_battery.runs.size(); ++s) {
        const auto& r = g_battery.runs[s];
        for (const auto* sub : {&r.ce_sub, &r.cmc_sub}) {
            const bool defined = sub->auroc_good.has_value() && sub->auroc_bad.has_value();
            c.require(defined, "subgroup metrics defined at seed " + std::to_string(s));
            if (defined)
                c.require(*sub->auroc_good >= *sub->auroc_bad,
                          "good >= bad at seed " + std::to_string(s));
        }
        ce_good += *r.ce_sub.auroc_good;
        ce_drop += r.ce_sub.auroc_drop_pct.value_or(0.0);
        cmc_good += *r.cmc_sub.auroc_good;
        cmc_drop += r.cmc_sub.auroc_drop_pct.value_or(0.0);
    }
    const double n = static_cast<double>(g_battery.runs.size());

    fs::create_directories(g_outdir);
    const std::string fig5_path = (fs::path(g_outdir) / "fig5.csv").string();
    std::ostringstream csv;
    csv << "method,auroc_good,drop_pct\n";
    csv << "CE," << ce_good / n << "," << ce_drop / n << "\n";
    csv << "CMC," << cmc_good / n << "," << cmc_drop / n << "\n";
    const std::string s = csv.str();
    write_file_bytes(fig5_path, s.data(), s.size());
    c.note("mean drop: CE " + std::to_string(ce_drop / n) + "%, CMC " +
           std::to_string(cmc_drop / n) + "% -> " + fig5_path);
    c.finish();
}

void criterion_9() {
    Criterion c(9, "latent analysis trend: purity up, counter-class ratio down under CMC");
    run_battery();

    // exact definitional fixtures
    {
        Embedding ref;
        ref.n = 50;
        ref.dim = 1;
        std::vector<int> obs(50), tru(50, 0);
        for (int i = 0; i < 50; ++i) {
            ref.data.push_back(static_cast<float>(i + 1));
            obs[i] = i < 40 ? 0 : 1;  // 40 of 50 observed labels correct
        }
        Embedding q;
        q.n = 1;
        q.dim = 1;
        q.data = {0.0f};
        auto stats = latent_neighborhood_analysis(q, {0}, ref, obs, tru, 50);
        c.require(stats[0].purity == 0.8, "purity fixture 40/50 -> 0.8");

        std::vector<int> tru2(50, 0), obs2(50, 0);
        for (int i = 0; i < 10; ++i) tru2[i] = 1, obs2[i] = 1;  // 10 of 50 opposite class
        auto stats2 = latent_neighborhood_analysis(q, {0}, ref, obs2, tru2, 50);
        c.require(stats2[0].ccr == 0.2, "ccr fixture 10/50 -> 0.2");
    }

    size_t seed_wins = 0;
    double mp_ce = 0.0, mp_cmc = 0.0, mc_ce = 0.0, mc_cmc = 0.0;
    for (const auto& r : g_battery.runs) {
        if (r.cmc_purity >= r.ce_purity && r.cmc_ccr <= r.ce_ccr) ++seed_wins;
        mp_ce += r.ce_purity;
        mp_cmc += r.cmc_purity;
        mc_ce += r.ce_ccr;
        mc_cmc += r.cmc_ccr;
    }
    const double n = static_cast<double>(g_battery.runs.size());
    std::ostringstream msg;
    msg << "mean purity CE " << std::setprecision(4) << mp_ce / n << " vs CMC " << mp_cmc / n
        << "; mean ccr CE " << mc_ce / n << " vs CMC " << mc_cmc / n << "; trend holds in "
        << seed_wins << "/5 seeds";
    c.note(msg.str());
    c.require(seed_wins >= 3, "purity >= and ccr <= for CMC in at least 3 of 5 seeds");
    c.finish();
}

void criterion_10() {
    Criterion c(10, "CMC per-epoch wall clock <= 1.25x CE; AE pre-training reported separately");
    run_battery();

    std::vector<EpochStats> ce_all, cmc_all;
    double ae_total = 0.0;
    for (const auto& r : g_battery.runs) {
        ce_all.insert(ce_all.end(), r.ce_hist.begin(), r.ce_hist.end());
        cmc_all.insert(cmc_all.end(), r.cmc_hist.begin(), r.cmc_hist.end());
        ae_total += r.ae_seconds;
    }
    TimingComparison cmp = timing_compare(ce_all, cmc_all);

    MetricsReport rep;
    rep.n_records = 1000;
    rep.timing = cmp;
    rep.ae_pretrain_seconds = ae_total / g_battery.runs.size();
    auto j = rep.to_json();
    c.require(j.contains("ae_pretrain_seconds") && j.contains("timing"),
              "MetricsReport carries timing and AE pre-training fields");
    fs::create_directories(g_outdir);
    const std::string path = (fs::path(g_outdir) / "timing_report.json").string();
    const std::string s = j.dump(2);
    write_file_bytes(path, s.data(), s.size());

    std::ostringstream msg;
    msg << "median epoch: CE " << std::setprecision(3) << cmp.median_epoch_seconds_a << " s, CMC "
        << cmp.median_epoch_seconds_b << " s, ratio " << cmp.overhead_ratio << "; AE pretrain "
        << *rep.ae_pretrain_seconds << " s";
    c.note(msg.str());
    c.require(cmp.overhead_ratio <= 1.25, "overhead ratio <= 1.25");
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 11: bootstrap / Wilcoxon protocol.
// ---------------------------------------------------------------------------

void criterion_11() {
    Criterion c(11, "bootstrap: one record per patient per draw, reproducible; Bonferroni 0.05/15");

    Rng rng(0xC11);
    std::vector<ScoredRecord> scored;
    for (int p = 0; p < 40; ++p)
        for (int k = 0; k < 1 + static_cast<int>(rng.below(4)); ++k) {
            ScoredRecord r;
            r.record_id = scored.size();
            r.patient_id = "p" + std::to_string(p);
            r.label = p % 2;
            r.score = 0.4 * r.label + rng.uniform(0.0, 0.6);
            scored.push_back(r);
        }

    std::vector<std::vector<size_t>> draws_a, draws_b;
    BootstrapResult a = bootstrap_auroc(scored, 100, 0xB00, &draws_a);
    BootstrapResult b = bootstrap_auroc(scored, 100, 0xB00, &draws_b);

    c.require(a.auroc_draws.size() == 100, "100 draws retained");
    c.require(a.auroc_draws == b.auroc_draws && draws_a == draws_b,
              "identical draws under the same seed");

    for (size_t d = 0; d < draws_a.size(); ++d) {
        std::set<std::string> patients;
        for (size_t idx : draws_a[d]) patients.insert(scored[idx].patient_id);
        if (patients.size() != 40 || draws_a[d].size() != 40) {
            c.require(false, "draw " + std::to_string(d) + " not one-record-per-patient");
            break;
        }
    }

    const double threshold = bonferroni_threshold(0.05, 15);
    c.note("Bonferroni-adjusted threshold for 15 comparisons: " + std::to_string(threshold));
    c.require(std::abs(threshold - 0.05 / 15.0) < 1e-15 && threshold > 0.0033 &&
                  threshold < 0.0034,
              "threshold 0.05/15 ~= 0.0033");
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 12: CLI reproducibility.
// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = g_cli_path + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

void criterion_12() {
    Criterion c(12, "CLI commands re-run with identical inputs produce byte-identical artifacts");
    if (g_cli_path.empty()) {
        c.require(false, "no --cli path given");
        c.finish();
        return;
    }

    const fs::path dir = fs::path(g_outdir) / "repro";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = (dir / "cfg.json").string();
    {
        const std::string body = R"({
  "schema_version": 1,
  "seed": 12,
  "synth": {
    "n_patients": 16, "segs_per_patient": 4, "window_s": 10.0, "fs_hz": 32.0,
    "mix_af": 0.5, "mix_nsr": 0.3, "mix_pvc": 0.2,
    "noise": {"p_flip_good": 0.1, "p_flip_bad": 0.3, "p_bad_quality": 0.3}
  },
  "labeling": {"target_fs_hz": 40.0},
  "train": {"epochs": 2, "batch_size": 16, "lr": 0.002, "loss_mode": "CE"},
  "cluster": {"m": 3, "ae_epochs": 2, "ae_lr": 0.001, "latent_dim": 16, "ae_batch": 16},
  "eval": {"bootstrap_draws": 10}
})";
        write_file_bytes(cfg, body.data(), body.size());
    }

    auto same = [&](const std::string& p1, const std::string& p2) {
        return sha256_file_hex(p1) == sha256_file_hex(p2);
    };

    // synth
    c.require(run_cli("synth --config " + cfg + " --out " + (dir / "a.ppgd").string()) == 0 &&
                  run_cli("synth --config " + cfg + " --out " + (dir / "b.ppgd").string()) == 0 &&
                  same((dir / "a.ppgd").string(), (dir / "b.ppgd").string()),
              "synth byte-identical");

    // label (golden fixture waveforms)
    {
        fs::create_directories(dir / "waves");
        RhythmSpec rhythm;
        Waveform w1 = gen_beat_train(rhythm, 140.0, 40.0, 10);
        w1.patient_id = "p1";
        w1.start_time_ms = 40000;
        write_ppgw1((dir / "waves" / "w1.ppgw").string(), w1);
        Waveform w2 = gen_beat_train(rhythm, 295.0, 40.0, 11);
        w2.patient_id = "p1";
        w2.start_time_ms = 235000;
        write_ppgw1((dir / "waves" / "w2.ppgw").string(), w2);
        const std::string csv =
            "patient_id,onset_ms,alarm_type\np1,100000,AF\np1,150000,OTHER\np1,200000,PVC\n"
            "p1,215000,AF\np1,260000,OTHER\np1,300000,VT\np1,350000,OTHER\np1,400000,VFIB\n"
            "p1,500000,VFIB\n";
        write_file_bytes((dir / "alarms.csv").string(), csv.data(), csv.size());

        const std::string base = "label --config " + cfg + " --waveforms " +
                                 (dir / "waves").string() + " --alarms " +
                                 (dir / "alarms.csv").string() + " --out ";
        c.require(run_cli(base + (dir / "l1.ppgd").string()) == 0 &&
                      run_cli(base + (dir / "l2.ppgd").string()) == 0 &&
                      same((dir / "l1.ppgd").string(), (dir / "l2.ppgd").string()),
                  "label byte-identical");
    }

    // embed-cluster (fresh outdirs so nothing is cached)
    {
        const std::string base = "embed-cluster --config " + cfg + " --dataset " +
                                 (dir / "a.ppgd").string() + " --outdir ";
        c.require(run_cli(base + (dir / "ec1").string()) == 0 &&
                      run_cli(base + (dir / "ec2").string()) == 0 &&
                      same((dir / "ec1" / "embeddings.emb").string(),
                           (dir / "ec2" / "embeddings.emb").string()) &&
                      same((dir / "ec1" / "cluster.json").string(),
                           (dir / "ec2" / "cluster.json").string()) &&
                      same((dir / "ec1" / "ae.ckpt").string(), (dir / "ec2" / "ae.ckpt").string()),
                  "embed-cluster byte-identical");
    }

    // train (model bytes identical; history compared via the stable hash)
    {
        const std::string base = "train --config " + cfg + " --dataset " +
                                 (dir / "a.ppgd").string() + " --outdir ";
        c.require(run_cli(base + (dir / "t1").string()) == 0 &&
                      run_cli(base + (dir / "t2").string()) == 0 &&
                      same((dir / "t1" / "model.ckpt").string(), (dir / "t2" / "model.ckpt").string()),
                  "train checkpoint byte-identical");
        nlohmann::json m1 =
            nlohmann::json::parse(std::ifstream((dir / "t1" / "run_manifest.json").string()));
        nlohmann::json m2 =
            nlohmann::json::parse(std::ifstream((dir / "t2" / "run_manifest.json").string()));
        c.require(m1.at("stable_hashes").at((dir / "t1" / "history.jsonl").string()) ==
                      m2.at("stable_hashes").at((dir / "t2" / "history.jsonl").string()),
                  "history loss content identical (wall-clock excluded)");
        c.require(m1.at("config_sha256") == m2.at("config_sha256"),
                  "run pinned by the identical config hash");
    }

    // eval
    {
        const std::string base = "eval --config " + cfg + " --checkpoint " +
                                 (dir / "t1" / "model.ckpt").string() + " --dataset " +
                                 (dir / "a.ppgd").string() + " --outdir ";
        c.require(run_cli(base + (dir / "e1").string()) == 0 &&
                      run_cli(base + (dir / "e2").string()) == 0 &&
                      same((dir / "e1" / "metrics.json").string(),
                           (dir / "e2" / "metrics.json").string()) &&
                      same((dir / "e1" / "bootstrap.csv").string(),
                           (dir / "e2" / "bootstrap.csv").string()),
                  "eval byte-identical");
    }
    c.finish();
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) g_cli_path = argv[++i];
        if (arg == "--outdir" && i + 1 < argc) g_outdir = argv[++i];
    }

    std::cout << "ppgaf acceptance battery\n========================\n";
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();

    std::cout << "========================\n"
              << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(g_failures))
              << "\n";
    return g_failures;
}
