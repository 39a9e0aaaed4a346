#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ppgaf/errors.hpp"
#include "ppgaf/metrics.hpp"
#include "ppgaf/rng.hpp"

using namespace ppgaf;

namespace {

std::vector<ScoredRecord> scored_of(const std::vector<double>& scores, const std::vector<int>& labels,
                                    const std::vector<Quality>* quality = nullptr) {
    std::vector<ScoredRecord> out(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        out[i].record_id = i;
        out[i].patient_id = "p" + std::to_string(i);
        out[i].score = scores[i];
        out[i].label = labels[i];
        out[i].quality = quality ? (*quality)[i] : Quality::GOOD;
    }
    return out;
}

// O(n^2) pair-concordance oracle with 0.5 tie credit.
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

// Independent exact Wilcoxon oracle: recursive enumeration over sign
// assignments (the implementation uses an iterative bitmask).
void enum_signs(const std::vector<double>& ranks, size_t i, double acc, double w_obs, size_t& le,
                size_t& ge) {
    if (i == ranks.size()) {
        if (acc <= w_obs + 1e-9) ++le;
        if (acc >= w_obs - 1e-9) ++ge;
        return;
    }
    enum_signs(ranks, i + 1, acc, w_obs, le, ge);
    enum_signs(ranks, i + 1, acc + ranks[i], w_obs, le, ge);
}

double wilcoxon_oracle(std::vector<double> a, std::vector<double> b) {
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
    enum_signs(rank, 0, 0.0, w, le, ge);
    const double total = std::pow(2.0, static_cast<double>(n));
    return std::min(1.0, 2.0 * std::min(le / total, ge / total));
}

}  // namespace

TEST_CASE("auroc fixtures") {
    CHECK(auroc_from({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(auroc_from({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
    CHECK(auroc_from({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
    CHECK_THROWS_AS(auroc_from({0.1, 0.2}, {1, 1}), UndefinedMetric);
}

TEST_CASE("auroc equals the pair-concordance oracle on 200 random instances") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 2 + rng.below(199);
        std::vector<double> s(n);
        std::vector<int> y(n);
        bool both = false;
        while (!both) {
            for (auto& v : y) v = static_cast<int>(rng.below(2));
            both = std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0;
        }
        // quantized scores make ties frequent
        for (auto& v : s) v = static_cast<double>(rng.below(8)) / 7.0;
        CHECK(std::abs(auroc_from(s, y) - auroc_oracle(s, y)) < 1e-12);
    }
}

TEST_CASE("auroc invariances") {
    Rng rng(2);
    const size_t n = 61;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (auto& v : s) v = rng.uniform();
    for (size_t i = 0; i < n; ++i) y[i] = i % 3 == 0 ? 1 : 0;
    const double base = auroc_from(s, y);

    SUBCASE("strictly increasing transform") {
        std::vector<double> t(n);
        for (size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) + 1.0;
        CHECK(auroc_from(t, y) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("label flip with score negation") {
        std::vector<double> neg(n);
        std::vector<int> flip(n);
        for (size_t i = 0; i < n; ++i) {
            neg[i] = -s[i];
            flip[i] = 1 - y[i];
        }
        CHECK(auroc_from(neg, flip) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("auprc fixtures") {
    CHECK(auprc_from({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
    CHECK(auprc_from({0.9, 0.8}, {1, 1}) == 1.0);  // all positives
    CHECK(auprc_from({0.9, 0.1}, {0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(auprc_from({0.9, 0.1}, {0, 0}), UndefinedMetric);
}

TEST_CASE("subgroup_eval: drop percentage and undefined subgroups") {
    SUBCASE("drop formula") {
        // good subgroup AUROC 0.90, bad 0.72 -> drop 20%
        std::vector<double> s = {0.95, 0.9, 0.6, 0.5, 0.35, 0.1, 0.65, 0.6, 0.62, 0.35, 0.66, 0.3};
        std::vector<int> y = {1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0};
        std::vector<Quality> q(12, Quality::GOOD);
        for (size_t i = 6; i < 12; ++i) q[i] = Quality::BAD;
        auto sub = subgroup_eval(scored_of(s, y, &q));
        REQUIRE(sub.auroc_good.has_value());
        REQUIRE(sub.auroc_bad.has_value());
        const double drop = 100.0 * (*sub.auroc_good - *sub.auroc_bad) / *sub.auroc_good;
        CHECK(*sub.auroc_drop_pct == doctest::Approx(drop).epsilon(1e-12));
    }
    SUBCASE("identical subgroup performance gives zero drop") {
        std::vector<double> s = {0.9, 0.1, 0.9, 0.1};
        std::vector<int> y = {1, 0, 1, 0};
        std::vector<Quality> q = {Quality::GOOD, Quality::GOOD, Quality::BAD, Quality::BAD};
        auto sub = subgroup_eval(scored_of(s, y, &q));
        CHECK(*sub.auroc_drop_pct == doctest::Approx(0.0));
    }
    SUBCASE("empty BAD subgroup flags undefined") {
        std::vector<double> s = {0.9, 0.1};
        std::vector<int> y = {1, 0};
        auto sub = subgroup_eval(scored_of(s, y));
        CHECK(sub.n_bad == 0);
        CHECK(!sub.auroc_bad.has_value());
        CHECK(!sub.auroc_drop_pct.has_value());
    }
}

TEST_CASE("bootstrap: one record per patient per draw") {
    SUBCASE("single record per patient -> zero-variance bootstrap") {
        std::vector<double> s = {0.9, 0.8, 0.3, 0.2};
        std::vector<int> y = {1, 1, 0, 0};
        auto res = bootstrap_auroc(scored_of(s, y), 20, 5);
        REQUIRE(res.auroc_draws.size() == 20);
        for (double v : res.auroc_draws) CHECK(v == res.auroc_draws[0]);
    }
    SUBCASE("126 patients -> draws of 126 records; seeded reproducibility") {
        Rng rng(7);
        std::vector<ScoredRecord> scored;
        for (int p = 0; p < 126; ++p)
            for (int k = 0; k < 3; ++k) {
                ScoredRecord r;
                r.record_id = scored.size();
                r.patient_id = "p" + std::to_string(p);
                r.label = p % 2;
                r.score = 0.5 * r.label + rng.uniform(0.0, 0.5);
                scored.push_back(r);
            }
        auto a = bootstrap_auroc(scored, 100, 11);
        auto b = bootstrap_auroc(scored, 100, 11);
        CHECK(a.auroc_draws == b.auroc_draws);
        CHECK(a.auroc_draws.size() == 100);
        CHECK(a.skipped_draws == 0);
    }
    SUBCASE("all-degenerate draws fail with UndefinedMetric") {
        std::vector<double> s = {0.9, 0.8, 0.7};
        std::vector<int> y = {1, 1, 1};
        CHECK_THROWS_AS(bootstrap_auroc(scored_of(s, y), 10, 3), UndefinedMetric);
    }
}

TEST_CASE("wilcoxon signed-rank fixtures") {
    CHECK(wilcoxon_signed_rank({1, 2, 3}, {0, 0, 0}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(wilcoxon_signed_rank({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(wilcoxon_signed_rank({0, 2}, {1, 1}) == 1.0);  // antisymmetric [-1, 1]
}

TEST_CASE("wilcoxon exact p matches the independent enumeration for n <= 12") {
    Rng rng(9);
    for (int trial = 0; trial < 60; ++trial) {
        const size_t n = 1 + rng.below(12);
        std::vector<double> a(n), b(n);
        for (size_t i = 0; i < n; ++i) {
            // small integers force frequent ties and zero differences
            a[i] = static_cast<double>(rng.below(5));
            b[i] = static_cast<double>(rng.below(5));
        }
        CHECK(wilcoxon_signed_rank(a, b) == doctest::Approx(wilcoxon_oracle(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon normal approximation behaves for n > 12") {
    Rng rng(10);
    const size_t n = 40;
    std::vector<double> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = a[i] + rng.normal(0.0, 0.1);
    }
    const double p = wilcoxon_signed_rank(a, b);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    // a strongly shifted sample should be highly significant
    std::vector<double> c(n);
    for (size_t i = 0; i < n; ++i) c[i] = a[i] + 1.0;
    CHECK(wilcoxon_signed_rank(c, a) < 1e-4);
}

TEST_CASE("bonferroni helper reproduces 0.05 / 15") {
    CHECK(bonferroni_threshold(0.05, 15) == doctest::Approx(0.0033333333).epsilon(1e-6));
}

namespace {

Embedding embedding_of(const std::vector<std::vector<float>>& rows) {
    Embedding e;
    e.n = rows.size();
    e.dim = rows[0].size();
    for (const auto& r : rows) e.data.insert(e.data.end(), r.begin(), r.end());
    return e;
}

}  // namespace

TEST_CASE("latent neighborhood purity and counter-class ratio fixtures") {
    // 50 reference points at distance ranks 1..50 from the single query
    std::vector<std::vector<float>> ref_rows;
    std::vector<int> ref_obs, ref_true;
    for (int i = 0; i < 50; ++i) {
        ref_rows.push_back({static_cast<float>(i + 1)});
        // 40 of 50 carry correct observed labels -> purity 0.8
        ref_obs.push_back(i < 40 ? 0 : 1);
        ref_true.push_back(0);
    }
    // 10 of 50 are of the opposite true class -> ccr 0.2
    for (int i = 0; i < 10; ++i) ref_true[i * 5 + 2] = 1;
    for (int i = 0; i < 50; ++i)
        if (ref_true[i] == 1) ref_obs[i] = ref_obs[i];  // observed correctness unchanged

    // recount purity after the true-label edits
    size_t correct = 0;
    for (int i = 0; i < 50; ++i) correct += (ref_obs[i] == ref_true[i]);

    Embedding query = embedding_of({{0.0f}});
    auto stats = latent_neighborhood_analysis(query, {0}, embedding_of(ref_rows), ref_obs, ref_true,
                                              50);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].purity == doctest::Approx(static_cast<double>(correct) / 50.0));
    CHECK(stats[0].ccr == doctest::Approx(0.2));
    CHECK(stats[0].k_used == 50);
}

TEST_CASE("latent neighborhood: exact copies give purity 1 and ccr 0") {
    std::vector<std::vector<float>> rows(60, {1.0f, 2.0f});
    std::vector<int> obs(60, 1), tru(60, 1);
    Embedding query = embedding_of({{1.0f, 2.0f}});
    auto stats = latent_neighborhood_analysis(query, {1}, embedding_of(rows), obs, tru, 50);
    CHECK(stats[0].purity == 1.0);
    CHECK(stats[0].ccr == 0.0);
}

TEST_CASE("latent neighborhood clamps k to the reference size") {
    std::vector<std::vector<float>> rows(10, {0.0f});
    std::vector<int> obs(10, 0), tru(10, 0);
    bool clamped = false;
    auto stats = latent_neighborhood_analysis(embedding_of({{0.0f}}), {0}, embedding_of(rows), obs,
                                              tru, 50, &clamped);
    CHECK(clamped);
    CHECK(stats[0].k_used == 10);
}

TEST_CASE("latent neighborhood is reference-order invariant without ties") {
    Rng rng(12);
    std::vector<std::vector<float>> rows;
    std::vector<int> obs, tru;
    for (int i = 0; i < 80; ++i) {
        rows.push_back({static_cast<float>(rng.normal()), static_cast<float>(rng.normal())});
        obs.push_back(static_cast<int>(rng.below(2)));
        tru.push_back(static_cast<int>(rng.below(2)));
    }
    Embedding query = embedding_of({{0.1f, -0.2f}, {1.0f, 0.5f}});
    auto base = latent_neighborhood_analysis(query, {0, 1}, embedding_of(rows), obs, tru, 20);

    std::vector<size_t> perm(rows.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::vector<float>> prow(rows.size());
    std::vector<int> pobs(rows.size()), ptru(rows.size());
    for (size_t i = 0; i < perm.size(); ++i) {
        prow[i] = rows[perm[i]];
        pobs[i] = obs[perm[i]];
        ptru[i] = tru[perm[i]];
    }
    auto permuted = latent_neighborhood_analysis(query, {0, 1}, embedding_of(prow), pobs, ptru, 20);
    for (size_t q = 0; q < 2; ++q) {
        CHECK(permuted[q].purity == base[q].purity);
        CHECK(permuted[q].ccr == base[q].ccr);
    }
}

TEST_CASE("timing comparison") {
    auto hist = [](std::initializer_list<double> secs) {
        std::vector<EpochStats> h;
        size_t e = 0;
        for (double s : secs) {
            EpochStats es;
            es.epoch = e++;
            es.seconds = s;
            h.push_back(es);
        }
        return h;
    };
    SUBCASE("identical histories give ratio 1") {
        auto t = timing_compare(hist({10, 11, 12}), hist({10, 11, 12}));
        CHECK(t.overhead_ratio == 1.0);
    }
    SUBCASE("12 s vs 10 s gives 1.2") {
        auto t = timing_compare(hist({10, 10, 10}), hist({12, 12, 12}));
        CHECK(t.overhead_ratio == doctest::Approx(1.2));
    }
    SUBCASE("mismatched epoch counts fail") {
        CHECK_THROWS_AS(timing_compare(hist({1, 2}), hist({1, 2, 3})), ConfigError);
    }
}

TEST_CASE("metrics report JSON carries optional sections only when present") {
    MetricsReport rep;
    rep.n_records = 10;
    rep.auroc_all = 0.9;
    auto j = rep.to_json();
    CHECK(j.contains("auroc"));
    CHECK(!j.contains("subgroups"));
    CHECK(!j.contains("timing"));
    rep.significance_alpha = 0.05;
    rep.n_comparisons = 15;
    rep.significance_threshold = bonferroni_threshold(0.05, 15);
    j = rep.to_json();
    CHECK(j["significance_threshold"].get<double>() == doctest::Approx(0.05 / 15.0));
}
