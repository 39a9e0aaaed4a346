#include "ppgaf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ppgaf/errors.hpp"
#include "ppgaf/rng.hpp"

namespace ppgaf {

using nlohmann::json;

double auroc_from(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("auroc: size mismatch");
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetric("auroc: needs both classes (n_pos=" + std::to_string(n_pos) +
                              ", n_neg=" + std::to_string(n_neg) + ")");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // mean ranks over tied scores, 1-based
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mean_rank;
        i = j + 1;
    }

    double rank_sum_pos = 0.0;
    for (size_t k = 0; k < n; ++k)
        if (labels[k] == 1) rank_sum_pos += rank[k];

    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auroc(const std::vector<ScoredRecord>& scored) {
    std::vector<double> s(scored.size());
    std::vector<int> y(scored.size());
    for (size_t i = 0; i < scored.size(); ++i) {
        s[i] = scored[i].score;
        y[i] = scored[i].label;
    }
    return auroc_from(s, y);
}

double auprc_from(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("auprc: size mismatch");
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    if (n_pos == 0) throw UndefinedMetric("auprc: needs at least one positive");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    // walk threshold groups of equal score; integrate P dR
    double ap = 0.0;
    double prev_recall = 0.0;
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1)
                ++tp;
            else
                ++fp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    return ap;
}

double auprc(const std::vector<ScoredRecord>& scored) {
    std::vector<double> s(scored.size());
    std::vector<int> y(scored.size());
    for (size_t i = 0; i < scored.size(); ++i) {
        s[i] = scored[i].score;
        y[i] = scored[i].label;
    }
    return auprc_from(s, y);
}

SubgroupMetrics subgroup_eval(const std::vector<ScoredRecord>& scored) {
    std::vector<ScoredRecord> good, bad;
    for (const auto& r : scored) (r.quality == Quality::GOOD ? good : bad).push_back(r);

    SubgroupMetrics out;
    out.n_good = good.size();
    out.n_bad = bad.size();
    auto try_metrics = [](const std::vector<ScoredRecord>& part, std::optional<double>& roc,
                          std::optional<double>& prc) {
        try {
            roc = auroc(part);
        } catch (const UndefinedMetric&) {
        }
        try {
            prc = auprc(part);
        } catch (const UndefinedMetric&) {
        }
    };
    try_metrics(good, out.auroc_good, out.auprc_good);
    try_metrics(bad, out.auroc_bad, out.auprc_bad);
    if (out.auroc_good && out.auroc_bad && *out.auroc_good > 0.0)
        out.auroc_drop_pct = 100.0 * (*out.auroc_good - *out.auroc_bad) / *out.auroc_good;
    return out;
}

BootstrapResult bootstrap_auroc(const std::vector<ScoredRecord>& scored, size_t draws,
                                uint64_t seed, std::vector<std::vector<size_t>>* draw_records) {
    std::map<std::string, std::vector<size_t>> by_patient;
    for (size_t i = 0; i < scored.size(); ++i) by_patient[scored[i].patient_id].push_back(i);
    if (by_patient.size() < 2)
        throw UndefinedMetric("bootstrap: needs records from at least 2 patients");

    std::vector<const std::vector<size_t>*> groups;
    for (const auto& [pid, idx] : by_patient) groups.push_back(&idx);

    BootstrapResult res;
    res.auroc_draws.reserve(draws);
    if (draw_records) draw_records->clear();
    constexpr int kRetries = 100;

    for (size_t d = 0; d < draws; ++d) {
        Rng rng(derive_seed(seed, d));
        bool ok = false;
        for (int attempt = 0; attempt < kRetries && !ok; ++attempt) {
            std::vector<size_t> picks;
            std::vector<double> s;
            std::vector<int> y;
            picks.reserve(groups.size());
            s.reserve(groups.size());
            y.reserve(groups.size());
            for (const auto* g : groups) {
                const size_t pick = (*g)[rng.below(g->size())];
                picks.push_back(pick);
                s.push_back(scored[pick].score);
                y.push_back(scored[pick].label);
            }
            const bool has_pos = std::count(y.begin(), y.end(), 1) > 0;
            const bool has_neg = std::count(y.begin(), y.end(), 0) > 0;
            if (!has_pos || !has_neg) continue;
            res.auroc_draws.push_back(auroc_from(s, y));
            if (draw_records) draw_records->push_back(std::move(picks));
            ok = true;
        }
        if (!ok) ++res.skipped_draws;
    }
    if (res.auroc_draws.empty()) throw UndefinedMetric("bootstrap: every draw was degenerate");
    return res;
}

namespace {

double normal_sf_two_sided(double z) {
    // 2 * (1 - Phi(|z|))
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("wilcoxon: paired inputs must have equal length");

    std::vector<double> diffs;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const size_t n = diffs.size();
    if (n == 0) return 1.0;  // all differences zero

    // mean ranks of |d|
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t x, size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });
    std::vector<double> rank(n);
    std::vector<size_t> tie_sizes;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
            const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
            for (size_t k = i; k <= j; ++k) rank[order[k]] = mean_rank;
            tie_sizes.push_back(j - i + 1);
            i = j + 1;
        }
    }

    double w_plus = 0.0;
    for (size_t i = 0; i < n; ++i)
        if (diffs[i] > 0) w_plus += rank[i];

    if (n <= 12) {
        // exact: enumerate all 2^n sign assignments (rank sums are
        // half-integers, so comparisons with a small slack are exact)
        const size_t total = size_t(1) << n;
        size_t le = 0, ge = 0;
        constexpr double kEps = 1e-9;
        for (size_t mask = 0; mask < total; ++mask) {
            double w = 0.0;
            for (size_t i = 0; i < n; ++i)
                if (mask & (size_t(1) << i)) w += rank[i];
            if (w <= w_plus + kEps) ++le;
            if (w >= w_plus - kEps) ++ge;
        }
        const double p_le = static_cast<double>(le) / static_cast<double>(total);
        const double p_ge = static_cast<double>(ge) / static_cast<double>(total);
        return std::min(1.0, 2.0 * std::min(p_le, p_ge));
    }

    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    for (size_t t : tie_sizes) {
        const double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return 1.0;
    const double z = (w_plus - mu) / std::sqrt(var);
    return normal_sf_two_sided(z);
}

std::vector<NeighborhoodStats> latent_neighborhood_analysis(
    const Embedding& query_latents, const std::vector<int>& query_true, const Embedding& ref_latents,
    const std::vector<int>& ref_observed, const std::vector<int>& ref_true, size_t k,
    bool* k_clamped) {
    if (query_latents.dim != ref_latents.dim)
        throw ShapeError("latent analysis: latent dimensions differ");
    if (query_true.size() != query_latents.n)
        throw ShapeError("latent analysis: query labels misaligned");
    if (ref_observed.size() != ref_latents.n || ref_true.size() != ref_latents.n)
        throw ShapeError("latent analysis: reference labels misaligned");
    if (ref_latents.n == 0) throw ShapeError("latent analysis: empty reference");

    size_t k_eff = k;
    if (k_eff > ref_latents.n) {
        k_eff = ref_latents.n;
        if (k_clamped) *k_clamped = true;
    } else if (k_clamped) {
        *k_clamped = false;
    }

    const size_t d = ref_latents.dim;
    std::vector<NeighborhoodStats> out(query_latents.n);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long qi = 0; qi < static_cast<long>(query_latents.n); ++qi) {
        const size_t q = static_cast<size_t>(qi);
        const float* qp = query_latents.row(q);
        std::vector<std::pair<double, size_t>> dist(ref_latents.n);
        for (size_t r = 0; r < ref_latents.n; ++r) {
            const float* rp = ref_latents.row(r);
            double acc = 0.0;
            for (size_t j = 0; j < d; ++j) {
                const double diff = static_cast<double>(qp[j]) - static_cast<double>(rp[j]);
                acc += diff * diff;
            }
            dist[r] = {acc, r};  // ties break by record id
        }
        std::partial_sort(dist.begin(), dist.begin() + k_eff, dist.end());

        size_t correct_label = 0, counter_class = 0;
        for (size_t j = 0; j < k_eff; ++j) {
            const size_t r = dist[j].second;
            if (ref_observed[r] == ref_true[r]) ++correct_label;
            if (ref_true[r] != query_true[q]) ++counter_class;
        }
        out[q].query_id = q;
        out[q].purity = static_cast<double>(correct_label) / static_cast<double>(k_eff);
        out[q].ccr = static_cast<double>(counter_class) / static_cast<double>(k_eff);
        out[q].k_used = k_eff;
    }
    return out;
}

TimingComparison timing_compare(const std::vector<EpochStats>& history_a,
                                const std::vector<EpochStats>& history_b) {
    if (history_a.size() != history_b.size() || history_a.empty())
        throw ConfigError("timing_compare: histories must have equal, nonzero epoch counts");
    auto median = [](const std::vector<EpochStats>& h) {
        std::vector<double> secs;
        secs.reserve(h.size());
        for (const auto& e : h) secs.push_back(e.seconds);
        std::sort(secs.begin(), secs.end());
        const size_t n = secs.size();
        return n % 2 ? secs[n / 2] : 0.5 * (secs[n / 2 - 1] + secs[n / 2]);
    };
    TimingComparison out;
    out.median_epoch_seconds_a = median(history_a);
    out.median_epoch_seconds_b = median(history_b);
    out.overhead_ratio = out.median_epoch_seconds_b / out.median_epoch_seconds_a;
    return out;
}

json MetricsReport::to_json() const {
    json j;
    j["n_records"] = n_records;
    if (auroc_all) j["auroc"] = *auroc_all;
    if (auprc_all) j["auprc"] = *auprc_all;
    if (subgroups) {
        json s;
        s["n_good"] = subgroups->n_good;
        s["n_bad"] = subgroups->n_bad;
        if (subgroups->auroc_good) s["auroc_good"] = *subgroups->auroc_good;
        if (subgroups->auroc_bad) s["auroc_bad"] = *subgroups->auroc_bad;
        if (subgroups->auprc_good) s["auprc_good"] = *subgroups->auprc_good;
        if (subgroups->auprc_bad) s["auprc_bad"] = *subgroups->auprc_bad;
        if (subgroups->auroc_drop_pct) s["auroc_drop_pct"] = *subgroups->auroc_drop_pct;
        j["subgroups"] = std::move(s);
    }
    if (bootstrap) {
        json b;
        b["draws"] = bootstrap->auroc_draws;
        b["skipped"] = bootstrap->skipped_draws;
        double mean = 0.0;
        for (double v : bootstrap->auroc_draws) mean += v;
        mean /= static_cast<double>(bootstrap->auroc_draws.size());
        b["mean"] = mean;
        j["bootstrap"] = std::move(b);
    }
    if (!pairwise_p.empty()) j["pairwise_p"] = pairwise_p;
    if (significance_alpha) j["significance_alpha"] = *significance_alpha;
    if (n_comparisons) j["n_comparisons"] = *n_comparisons;
    if (significance_threshold) j["significance_threshold"] = *significance_threshold;
    if (ae_pretrain_seconds) j["ae_pretrain_seconds"] = *ae_pretrain_seconds;
    if (timing) {
        j["timing"] = {{"median_epoch_seconds_baseline", timing->median_epoch_seconds_a},
                       {"median_epoch_seconds", timing->median_epoch_seconds_b},
                       {"overhead_ratio", timing->overhead_ratio}};
    }
    if (mean_purity) j["mean_purity"] = *mean_purity;
    if (mean_ccr) j["mean_ccr"] = *mean_ccr;
    return j;
}

std::vector<ScoredRecord> make_scored(const Dataset& ds, const std::vector<size_t>& indices,
                                      const std::vector<double>& scores, bool use_true_labels) {
    if (indices.size() != scores.size()) throw ShapeError("make_scored: size mismatch");
    std::vector<ScoredRecord> out(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        const auto& rec = ds.records[indices[i]];
        out[i].record_id = indices[i];
        out[i].patient_id = rec.patient_id;
        out[i].score = scores[i];
        const Label l = use_true_labels && rec.true_label ? *rec.true_label : rec.label;
        out[i].label = binary_label(l);
        out[i].quality = rec.quality.value;
    }
    return out;
}

}  // namespace ppgaf
