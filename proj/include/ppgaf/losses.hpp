// ============================================================================
// Classification and cluster-consistency losses with analytic gradients.
//
// cmc_losses computes the intra/inter pairwise latent distance terms over
// the current mini-batch only. RAW_SUM counts ordered pairs exactly as the
// double sums are written (i != j twice per unordered pair, cluster pairs
// twice); PAIR_MEAN divides each sum by its ordered-pair count so the
// weights stay comparable across batch sizes. An optional margin replaces
// the inter term by mean(max(0, margin - d)).
// ============================================================================

#pragma once
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ppgaf/errors.hpp"
#include "ppgaf/kernels.hpp"

namespace ppgaf {

enum class NormMode { RAW_SUM, PAIR_MEAN };

// Row-wise softmax in double precision; logits (B, C).
template <typename T>
std::vector<double> softmax(const std::vector<T>& logits, size_t B, size_t C) {
    std::vector<double> p(logits.size());
    for (size_t b = 0; b < B; ++b) {
        const T* lp = logits.data() + b * C;
        double mx = lp[0];
        for (size_t c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(lp[c]));
        double sum = 0.0;
        for (size_t c = 0; c < C; ++c) {
            p[b * C + c] = std::exp(static_cast<double>(lp[c]) - mx);
            sum += p[b * C + c];
        }
        for (size_t c = 0; c < C; ++c) p[b * C + c] /= sum;
    }
    return p;
}

template <typename T>
struct LossGrad {
    double loss = 0.0;
    std::vector<T> dlogits;  // d(mean loss)/d(logits)
};

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
LossGrad<T> cross_entropy(const std::vector<T>& logits, const std::vector<int>& labels, size_t C,
                          bool want_grad = true) {
    const size_t B = labels.size();
    if (logits.size() != B * C) throw ShapeError("cross_entropy: logits size mismatch");
    std::vector<double> p = softmax(logits, B, C);
    LossGrad<T> out;
    if (want_grad) out.dlogits.assign(logits.size(), T(0));
    double acc = 0.0;
    for (size_t b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<size_t>(y) >= C) throw ShapeError("cross_entropy: label out of range");
        acc += -std::log(std::max(p[b * C + y], 1e-300));
        if (want_grad)
            for (size_t c = 0; c < C; ++c)
                out.dlogits[b * C + c] = static_cast<T>(
                    (p[b * C + c] - (static_cast<size_t>(y) == c ? 1.0 : 0.0)) / B);
    }
    out.loss = acc / static_cast<double>(B);
    return out;
}

// alpha * CE + beta * RCE, where RCE replaces log(0) of the one-hot target
// by clamp_a (so RCE = -clamp_a * (1 - p_label)); mean over the batch.
template <typename T>
LossGrad<T> symmetric_cross_entropy(const std::vector<T>& logits, const std::vector<int>& labels,
                                    size_t C, double alpha = 1.0, double beta = 1.0,
                                    double clamp_a = -4.0, bool want_grad = true) {
    if (alpha < 0 || beta < 0) throw ConfigError("sce: alpha and beta must be >= 0");
    if (clamp_a >= 0) throw ConfigError("sce: clamp_a must be negative");
    const size_t B = labels.size();
    if (logits.size() != B * C) throw ShapeError("sce: logits size mismatch");
    std::vector<double> p = softmax(logits, B, C);
    LossGrad<T> out;
    if (want_grad) out.dlogits.assign(logits.size(), T(0));
    double acc = 0.0;
    for (size_t b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<size_t>(y) >= C) throw ShapeError("sce: label out of range");
        const double py = p[b * C + y];
        const double ce = -std::log(std::max(py, 1e-300));
        const double rce = -clamp_a * (1.0 - py);
        acc += alpha * ce + beta * rce;
        if (want_grad) {
            // d(ce)/dz_c = p_c - 1{c==y}; d(rce)/dz_c = clamp_a * py * (1{c==y} - p_c)
            for (size_t c = 0; c < C; ++c) {
                const double onehot = static_cast<size_t>(y) == c ? 1.0 : 0.0;
                const double g_ce = p[b * C + c] - onehot;
                const double g_rce = clamp_a * py * (onehot - p[b * C + c]);
                out.dlogits[b * C + c] =
                    static_cast<T>((alpha * g_ce + beta * g_rce) / static_cast<double>(B));
            }
        }
    }
    out.loss = acc / static_cast<double>(B);
    return out;
}

struct CmcTerms {
    double intra = 0.0;
    double inter = 0.0;
    size_t intra_pairs = 0;  // ordered
    size_t inter_pairs = 0;  // ordered
};

// Intra/inter latent distance terms over the batch. Caller guarantees one
// cluster id per row.
template <typename T>
CmcTerms cmc_losses(const std::vector<T>& latents, size_t B, size_t D,
                    const std::vector<int>& cluster_ids, NormMode mode,
                    std::optional<double> margin = std::nullopt) {
    if (latents.size() != B * D) throw ShapeError("cmc_losses: latents size mismatch");
    if (cluster_ids.size() != B) throw ShapeError("cmc_losses: cluster ids size mismatch");

    CmcTerms t;
    double intra_sum = 0.0, inter_sum = 0.0;
    kernels::pairwise_cluster_sums(latents.data(), B, D, cluster_ids.data(), &intra_sum,
                                   &inter_sum, &t.intra_pairs, &t.inter_pairs);

    if (margin) {
        // hinge on inter-cluster distances: mean over ordered pairs of
        // max(0, margin - d); computed pair-by-pair below
        double hinge = 0.0;
        for (size_t i = 0; i < B; ++i)
            for (size_t j = i + 1; j < B; ++j) {
                if (cluster_ids[i] == cluster_ids[j]) continue;
                double d2 = 0.0;
                for (size_t k = 0; k < D; ++k) {
                    const double diff = static_cast<double>(latents[i * D + k]) -
                                        static_cast<double>(latents[j * D + k]);
                    d2 += diff * diff;
                }
                const double d = std::sqrt(d2);
                hinge += 2.0 * std::max(0.0, *margin - d);
            }
        t.inter = t.inter_pairs > 0 ? hinge / static_cast<double>(t.inter_pairs) : 0.0;
    } else {
        t.inter = -inter_sum;
        if (mode == NormMode::PAIR_MEAN)
            t.inter = t.inter_pairs > 0 ? t.inter / static_cast<double>(t.inter_pairs) : 0.0;
    }

    t.intra = intra_sum;
    if (mode == NormMode::PAIR_MEAN)
        t.intra = t.intra_pairs > 0 ? t.intra / static_cast<double>(t.intra_pairs) : 0.0;
    return t;
}

// Accumulates lambda1 * d(intra)/dF + lambda2 * d(inter)/dF into dlatents.
template <typename T>
void cmc_backward(const std::vector<T>& latents, size_t B, size_t D,
                  const std::vector<int>& cluster_ids, NormMode mode, double lambda1,
                  double lambda2, std::vector<T>& dlatents,
                  std::optional<double> margin = std::nullopt) {
    if (dlatents.size() != latents.size()) throw ShapeError("cmc_backward: dlatents size mismatch");
    if (lambda1 == 0.0 && lambda2 == 0.0) return;

    // ordered-pair counts for PAIR_MEAN scaling
    size_t intra_pairs = 0, inter_pairs = 0;
    if (mode == NormMode::PAIR_MEAN || margin) {
        double a, b;
        kernels::pairwise_cluster_sums(latents.data(), B, D, cluster_ids.data(), &a, &b,
                                       &intra_pairs, &inter_pairs);
    }

    // Each unordered pair appears twice in the ordered sums, and
    // d||F_i - F_j|| picks up (F_i - F_j)/d per ordered copy.
    double intra_coeff = 2.0 * lambda1;
    if (mode == NormMode::PAIR_MEAN && intra_pairs > 0)
        intra_coeff /= static_cast<double>(intra_pairs);
    if (intra_pairs == 0 && mode == NormMode::PAIR_MEAN) intra_coeff = 0.0;

    if (!margin) {
        double inter_coeff = -2.0 * lambda2;
        if (mode == NormMode::PAIR_MEAN && inter_pairs > 0)
            inter_coeff /= static_cast<double>(inter_pairs);
        if (inter_pairs == 0 && mode == NormMode::PAIR_MEAN) inter_coeff = 0.0;
        kernels::pairwise_cluster_backward(latents.data(), B, D, cluster_ids.data(), intra_coeff,
                                           inter_coeff, dlatents.data());
        return;
    }

    // margin mode: intra part via the shared kernel, hinge part explicitly
    kernels::pairwise_cluster_backward(latents.data(), B, D, cluster_ids.data(), intra_coeff, 0.0,
                                       dlatents.data());
    if (inter_pairs == 0) return;
    const double hinge_coeff = -2.0 * lambda2 / static_cast<double>(inter_pairs);
    for (size_t i = 0; i < B; ++i)
        for (size_t j = 0; j < B; ++j) {
            if (i == j || cluster_ids[i] == cluster_ids[j]) continue;
            double d2 = 0.0;
            for (size_t k = 0; k < D; ++k) {
                const double diff = static_cast<double>(latents[i * D + k]) -
                                    static_cast<double>(latents[j * D + k]);
                d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            if (d < 1e-12 || d >= *margin) continue;
            for (size_t k = 0; k < D; ++k)
                dlatents[i * D + k] += static_cast<T>(
                    hinge_coeff / d *
                    (static_cast<double>(latents[i * D + k]) - static_cast<double>(latents[j * D + k])));
        }
}

// Mean squared error between recon and target, with gradient w.r.t. recon.
template <typename T>
LossGrad<T> mse_loss(const std::vector<T>& recon, const std::vector<T>& target,
                     bool want_grad = true) {
    if (recon.size() != target.size()) throw ShapeError("mse: size mismatch");
    LossGrad<T> out;
    double acc = 0.0;
    const double n = static_cast<double>(recon.size());
    if (want_grad) out.dlogits.resize(recon.size());
    for (size_t i = 0; i < recon.size(); ++i) {
        const double d = static_cast<double>(recon[i]) - static_cast<double>(target[i]);
        acc += d * d;
        if (want_grad) out.dlogits[i] = static_cast<T>(2.0 * d / n);
    }
    out.loss = acc / n;
    return out;
}

}  // namespace ppgaf
