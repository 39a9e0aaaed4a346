// ============================================================================
// Data-parallel compute kernels. The kernels:: versions parallelize with
// OpenMP over disjoint output slices and keep every floating-point reduction
// in a fixed serial order, so results are bit-identical to the
// kernels::serial:: reference implementations regardless of thread count.
// The serial versions are plain loop nests kept for testing and as the
// baseline of the kernel benchmark.
//
// Layouts: activations are (B, C, L) row-major; conv weights (Cout, Cin, K).
// ============================================================================

#pragma once
#include <cmath>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ppgaf::kernels {

inline size_t conv_out_len(size_t lin, size_t k, size_t stride, size_t pad) {
    return (lin + 2 * pad - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// Serial reference implementations.
// ---------------------------------------------------------------------------
namespace serial {

template <typename T>
void conv1d_forward(const T* x, size_t B, size_t Cin, size_t Lin, const T* w, const T* bias,
                    size_t Cout, size_t K, size_t stride, size_t pad, T* y, size_t Lout) {
    for (size_t b = 0; b < B; ++b)
        for (size_t co = 0; co < Cout; ++co) {
            T* yp = y + (b * Cout + co) * Lout;
            for (size_t lo = 0; lo < Lout; ++lo) yp[lo] = bias ? bias[co] : T(0);
            for (size_t ci = 0; ci < Cin; ++ci) {
                const T* xp = x + (b * Cin + ci) * Lin;
                for (size_t k = 0; k < K; ++k) {
                    const T wv = w[(co * Cin + ci) * K + k];
                    for (size_t lo = 0; lo < Lout; ++lo) {
                        const long li = static_cast<long>(lo * stride + k) - static_cast<long>(pad);
                        if (li < 0 || li >= static_cast<long>(Lin)) continue;
                        yp[lo] += wv * xp[li];
                    }
                }
            }
        }
}

template <typename T>
void conv1d_backward_input(const T* dy, size_t B, size_t Cout, size_t Lout, const T* w, size_t Cin,
                           size_t K, size_t stride, size_t pad, T* dx, size_t Lin) {
    for (size_t i = 0; i < B * Cin * Lin; ++i) dx[i] = T(0);
    for (size_t b = 0; b < B; ++b)
        for (size_t ci = 0; ci < Cin; ++ci) {
            T* dxp = dx + (b * Cin + ci) * Lin;
            for (size_t co = 0; co < Cout; ++co) {
                const T* dyp = dy + (b * Cout + co) * Lout;
                for (size_t k = 0; k < K; ++k) {
                    const T wv = w[(co * Cin + ci) * K + k];
                    for (size_t lo = 0; lo < Lout; ++lo) {
                        const long li = static_cast<long>(lo * stride + k) - static_cast<long>(pad);
                        if (li < 0 || li >= static_cast<long>(Lin)) continue;
                        dxp[li] += wv * dyp[lo];
                    }
                }
            }
        }
}

template <typename T>
void conv1d_backward_params(const T* dy, size_t B, size_t Cout, size_t Lout, const T* x, size_t Cin,
                            size_t Lin, size_t K, size_t stride, size_t pad, T* dw, T* db) {
    for (size_t co = 0; co < Cout; ++co) {
        for (size_t ci = 0; ci < Cin; ++ci)
            for (size_t k = 0; k < K; ++k) {
                T acc = T(0);
                for (size_t b = 0; b < B; ++b) {
                    const T* dyp = dy + (b * Cout + co) * Lout;
                    const T* xp = x + (b * Cin + ci) * Lin;
                    for (size_t lo = 0; lo < Lout; ++lo) {
                        const long li = static_cast<long>(lo * stride + k) - static_cast<long>(pad);
                        if (li < 0 || li >= static_cast<long>(Lin)) continue;
                        acc += dyp[lo] * xp[li];
                    }
                }
                dw[(co * Cin + ci) * K + k] += acc;
            }
        if (db) {
            T acc = T(0);
            for (size_t b = 0; b < B; ++b) {
                const T* dyp = dy + (b * Cout + co) * Lout;
                for (size_t lo = 0; lo < Lout; ++lo) acc += dyp[lo];
            }
            db[co] += acc;
        }
    }
}

// Ordered-pair intra/inter distance sums of Eq.-style double sums: every
// unordered pair contributes twice. Canonical accumulation order: per-row
// partial sums over j > i, reduced over i ascending (the parallel version
// reproduces exactly this grouping).
template <typename T>
void pairwise_cluster_sums(const T* latents, size_t B, size_t D, const int* cluster, double* intra,
                           double* inter, size_t* intra_pairs, size_t* inter_pairs) {
    double si = 0.0, se = 0.0;
    size_t ni = 0, ne = 0;
    for (size_t i = 0; i < B; ++i) {
        const T* a = latents + i * D;
        double row_in = 0.0, row_out = 0.0;
        for (size_t j = i + 1; j < B; ++j) {
            double d2 = 0.0;
            const T* b = latents + j * D;
            for (size_t k = 0; k < D; ++k) {
                const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            if (cluster[i] == cluster[j]) {
                row_in += d;
                ++ni;
            } else {
                row_out += d;
                ++ne;
            }
        }
        si += row_in;
        se += row_out;
    }
    *intra = 2.0 * si;
    *inter = 2.0 * se;
    *intra_pairs = 2 * ni;
    *inter_pairs = 2 * ne;
}

// dlatents[i] += sum_j coeff(i,j) * (F_i - F_j) / ||F_i - F_j||, with
// coeff = intra_coeff for same-cluster pairs and inter_coeff otherwise.
// Zero-distance pairs contribute nothing (subgradient 0).
template <typename T>
void pairwise_cluster_backward(const T* latents, size_t B, size_t D, const int* cluster,
                               double intra_coeff, double inter_coeff, T* dlatents) {
    for (size_t i = 0; i < B; ++i) {
        const T* a = latents + i * D;
        T* g = dlatents + i * D;
        for (size_t j = 0; j < B; ++j) {
            if (j == i) continue;
            const T* b = latents + j * D;
            double d2 = 0.0;
            for (size_t k = 0; k < D; ++k) {
                const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            if (d < 1e-12) continue;
            const double c = (cluster[i] == cluster[j] ? intra_coeff : inter_coeff) / d;
            for (size_t k = 0; k < D; ++k)
                g[k] += static_cast<T>(c * (static_cast<double>(a[k]) - static_cast<double>(b[k])));
        }
    }
}

// Nearest centroid per point (squared Euclidean, double accumulation); ties
// broken by the lowest centroid id.
inline void nearest_centroid(const float* points, size_t N, size_t D, const double* centroids,
                             size_t M, int* assign, double* dist2) {
    for (size_t i = 0; i < N; ++i) {
        const float* p = points + i * D;
        int best = 0;
        double best_d = -1.0;
        for (size_t m = 0; m < M; ++m) {
            const double* c = centroids + m * D;
            double d2 = 0.0;
            for (size_t k = 0; k < D; ++k) {
                const double diff = static_cast<double>(p[k]) - c[k];
                d2 += diff * diff;
            }
            if (best_d < 0.0 || d2 < best_d) {
                best_d = d2;
                best = static_cast<int>(m);
            }
        }
        assign[i] = best;
        if (dist2) dist2[i] = best_d;
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP versions. Work splits over disjoint output slices; per-slice
// accumulation order matches the serial reference exactly.
// ---------------------------------------------------------------------------

template <typename T>
void conv1d_forward(const T* x, size_t B, size_t Cin, size_t Lin, const T* w, const T* bias,
                    size_t Cout, size_t K, size_t stride, size_t pad, T* y, size_t Lout) {
    const long n_items = static_cast<long>(B * Cout);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long item = 0; item < n_items; ++item) {
        const size_t b = static_cast<size_t>(item) / Cout;
        const size_t co = static_cast<size_t>(item) % Cout;
        T* yp = y + (b * Cout + co) * Lout;
        const T bv = bias ? bias[co] : T(0);
        for (size_t lo = 0; lo < Lout; ++lo) yp[lo] = bv;
        for (size_t ci = 0; ci < Cin; ++ci) {
            const T* xp = x + (b * Cin + ci) * Lin;
            for (size_t k = 0; k < K; ++k) {
                const T wv = w[(co * Cin + ci) * K + k];
                // valid lo range so that 0 <= lo*stride + k - pad < Lin
                const long off = static_cast<long>(k) - static_cast<long>(pad);
                long lo0 = 0;
                if (off < 0)
                    lo0 = (-off + static_cast<long>(stride) - 1) / static_cast<long>(stride);
                long lo1 = static_cast<long>(Lout) - 1;
                const long max_li = static_cast<long>(Lin) - 1 - off;
                if (max_li < 0) continue;
                lo1 = std::min<long>(lo1, max_li / static_cast<long>(stride));
                if (stride == 1) {
                    for (long lo = lo0; lo <= lo1; ++lo) yp[lo] += wv * xp[lo + off];
                } else {
                    for (long lo = lo0; lo <= lo1; ++lo)
                        yp[lo] += wv * xp[lo * static_cast<long>(stride) + off];
                }
            }
        }
    }
}

template <typename T>
void conv1d_backward_input(const T* dy, size_t B, size_t Cout, size_t Lout, const T* w, size_t Cin,
                           size_t K, size_t stride, size_t pad, T* dx, size_t Lin) {
    const long n_items = static_cast<long>(B * Cin);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long item = 0; item < n_items; ++item) {
        const size_t b = static_cast<size_t>(item) / Cin;
        const size_t ci = static_cast<size_t>(item) % Cin;
        T* dxp = dx + (b * Cin + ci) * Lin;
        for (size_t li = 0; li < Lin; ++li) dxp[li] = T(0);
        for (size_t co = 0; co < Cout; ++co) {
            const T* dyp = dy + (b * Cout + co) * Lout;
            for (size_t k = 0; k < K; ++k) {
                const T wv = w[(co * Cin + ci) * K + k];
                const long off = static_cast<long>(k) - static_cast<long>(pad);
                long lo0 = 0;
                if (off < 0)
                    lo0 = (-off + static_cast<long>(stride) - 1) / static_cast<long>(stride);
                long lo1 = static_cast<long>(Lout) - 1;
                const long max_li = static_cast<long>(Lin) - 1 - off;
                if (max_li < 0) continue;
                lo1 = std::min<long>(lo1, max_li / static_cast<long>(stride));
                if (stride == 1) {
                    for (long lo = lo0; lo <= lo1; ++lo) dxp[lo + off] += wv * dyp[lo];
                } else {
                    for (long lo = lo0; lo <= lo1; ++lo)
                        dxp[lo * static_cast<long>(stride) + off] += wv * dyp[lo];
                }
            }
        }
    }
}

template <typename T>
void conv1d_backward_params(const T* dy, size_t B, size_t Cout, size_t Lout, const T* x, size_t Cin,
                            size_t Lin, size_t K, size_t stride, size_t pad, T* dw, T* db) {
    const long n_co = static_cast<long>(Cout);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long col = 0; col < n_co; ++col) {
        const size_t co = static_cast<size_t>(col);
        for (size_t ci = 0; ci < Cin; ++ci)
            for (size_t k = 0; k < K; ++k) {
                T acc = T(0);
                const long off = static_cast<long>(k) - static_cast<long>(pad);
                long lo0 = 0;
                if (off < 0)
                    lo0 = (-off + static_cast<long>(stride) - 1) / static_cast<long>(stride);
                long lo1 = static_cast<long>(Lout) - 1;
                const long max_li = static_cast<long>(Lin) - 1 - off;
                if (max_li < 0) {
                    continue;
                }
                lo1 = std::min<long>(lo1, max_li / static_cast<long>(stride));
                for (size_t b = 0; b < B; ++b) {
                    const T* dyp = dy + (b * Cout + co) * Lout;
                    const T* xp = x + (b * Cin + ci) * Lin;
                    for (long lo = lo0; lo <= lo1; ++lo)
                        acc += dyp[lo] * xp[lo * static_cast<long>(stride) + off];
                }
                dw[(co * Cin + ci) * K + k] += acc;
            }
        if (db) {
            T acc = T(0);
            for (size_t b = 0; b < B; ++b) {
                const T* dyp = dy + (b * Cout + co) * Lout;
                for (size_t lo = 0; lo < Lout; ++lo) acc += dyp[lo];
            }
            db[co] += acc;
        }
    }
}

template <typename T>
void pairwise_cluster_sums(const T* latents, size_t B, size_t D, const int* cluster, double* intra,
                           double* inter, size_t* intra_pairs, size_t* inter_pairs) {
    std::vector<double> si(B, 0.0), se(B, 0.0);
    std::vector<size_t> ni(B, 0), ne(B, 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
    for (long li = 0; li < static_cast<long>(B); ++li) {
        const size_t i = static_cast<size_t>(li);
        const T* a = latents + i * D;
        double s_in = 0.0, s_out = 0.0;
        size_t n_in = 0, n_out = 0;
        for (size_t j = i + 1; j < B; ++j) {
            const T* b = latents + j * D;
            double d2 = 0.0;
            for (size_t k = 0; k < D; ++k) {
                const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            if (cluster[i] == cluster[j]) {
                s_in += d;
                ++n_in;
            } else {
                s_out += d;
                ++n_out;
            }
        }
        si[i] = s_in;
        se[i] = s_out;
        ni[i] = n_in;
        ne[i] = n_out;
    }
    // fixed-order reduction
    double ti = 0.0, te = 0.0;
    size_t pi = 0, pe = 0;
    for (size_t i = 0; i < B; ++i) {
        ti += si[i];
        te += se[i];
        pi += ni[i];
        pe += ne[i];
    }
    *intra = 2.0 * ti;
    *inter = 2.0 * te;
    *intra_pairs = 2 * pi;
    *inter_pairs = 2 * pe;
}

template <typename T>
void pairwise_cluster_backward(const T* latents, size_t B, size_t D, const int* cluster,
                               double intra_coeff, double inter_coeff, T* dlatents) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
    for (long li = 0; li < static_cast<long>(B); ++li) {
        const size_t i = static_cast<size_t>(li);
        const T* a = latents + i * D;
        T* g = dlatents + i * D;
        for (size_t j = 0; j < B; ++j) {
            if (j == i) continue;
            const T* b = latents + j * D;
            double d2 = 0.0;
            for (size_t k = 0; k < D; ++k) {
                const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            if (d < 1e-12) continue;
            const double c = (cluster[i] == cluster[j] ? intra_coeff : inter_coeff) / d;
            for (size_t k = 0; k < D; ++k)
                g[k] += static_cast<T>(c * (static_cast<double>(a[k]) - static_cast<double>(b[k])));
        }
    }
}

inline void nearest_centroid(const float* points, size_t N, size_t D, const double* centroids,
                             size_t M, int* assign, double* dist2) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < static_cast<long>(N); ++i) {
        serial::nearest_centroid(points + static_cast<size_t>(i) * D, 1, D, centroids, M,
                                 assign + i, dist2 ? dist2 + i : nullptr);
    }
}

}  // namespace ppgaf::kernels
