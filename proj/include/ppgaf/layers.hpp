// ============================================================================
// Stateful layers: each owns its parameters, gradient buffers and the
// forward cache needed by backward. Reverse-mode accumulation runs in a
// fixed topological order, so gradients are deterministic. A layer instance
// is exclusively owned by its trainer while being updated.
// ============================================================================

#pragma once
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ppgaf/errors.hpp"
#include "ppgaf/kernels.hpp"
#include "ppgaf/rng.hpp"

namespace ppgaf {

// Named view of one parameter (or persistent state) tensor; Adam and the
// checkpoint writer iterate these in declaration order.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;  // null for non-trainable state
    std::vector<size_t> shape;
};

template <typename T>
class Conv1d {
public:
    Conv1d() = default;
    Conv1d(size_t in_ch, size_t out_ch, size_t kernel, size_t stride, size_t pad, bool bias = true)
        : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
          has_bias_(bias) {
        w.assign(out_ch * in_ch * kernel, T(0));
        dw.assign(w.size(), T(0));
        if (has_bias_) {
            b.assign(out_ch, T(0));
            db.assign(out_ch, T(0));
        }
    }

    void init_he(Rng& rng) {
        const double scale = std::sqrt(2.0 / static_cast<double>(in_ch_ * kernel_));
        for (auto& v : w) v = static_cast<T>(rng.normal(0.0, scale));
        for (auto& v : b) v = T(0);
    }

    size_t out_len(size_t lin) const { return kernels::conv_out_len(lin, kernel_, stride_, pad_); }
    size_t out_ch() const { return out_ch_; }
    size_t in_ch() const { return in_ch_; }

    std::vector<T> forward(const std::vector<T>& x, size_t B, size_t lin, bool train) {
        if (x.size() != B * in_ch_ * lin) throw ShapeError("conv1d: input size mismatch");
        const size_t lout = out_len(lin);
        std::vector<T> y(B * out_ch_ * lout);
        kernels::conv1d_forward(x.data(), B, in_ch_, lin, w.data(),
                                has_bias_ ? b.data() : nullptr, out_ch_, kernel_, stride_, pad_,
                                y.data(), lout);
        if (train) {
            x_cache_ = x;
            b_cache_ = B;
            lin_cache_ = lin;
        } else {
            x_cache_.clear();
            b_cache_ = 0;
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy) {
        if (b_cache_ == 0) throw StateError("conv1d: backward without train-mode forward");
        const size_t lout = out_len(lin_cache_);
        if (dy.size() != b_cache_ * out_ch_ * lout) throw ShapeError("conv1d: dy size mismatch");
        kernels::conv1d_backward_params(dy.data(), b_cache_, out_ch_, lout, x_cache_.data(), in_ch_,
                                        lin_cache_, kernel_, stride_, pad_, dw.data(),
                                        has_bias_ ? db.data() : nullptr);
        std::vector<T> dx(b_cache_ * in_ch_ * lin_cache_);
        kernels::conv1d_backward_input(dy.data(), b_cache_, out_ch_, lout, w.data(), in_ch_,
                                       kernel_, stride_, pad_, dx.data(), lin_cache_);
        return dx;
    }

    void zero_grad() {
        std::fill(dw.begin(), dw.end(), T(0));
        std::fill(db.begin(), db.end(), T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &dw, {out_ch_, in_ch_, kernel_}});
        if (has_bias_) out.push_back({prefix + ".b", &b, &db, {out_ch_}});
    }

    std::vector<T> w, b, dw, db;

private:
    size_t in_ch_ = 0, out_ch_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
    bool has_bias_ = true;
    std::vector<T> x_cache_;
    size_t b_cache_ = 0, lin_cache_ = 0;
};

// Per-channel batch normalization over (B, L); momentum 0.9, eps 1e-5.
// Train mode normalizes with batch statistics and updates the running pair;
// eval mode uses the running statistics.
template <typename T>
class BatchNorm1d {
public:
    BatchNorm1d() = default;
    explicit BatchNorm1d(size_t channels, double momentum = 0.9, double eps = 1e-5)
        : ch_(channels), momentum_(momentum), eps_(eps) {
        gamma.assign(ch_, T(1));
        beta.assign(ch_, T(0));
        dgamma.assign(ch_, T(0));
        dbeta.assign(ch_, T(0));
        running_mean.assign(ch_, T(0));
        running_var.assign(ch_, T(1));
    }

    std::vector<T> forward(const std::vector<T>& x, size_t B, size_t L, bool train) {
        if (x.size() != B * ch_ * L) throw ShapeError("batchnorm: input size mismatch");
        std::vector<T> y(x.size());
        const size_t cnt = B * L;
        if (train) {
            xhat_.resize(x.size());
            inv_std_.resize(ch_);
            b_cache_ = B;
            l_cache_ = L;
            const long n_ch = static_cast<long>(ch_);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (long cl = 0; cl < n_ch; ++cl) {
                const size_t c = static_cast<size_t>(cl);
                double mean = 0.0;
                for (size_t b = 0; b < B; ++b) {
                    const T* xp = x.data() + (b * ch_ + c) * L;
                    for (size_t l = 0; l < L; ++l) mean += xp[l];
                }
                mean /= static_cast<double>(cnt);
                double var = 0.0;
                for (size_t b = 0; b < B; ++b) {
                    const T* xp = x.data() + (b * ch_ + c) * L;
                    for (size_t l = 0; l < L; ++l) {
                        const double d = xp[l] - mean;
                        var += d * d;
                    }
                }
                var /= static_cast<double>(cnt);  // biased, used for normalization
                const double inv = 1.0 / std::sqrt(var + eps_);
                inv_std_[c] = static_cast<T>(inv);
                for (size_t b = 0; b < B; ++b) {
                    const T* xp = x.data() + (b * ch_ + c) * L;
                    T* xh = xhat_.data() + (b * ch_ + c) * L;
                    T* yp = y.data() + (b * ch_ + c) * L;
                    for (size_t l = 0; l < L; ++l) {
                        xh[l] = static_cast<T>((xp[l] - mean) * inv);
                        yp[l] = gamma[c] * xh[l] + beta[c];
                    }
                }
                // unbiased variance for the running estimate
                const double unbiased = cnt > 1 ? var * cnt / (cnt - 1.0) : var;
                running_mean[c] =
                    static_cast<T>(momentum_ * running_mean[c] + (1.0 - momentum_) * mean);
                running_var[c] =
                    static_cast<T>(momentum_ * running_var[c] + (1.0 - momentum_) * unbiased);
            }
        } else {
            b_cache_ = 0;
            const long n_ch = static_cast<long>(ch_);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (long cl = 0; cl < n_ch; ++cl) {
                const size_t c = static_cast<size_t>(cl);
                const double inv = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps_);
                const double mean = running_mean[c];
                for (size_t b = 0; b < B; ++b) {
                    const T* xp = x.data() + (b * ch_ + c) * L;
                    T* yp = y.data() + (b * ch_ + c) * L;
                    for (size_t l = 0; l < L; ++l)
                        yp[l] = static_cast<T>(gamma[c] * (xp[l] - mean) * inv + beta[c]);
                }
            }
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy) {
        if (b_cache_ == 0) throw StateError("batchnorm: backward without train-mode forward");
        const size_t B = b_cache_, L = l_cache_;
        if (dy.size() != B * ch_ * L) throw ShapeError("batchnorm: dy size mismatch");
        std::vector<T> dx(dy.size());
        const double cnt = static_cast<double>(B * L);
        const long n_ch = static_cast<long>(ch_);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (long cl = 0; cl < n_ch; ++cl) {
            const size_t c = static_cast<size_t>(cl);
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (size_t b = 0; b < B; ++b) {
                const T* dyp = dy.data() + (b * ch_ + c) * L;
                const T* xh = xhat_.data() + (b * ch_ + c) * L;
                for (size_t l = 0; l < L; ++l) {
                    sum_dy += dyp[l];
                    sum_dy_xhat += static_cast<double>(dyp[l]) * xh[l];
                }
            }
            dbeta[c] += static_cast<T>(sum_dy);
            dgamma[c] += static_cast<T>(sum_dy_xhat);
            const double g = gamma[c];
            const double inv = inv_std_[c];
            for (size_t b = 0; b < B; ++b) {
                const T* dyp = dy.data() + (b * ch_ + c) * L;
                const T* xh = xhat_.data() + (b * ch_ + c) * L;
                T* dxp = dx.data() + (b * ch_ + c) * L;
                for (size_t l = 0; l < L; ++l)
                    dxp[l] = static_cast<T>(
                        g * inv * (dyp[l] - sum_dy / cnt - xh[l] * sum_dy_xhat / cnt));
            }
        }
        return dx;
    }

    void zero_grad() {
        std::fill(dgamma.begin(), dgamma.end(), T(0));
        std::fill(dbeta.begin(), dbeta.end(), T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".gamma", &gamma, &dgamma, {ch_}});
        out.push_back({prefix + ".beta", &beta, &dbeta, {ch_}});
        out.push_back({prefix + ".running_mean", &running_mean, nullptr, {ch_}});
        out.push_back({prefix + ".running_var", &running_var, nullptr, {ch_}});
    }

    std::vector<T> gamma, beta, dgamma, dbeta, running_mean, running_var;

private:
    size_t ch_ = 0;
    double momentum_ = 0.9, eps_ = 1e-5;
    std::vector<T> xhat_, inv_std_;
    size_t b_cache_ = 0, l_cache_ = 0;
};

template <typename T>
class ReLU {
public:
    std::vector<T> forward(const std::vector<T>& x, bool train) {
        std::vector<T> y(x.size());
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        if (train) {
            mask_.resize(x.size());
            for (size_t i = 0; i < x.size(); ++i) mask_[i] = x[i] > T(0);
            cached_ = true;
        } else {
            cached_ = false;
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy) {
        if (!cached_) throw StateError("relu: backward without train-mode forward");
        if (dy.size() != mask_.size()) throw ShapeError("relu: dy size mismatch");
        std::vector<T> dx(dy.size());
        for (size_t i = 0; i < dy.size(); ++i) dx[i] = mask_[i] ? dy[i] : T(0);
        return dx;
    }

private:
    std::vector<uint8_t> mask_;
    bool cached_ = false;
};

template <typename T>
class MaxPool1d {
public:
    MaxPool1d() = default;
    MaxPool1d(size_t kernel, size_t stride, size_t pad) : kernel_(kernel), stride_(stride), pad_(pad) {}

    size_t out_len(size_t lin) const { return kernels::conv_out_len(lin, kernel_, stride_, pad_); }

    std::vector<T> forward(const std::vector<T>& x, size_t B, size_t C, size_t lin, bool train) {
        if (x.size() != B * C * lin) throw ShapeError("maxpool: input size mismatch");
        const size_t lout = out_len(lin);
        std::vector<T> y(B * C * lout);
        argmax_.resize(train ? y.size() : 0);
        const long n_items = static_cast<long>(B * C);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (long item = 0; item < n_items; ++item) {
            const T* xp = x.data() + static_cast<size_t>(item) * lin;
            T* yp = y.data() + static_cast<size_t>(item) * lout;
            for (size_t lo = 0; lo < lout; ++lo) {
                T best = -std::numeric_limits<T>::infinity();
                long best_li = -1;
                for (size_t k = 0; k < kernel_; ++k) {
                    const long li = static_cast<long>(lo * stride_ + k) - static_cast<long>(pad_);
                    if (li < 0 || li >= static_cast<long>(lin)) continue;
                    if (xp[li] > best) {
                        best = xp[li];
                        best_li = li;
                    }
                }
                yp[lo] = best;
                if (train) argmax_[static_cast<size_t>(item) * lout + lo] = best_li;
            }
        }
        if (train) {
            b_cache_ = B;
            c_cache_ = C;
            lin_cache_ = lin;
        } else {
            b_cache_ = 0;
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy) {
        if (b_cache_ == 0) throw StateError("maxpool: backward without train-mode forward");
        const size_t lout = out_len(lin_cache_);
        if (dy.size() != b_cache_ * c_cache_ * lout) throw ShapeError("maxpool: dy size mismatch");
        std::vector<T> dx(b_cache_ * c_cache_ * lin_cache_, T(0));
        const long n_items = static_cast<long>(b_cache_ * c_cache_);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (long item = 0; item < n_items; ++item) {
            const T* dyp = dy.data() + static_cast<size_t>(item) * lout;
            T* dxp = dx.data() + static_cast<size_t>(item) * lin_cache_;
            const long* am = argmax_.data() + static_cast<size_t>(item) * lout;
            for (size_t lo = 0; lo < lout; ++lo)
                if (am[lo] >= 0) dxp[am[lo]] += dyp[lo];
        }
        return dx;
    }

private:
    size_t kernel_ = 2, stride_ = 2, pad_ = 0;
    std::vector<long> argmax_;
    size_t b_cache_ = 0, c_cache_ = 0, lin_cache_ = 0;
};

// (B, C, L) -> (B, C) mean over time.
template <typename T>
class GlobalAvgPool {
public:
    std::vector<T> forward(const std::vector<T>& x, size_t B, size_t C, size_t L, bool train) {
        if (x.size() != B * C * L) throw ShapeError("gap: input size mismatch");
        std::vector<T> y(B * C);
        for (size_t bc = 0; bc < B * C; ++bc) {
            double acc = 0.0;
            const T* xp = x.data() + bc * L;
            for (size_t l = 0; l < L; ++l) acc += xp[l];
            y[bc] = static_cast<T>(acc / static_cast<double>(L));
        }
        if (train) {
            b_cache_ = B;
            c_cache_ = C;
            l_cache_ = L;
        } else {
            b_cache_ = 0;
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy) {
        if (b_cache_ == 0) throw StateError("gap: backward without train-mode forward");
        if (dy.size() != b_cache_ * c_cache_) throw ShapeError("gap: dy size mismatch");
        std::vector<T> dx(b_cache_ * c_cache_ * l_cache_);
        for (size_t bc = 0; bc < b_cache_ * c_cache_; ++bc) {
            const T g = static_cast<T>(dy[bc] / static_cast<double>(l_cache_));
            T* dxp = dx.data() + bc * l_cache_;
            for (size_t l = 0; l < l_cache_; ++l) dxp[l] = g;
        }
        return dx;
    }

private:
    size_t b_cache_ = 0, c_cache_ = 0, l_cache_ = 0;
};

template <typename T>
class Dense {
public:
    Dense() = default;
    Dense(size_t in_dim, size_t out_dim) : in_(in_dim), out_(out_dim) {
        w.assign(out_dim * in_dim, T(0));
        b.assign(out_dim, T(0));
        dw.assign(w.size(), T(0));
        db.assign(b.size(), T(0));
    }

    void init_he(Rng& rng) {
        const double scale = std::sqrt(2.0 / static_cast<double>(in_));
        for (auto& v : w) v = static_cast<T>(rng.normal(0.0, scale));
        for (auto& v : b) v = T(0);
    }

    void init_zero() {
        std::fill(w.begin(), w.end(), T(0));
        std::fill(b.begin(), b.end(), T(0));
    }

    size_t in_dim() const { return in_; }
    size_t out_dim() const { return out_; }

    std::vector<T> forward(const std::vector<T>& x, size_t B, bool train) {
        if (x.size() != B * in_) throw ShapeError("dense: input size mismatch");
        std::vector<T> y(B * out_);
        const long n_b = static_cast<long>(B);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (long bl = 0; bl < n_b; ++bl) {
            const size_t bi = static_cast<size_t>(bl);
            const T* xp = x.data() + bi * in_;
            T* yp = y.data() + bi * out_;
            for (size_t o = 0; o < out_; ++o) {
                T acc = b[o];
                const T* wp = w.data() + o * in_;
                for (size_t i = 0; i < in_; ++i) acc += wp[i] * xp[i];
                yp[o] = acc;
            }
        }
        if (train) {
            x_cache_ = x;
            b_cache_ = B;
        } else {
            x_cache_.clear();
            b_cache_ = 0;
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy) {
        if (b_cache_ == 0) throw StateError("dense: backward without train-mode forward");
        const size_t B = b_cache_;
        if (dy.size() != B * out_) throw ShapeError("dense: dy size mismatch");
        // param grads: fixed (o, i, b) order
        for (size_t o = 0; o < out_; ++o) {
            for (size_t i = 0; i < in_; ++i) {
                T acc = T(0);
                for (size_t bi = 0; bi < B; ++bi) acc += dy[bi * out_ + o] * x_cache_[bi * in_ + i];
                dw[o * in_ + i] += acc;
            }
            T acc = T(0);
            for (size_t bi = 0; bi < B; ++bi) acc += dy[bi * out_ + o];
            db[o] += acc;
        }
        std::vector<T> dx(B * in_);
        const long n_b = static_cast<long>(B);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (long bl = 0; bl < n_b; ++bl) {
            const size_t bi = static_cast<size_t>(bl);
            const T* dyp = dy.data() + bi * out_;
            T* dxp = dx.data() + bi * in_;
            for (size_t i = 0; i < in_; ++i) {
                T acc = T(0);
                for (size_t o = 0; o < out_; ++o) acc += dyp[o] * w[o * in_ + i];
                dxp[i] = acc;
            }
        }
        return dx;
    }

    void zero_grad() {
        std::fill(dw.begin(), dw.end(), T(0));
        std::fill(db.begin(), db.end(), T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &dw, {out_, in_}});
        out.push_back({prefix + ".b", &b, &db, {out_}});
    }

    std::vector<T> w, b, dw, db;

private:
    size_t in_ = 0, out_ = 0;
    std::vector<T> x_cache_;
    size_t b_cache_ = 0;
};

// Nearest-neighbor upsampling to an explicit target length
// (li = floor(lo * Lin / Lout)); backward accumulates over the fan-out.
template <typename T>
class NearestUpsample {
public:
    std::vector<T> forward(const std::vector<T>& x, size_t B, size_t C, size_t lin, size_t lout,
                           bool train) {
        if (x.size() != B * C * lin) throw ShapeError("upsample: input size mismatch");
        std::vector<T> y(B * C * lout);
        for (size_t bc = 0; bc < B * C; ++bc) {
            const T* xp = x.data() + bc * lin;
            T* yp = y.data() + bc * lout;
            for (size_t lo = 0; lo < lout; ++lo) yp[lo] = xp[lo * lin / lout];
        }
        if (train) {
            b_cache_ = B;
            c_cache_ = C;
            lin_cache_ = lin;
            lout_cache_ = lout;
        } else {
            b_cache_ = 0;
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy) {
        if (b_cache_ == 0) throw StateError("upsample: backward without train-mode forward");
        if (dy.size() != b_cache_ * c_cache_ * lout_cache_)
            throw ShapeError("upsample: dy size mismatch");
        std::vector<T> dx(b_cache_ * c_cache_ * lin_cache_, T(0));
        for (size_t bc = 0; bc < b_cache_ * c_cache_; ++bc) {
            const T* dyp = dy.data() + bc * lout_cache_;
            T* dxp = dx.data() + bc * lin_cache_;
            for (size_t lo = 0; lo < lout_cache_; ++lo) dxp[lo * lin_cache_ / lout_cache_] += dyp[lo];
        }
        return dx;
    }

private:
    size_t b_cache_ = 0, c_cache_ = 0, lin_cache_ = 0, lout_cache_ = 0;
};

}  // namespace ppgaf
