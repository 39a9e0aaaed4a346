// ============================================================================
// Adam with bias correction. Moment buffers mirror the parameter shapes and
// are allocated lazily on the first step. A NaN anywhere in the gradients
// halts training with diagnostics.
// ============================================================================

#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "ppgaf/errors.hpp"
#include "ppgaf/layers.hpp"

namespace ppgaf {

template <typename T>
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    size_t step_count() const { return t_; }

    void step(std::vector<ParamRef<T>>& params) {
        if (m_.empty()) {
            for (auto& p : params) {
                m_.emplace_back(p.grad ? p.value->size() : 0, T(0));
                v_.emplace_back(p.grad ? p.value->size() : 0, T(0));
            }
        }
        if (m_.size() != params.size()) throw StateError("adam: parameter set changed");

        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = params[pi];
            if (!p.grad) continue;
            for (T g : *p.grad)
                if (std::isnan(static_cast<double>(g)))
                    throw NumericError("adam: NaN gradient in " + p.name + " at step " +
                                       std::to_string(t_ + 1));
        }

        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = params[pi];
            if (!p.grad) continue;
            auto& m = m_[pi];
            auto& v = v_[pi];
            auto& val = *p.value;
            auto& grad = *p.grad;
            for (size_t i = 0; i < val.size(); ++i) {
                const double g = grad[i];
                const double mi = beta1_ * m[i] + (1.0 - beta1_) * g;
                const double vi = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                val[i] = static_cast<T>(val[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    size_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

}  // namespace ppgaf
