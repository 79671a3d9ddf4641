#pragma once

#include <cstdint>
#include <vector>

#include "ingram/errors.hpp"
#include "ingram/tensor.hpp"

namespace ingram {

// Adam with bias correction. One slot pair (first/second moment) per
// registered parameter tensor; the step counter is shared.
class Adam {
public:
    Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
        if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    }

    // Registers parameters once, in a fixed order.
    void register_parameter(const Tensor& p) {
        m_.emplace_back(p.rows, p.cols);
        v_.emplace_back(p.rows, p.cols);
    }

    size_t num_parameters() const { return m_.size(); }
    int64_t step_count() const { return t_; }
    double learning_rate() const { return lr_; }

    // Applies one update across all parameters. `params` and `grads` must
    // line up with the registration order.
    void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw NumericError("adam: parameter/gradient count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = *grads[i];
            if (!p.same_shape(m_[i]) || !g.same_shape(m_[i]))
                throw NumericError("adam: shape mismatch at parameter " + std::to_string(i));
            for (size_t k = 0; k < p.size(); ++k) {
                m_[i].v[k] = beta1_ * m_[i].v[k] + (1.0 - beta1_) * g.v[k];
                v_[i].v[k] = beta2_ * v_[i].v[k] + (1.0 - beta2_) * g.v[k] * g.v[k];
                const double mhat = m_[i].v[k] / bc1;
                const double vhat = v_[i].v[k] / bc2;
                p.v[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace ingram
