#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarlab/nn/tensor.hpp"

namespace sarlab::nn {

enum class OptimizerMode : int { Sgd = 0, Adam = 1 };

template <typename T>
struct OptimizerConfig {
    OptimizerMode mode = OptimizerMode::Adam;
    T learning_rate = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);
};

// First-order optimizer over a fixed list of parameter tensors. Moment
// buffers are keyed by position, so the parameter list must stay stable
// across steps.
template <typename T>
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig<T> cfg = {}) : cfg_(cfg) {}

    const OptimizerConfig<T>& config() const { return cfg_; }
    long step_count() const { return steps_; }

    void zero_grad(std::vector<Tensor<T>>& params) {
        for (auto& p : params) p.zero_grad();
    }

    void step(std::vector<Tensor<T>>& params) {
        if (moments_m_.empty()) {
            moments_m_.resize(params.size());
            moments_v_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                moments_m_[i].assign(params[i].size(), T(0));
                moments_v_[i].assign(params[i].size(), T(0));
            }
        }
        if (moments_m_.size() != params.size())
            throw std::invalid_argument("optimizer: parameter list changed size");

        ++steps_;
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = params[i];
            if (!p.has_grad()) continue;
            const std::vector<T>& g = p.grad();
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (!std::isfinite(g[j]))
                    throw std::runtime_error("optimizer: non-finite gradient in '" + p.name() +
                                             "' at component " + std::to_string(j));
            }
            T* w = p.data();
            if (cfg_.mode == OptimizerMode::Sgd) {
                for (std::size_t j = 0; j < g.size(); ++j) w[j] -= cfg_.learning_rate * g[j];
            } else {
                std::vector<T>& m = moments_m_[i];
                std::vector<T>& v = moments_v_[i];
                const T b1t = T(1) - std::pow(cfg_.beta1, T(steps_));
                const T b2t = T(1) - std::pow(cfg_.beta2, T(steps_));
                for (std::size_t j = 0; j < g.size(); ++j) {
                    m[j] = cfg_.beta1 * m[j] + (T(1) - cfg_.beta1) * g[j];
                    v[j] = cfg_.beta2 * v[j] + (T(1) - cfg_.beta2) * g[j] * g[j];
                    const T mhat = m[j] / b1t;
                    const T vhat = v[j] / b2t;
                    w[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
                }
            }
        }
    }

private:
    OptimizerConfig<T> cfg_;
    long steps_ = 0;
    std::vector<std::vector<T>> moments_m_;
    std::vector<std::vector<T>> moments_v_;
};

}  // namespace sarlab::nn
