#pragma once

#include <cstddef>
#include <vector>

#include "ecc/network.hpp"
#include "ecc/tensor.hpp"

namespace ecc {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moments for every weight and bias of a network. The diagonal
/// preconditioner is B = sqrt(v_hat) + epsilon with bias-corrected v_hat.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(const Network& net);

    /// t += 1, then m, v <- EMA of grads and squared grads.
    void update_moments(const std::vector<LayerGrad>& grads, const AdamConfig& cfg);

    /// w <- w - lr * m_hat / B for all parameters, using the current moments.
    void apply_update(Network& net, const AdamConfig& cfg) const;

    DiagPreconditioner preconditioner(std::size_t layer, const AdamConfig& cfg) const;

    std::size_t step() const { return t_; }
    const std::vector<Tensor4>& first_moments() const { return m_w_; }
    const std::vector<Tensor4>& second_moments() const { return v_w_; }

private:
    std::size_t t_ = 0;
    std::vector<Tensor4> m_w_, v_w_;
    std::vector<std::vector<double>> m_b_, v_b_;
};

/// One plain Adam step: moments then update.
void adam_step(Network& net, AdamState& state, const std::vector<LayerGrad>& grads, const AdamConfig& cfg);

}  // namespace ecc
