#include "ecc/adam.hpp"

#include <cmath>

#include "ecc/errors.hpp"

namespace ecc {

AdamState::AdamState(const Network& net) {
    for (const auto& l : net.layers) {
        m_w_.emplace_back(l.weight.shape());
        v_w_.emplace_back(l.weight.shape());
        m_b_.emplace_back(l.bias.size(), 0.0);
        v_b_.emplace_back(l.bias.size(), 0.0);
    }
}

void AdamState::update_moments(const std::vector<LayerGrad>& grads, const AdamConfig& cfg) {
    if (grads.size() != m_w_.size()) throw ShapeError("gradient layer count does not match optimizer state");
    ++t_;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    for (std::size_t u = 0; u < grads.size(); ++u) {
        if (!(grads[u].weight.shape() == m_w_[u].shape()) || grads[u].bias.size() != m_b_[u].size()) {
            throw ShapeError("gradient shape mismatch at layer " + std::to_string(u));
        }
        auto g = grads[u].weight.data();
        auto m = m_w_[u].data();
        auto v = v_w_[u].data();
        for (std::size_t e = 0; e < g.size(); ++e) {
            if (!std::isfinite(g[e])) throw NonFiniteError(u, "non-finite gradient");
            m[e] = b1 * m[e] + (1.0 - b1) * g[e];
            v[e] = b2 * v[e] + (1.0 - b2) * g[e] * g[e];
        }
        for (std::size_t e = 0; e < m_b_[u].size(); ++e) {
            const double gb = grads[u].bias[e];
            if (!std::isfinite(gb)) throw NonFiniteError(u, "non-finite bias gradient");
            m_b_[u][e] = b1 * m_b_[u][e] + (1.0 - b1) * gb;
            v_b_[u][e] = b2 * v_b_[u][e] + (1.0 - b2) * gb * gb;
        }
    }
}

void AdamState::apply_update(Network& net, const AdamConfig& cfg) const {
    if (t_ == 0) return;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (std::size_t u = 0; u < net.layers.size(); ++u) {
        auto w = net.layers[u].weight.data();
        auto m = m_w_[u].data();
        auto v = v_w_[u].data();
        for (std::size_t e = 0; e < w.size(); ++e) {
            w[e] -= cfg.learning_rate * (m[e] / bc1) / (std::sqrt(v[e] / bc2) + cfg.epsilon);
        }
        auto& bias = net.layers[u].bias;
        for (std::size_t e = 0; e < bias.size(); ++e) {
            bias[e] -= cfg.learning_rate * (m_b_[u][e] / bc1) / (std::sqrt(v_b_[u][e] / bc2) + cfg.epsilon);
        }
    }
}

DiagPreconditioner AdamState::preconditioner(std::size_t layer, const AdamConfig& cfg) const {
    if (layer >= v_w_.size()) throw InvalidArgument("layer index out of range");
    const double bc2 = t_ == 0 ? 1.0 : 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    Tensor4 b(v_w_[layer].shape());
    auto bd = b.data();
    auto v = v_w_[layer].data();
    for (std::size_t e = 0; e < bd.size(); ++e) bd[e] = std::sqrt(v[e] / bc2) + cfg.epsilon;
    return DiagPreconditioner(std::move(b), cfg.epsilon);
}

void adam_step(Network& net, AdamState& state, const std::vector<LayerGrad>& grads, const AdamConfig& cfg) {
    state.update_moments(grads, cfg);
    state.apply_update(net, cfg);
}

}  // namespace ecc
