#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecc/energy.hpp"
#include "ecc/tensor.hpp"

namespace ecc {

// Slow reference implementations. They share no code path with the solver beyond
// the tensor primitives, so they can audit it.

inline constexpr std::size_t kMaxBruteForceChannels = 12;

/// One layer of the proximal problem min_W 0.5*||W - W_bar||_B^2 + alpha * L1(W, s, y).
struct ProxInstance {
    Tensor4 w_bar;
    Tensor4 b;  // positive diagonal metric, same shape as w_bar
    double s = 1.0;
    double y = 0.0;
    double alpha = 0.1;
    double rho1 = 1.0;
};

struct BruteForceProxResult {
    Tensor4 w;
    std::vector<bool> keep;
    double objective = 0.0;
};

/// Proximal objective evaluated directly for an arbitrary W.
double prox_objective(const ProxInstance& inst, const Tensor4& w);

/// Enumerates all 2^c keep/zero patterns (a kept slice equals W_bar's slice).
/// Ties resolve toward fewer kept channels, then toward lower channel indices.
BruteForceProxResult brute_force_prox(const ProxInstance& inst);

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h);

/// Random instance with channel scores spread over several orders of magnitude.
ProxInstance random_prox_instance(std::uint64_t seed, std::size_t c, double alpha, double y, double s);

struct VerifyCase {
    std::string name;
    bool passed = false;
    double gap = 0.0;
    std::string detail;
};

struct VerifyOptions {
    /// Added to the proximal threshold of the solver path only (negative control).
    double threshold_perturbation = 0.0;
    double objective_tolerance = 1e-8;
    double gradient_tolerance = 1e-9;
};

/// Instance file (JSON):
///   {"prox": [{"name", "w_bar": [...], "shape": [d, c, rh, rw], "b": [...] (optional, identity),
///              "s", "y", "alpha", "rho1"}],
///    "energy": [{"name", "a0", "a": [...], "s": [...], "n_out", "h"}],
///    "random": {"count", "seed", "max_channels"}}
std::vector<VerifyCase> verify_instances(const nlohmann::json& doc, const VerifyOptions& opts = {});
std::vector<VerifyCase> verify_file(const std::string& path, const VerifyOptions& opts = {});

/// Checks one prox instance against the solver's closed form.
VerifyCase verify_prox(const std::string& name, const ProxInstance& inst, const VerifyOptions& opts);

/// Checks grad_s against central finite differences of eval.
VerifyCase verify_energy_gradient(const std::string& name, const BilinearEnergyModel& model, const SparsityVector& s,
                                  double h, const VerifyOptions& opts);

}  // namespace ecc
