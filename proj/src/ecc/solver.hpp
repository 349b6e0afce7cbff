#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ecc/adam.hpp"
#include "ecc/dataset.hpp"
#include "ecc/energy.hpp"
#include "ecc/network.hpp"

namespace ecc {

struct SolverConfig {
    double budget_joules = 0.0;
    AdamConfig adam;                   // adam.learning_rate is the primal step size alpha
    double beta = 0.0;                 // sparsity learning rate; <= 0 selects auto calibration
    double beta_target_fraction = 0.4; // auto mode: fraction of max_iterations to close the energy gap
    double rho1 = 1.0;
    double rho2 = 1.0;
    double epsilon = 1e-3;             // minimum largest s-gradient while over budget
    std::vector<double> lower_bounds;  // per layer; empty means lower_bound_fraction * c (at least 1)
    double lower_bound_fraction = 0.0;
    std::size_t max_iterations = 3000;
    std::size_t grace_iterations = 0;  // primal-only steps after both constraints hold
    double zero_tol = 0.0;
    double kd_weight = 0.0;            // distillation from the dense network during compression
    double kd_temperature = 4.0;
    // Run the duals and the s-updates on E_hat / budget against a budget of 1. The constraint set is
    // unchanged, but rho1, rho2 and epsilon then mean the same thing whatever unit the energy is in.
    bool budget_units = true;

    void validate() const;
};

/// Multipliers for the per-layer sparsity constraints (y) and the energy constraint (z).
struct DualState {
    std::vector<double> y;
    double z = 0.0;
};

struct TraceRow {
    std::size_t iteration = 0;
    double loss = 0.0;
    double energy = 0.0;          // E_hat(s)
    double max_violation = 0.0;   // max_u [phi_u - s_u]_+
    double max_y = 0.0;
    double z = 0.0;
    std::vector<double> s;
    std::vector<std::size_t> phi;
};

class IterationLimitError : public Error {
public:
    IterationLimitError(std::size_t iterations, std::vector<TraceRow> trace)
        : Error(ErrorCode::IterationLimit,
                "constraints still violated after " + std::to_string(iterations) + " solver iterations"),
          trace_(std::move(trace)) {}
    const std::vector<TraceRow>& trace() const noexcept { return trace_; }

private:
    std::vector<TraceRow> trace_;
};

/// Source of training batches.
class DataStream {
public:
    virtual ~DataStream() = default;
    virtual std::pair<Batch, std::vector<int>> next() = 0;
};

class DatasetStream : public DataStream {
public:
    DatasetStream(const Dataset& ds, std::size_t batch_size, std::uint64_t seed)
        : ds_(ds), sampler_(ds.size(), batch_size, seed) {}
    std::pair<Batch, std::vector<int>> next() override {
        const auto idx = sampler_.next();
        return {ds_.batch(idx), ds_.batch_labels(idx)};
    }

private:
    const Dataset& ds_;
    BatchSampler sampler_;
};

double lagrangian_l1(std::span<const std::size_t> phi, std::span<const double> s, std::span<const double> y,
                     double rho1);
double lagrangian_l2(double energy_estimate, double z, double rho2, double budget);

/// Keep flags for one layer given its channel scores a_i = ||w_bar_{.,i,.,.}||_B^2. Channels are
/// ranked by descending score (ties by lower index); rank r survives iff
/// a > rho1*alpha*([r - s]_+^2 - [r - 1 - s]_+^2) + 2*alpha*y.
std::vector<bool> prox_keep_pattern(std::span<const double> scores, double s, double y, double alpha, double rho1);

/// Threshold that rank r (1-based) must exceed.
double prox_threshold(std::size_t rank, double s, double y, double alpha, double rho1);

/// Applies the proximal operator of alpha*L1 to one layer in place; returns the channel scores.
std::vector<double> prox_l1_layer(Tensor4& w_bar, const DiagPreconditioner& b, double s, double y, double alpha,
                                  double rho1);

/// Network-level proximal operator over all layers.
std::vector<Tensor4> prox_l1(std::vector<Tensor4> w_bar, std::span<const double> s, std::span<const double> y,
                             double alpha, double rho1, std::span<const DiagPreconditioner> b);

struct PrimalStepResult {
    double loss = 0.0;
    std::vector<std::vector<double>> scores;  // per-layer channel scores of the Adam candidate
};

/// Adam candidate W_bar = W - alpha * m_hat / B followed by the proximal operator with that B.
PrimalStepResult primal_w_step(Network& net, const Batch& batch, std::span<const int> labels,
                               std::span<const double> s, const DualState& duals, const SolverConfig& cfg,
                               AdamState& adam, const KnowledgeDistillation* kd = nullptr);

/// Clamped s-gradient: g_j = max(0, -rho1*[phi_j - s_j]_+ - y_j + (rho2*[E_hat - budget]_+ + z) * dE_hat/ds_j).
std::vector<double> sparsity_gradient(std::span<const std::size_t> phi, const SparsityVector& s,
                                      const DualState& duals, const BilinearEnergyModel& model,
                                      const SolverConfig& cfg);

/// s' = max(lower_bound, s - beta * g).
SparsityVector sparsity_step(const SparsityVector& s, std::span<const std::size_t> phi, const DualState& duals,
                             const BilinearEnergyModel& model, const SolverConfig& cfg, double beta,
                             std::span<const double> lower_bounds);

/// Largest y keeping the top floor(s) channels under the proximal rule, given descending-sortable scores.
double dual_y_cap(std::span<const double> scores, double s, double alpha);

/// Smallest z >= current making max_j g_j >= epsilon (only meaningful while over budget).
double dual_z_floor(std::span<const std::size_t> phi, const SparsityVector& s, const DualState& duals,
                    const BilinearEnergyModel& model, const SolverConfig& cfg);

/// Projected ascent y' = [y + rho1 (phi - s)]_+, z' = [z + rho2 (E_hat - budget)]_+, then the y cap
/// (when scores are given) and the z floor (when over budget).
DualState dual_step(std::span<const std::size_t> phi, const SparsityVector& s, const DualState& duals,
                    const BilinearEnergyModel& model, const SolverConfig& cfg,
                    const std::vector<std::vector<double>>* scores = nullptr);

/// Beta that closes the initial energy gap after beta_target_fraction * max_iterations steps,
/// assuming the gap stays constant while z integrates it.
double auto_beta(const BilinearEnergyModel& model, const SparsityVector& s0, const SolverConfig& cfg);

std::vector<double> resolve_lower_bounds(const Architecture& arch, const SolverConfig& cfg);

struct CompressResult {
    Network net;
    SparsityVector s;
    DualState duals;
    std::vector<TraceRow> trace;
    std::size_t iterations = 0;
    double beta = 0.0;
};

/// Alternates the proximal Adam step on W, the s descent step and the dual ascent step until
/// E_hat(s) <= budget and phi(w_u) <= s_u for every layer.
CompressResult compress(const Network& dense, const BilinearEnergyModel& model, const SolverConfig& cfg,
                        DataStream& data);

struct FinetuneConfig {
    std::size_t iterations = 500;
    AdamConfig adam;
    double kd_weight = 0.0;
    double kd_temperature = 4.0;
    bool cosine_decay = false;  // learning rate follows 0.5 * (1 + cos(pi * t / T))
};

/// Adam training with masked gradients; masked channels must already be zero and stay exactly zero.
/// `losses`, when given, receives the training loss of every iteration.
Network finetune(Network net, const ChannelMask& mask, DataStream& data, const FinetuneConfig& cfg,
                 const Network* teacher = nullptr, std::vector<double>* losses = nullptr);

std::string trace_header(std::size_t num_layers);
std::string trace_row(const TraceRow& row);
void write_trace(const std::string& path, const std::vector<TraceRow>& trace, std::size_t num_layers,
                 const std::string& meta_line = "");
std::vector<TraceRow> read_trace(const std::string& path);

}  // namespace ecc
