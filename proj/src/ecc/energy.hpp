#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ecc/errors.hpp"
#include "ecc/network.hpp"
#include "ecc/sparsity_vector.hpp"

namespace ecc {

/// E_hat(s) = a0 + sum_j a_j * s_j * s_{j+1}, with s_{|U|+1} = n_out. Coefficients are joules
/// (a0) and joules per channel pair (a_j), all nonnegative.
struct BilinearEnergyModel {
    double a0 = 0.0;
    std::vector<double> a;

    std::size_t num_layers() const { return a.size(); }
    bool operator==(const BilinearEnergyModel&) const = default;
};

double eval(const BilinearEnergyModel& model, const SparsityVector& s);

/// dE_hat/ds_j for the |U| layer components; s_{|U|+1} is fixed and has no component.
std::vector<double> grad_s(const BilinearEnergyModel& model, const SparsityVector& s);

/// Model value at the per-layer lower bounds (the smallest achievable estimate).
double eval_at_lower_bounds(const BilinearEnergyModel& model, const std::vector<double>& lower_bounds,
                            std::size_t n_out);

struct EnergySample {
    SparsityVector s;
    double energy = 0.0;
    std::size_t trials = 1;
    double stdev = 0.0;

    bool operator==(const EnergySample&) const = default;
};

class OracleError : public Error {
public:
    enum class Kind { Failure, NonzeroExit, Unparseable, Timeout };

    OracleError(Kind kind, const std::string& what, int exit_code = 0)
        : Error(ErrorCode::Oracle, what), kind_(kind), exit_code_(exit_code) {}

    Kind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return exit_code_; }
    const std::optional<SparsityVector>& sample() const noexcept { return sample_; }
    std::optional<std::size_t> sample_index() const noexcept { return index_; }

    OracleError with_sample(const SparsityVector& s, std::size_t index) const;

private:
    Kind kind_;
    int exit_code_;
    std::optional<SparsityVector> sample_;
    std::optional<std::size_t> index_;
};

/// Blackbox that returns joules for a network built at sparsity s. trial_seed identifies the
/// repetition so simulated noise is reproducible.
class EnergyOracle {
public:
    virtual ~EnergyOracle() = default;
    virtual double measure(const SparsityVector& s, std::uint64_t trial_seed) = 0;
    /// Relative noise level the oracle advertises (0 when unknown or noise-free).
    virtual double noise_level() const { return 0.0; }
};

/// Integers drawn uniformly from {1, ..., c_u} per layer.
std::vector<SparsityVector> sample_sparsities(const Architecture& arch, std::size_t n, std::uint64_t seed);

/// Deterministic per-trial seed derived from a base seed, sample index and trial number.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t sample_index, std::size_t trial);

using SampleCallback = std::function<void(std::size_t index, const EnergySample&)>;

/// Measures samples[first..] with `trials` repetitions each; energy is the trial mean and stdev
/// the sample standard deviation. on_sample fires after each completed sample.
std::vector<EnergySample> collect(EnergyOracle& oracle, const std::vector<SparsityVector>& samples,
                                  std::size_t trials, std::uint64_t base_seed, std::size_t first = 0,
                                  const SampleCallback& on_sample = {});

enum class CostMode { Bilinear, Saturating, Overhead };
std::string to_string(CostMode mode);
CostMode parse_cost_mode(const std::string& s);

struct SimulatedDeviceConfig {
    CostMode mode = CostMode::Bilinear;
    double noise_sigma = 0.0;       // multiplicative Gaussian, relative
    double static_joules = 0.05;    // a0 of the hidden model
    double joules_per_mac = 1e-5;
    double saturation = 0.5;        // Saturating mode strength
    double layer_overhead = 0.01;   // Overhead mode, joules per layer
    std::uint64_t seed = 0;
};

/// Stand-in for a real device. Its hidden model charges joules_per_mac for each multiply-accumulate
/// of a channel pair: rh*rw*H_out*W_out for convolutions, 1 for fully-connected layers.
class SimulatedDevice : public EnergyOracle {
public:
    SimulatedDevice(const Architecture& arch, SimulatedDeviceConfig cfg);

    double measure(const SparsityVector& s, std::uint64_t trial_seed) override;
    double noise_level() const override { return cfg_.noise_sigma; }

    /// Noise-free cost.
    double ground_truth_energy(const SparsityVector& s) const;
    const BilinearEnergyModel& ground_truth() const { return truth_; }
    const SimulatedDeviceConfig& config() const { return cfg_; }

private:
    Architecture arch_;
    SimulatedDeviceConfig cfg_;
    BilinearEnergyModel truth_;
    std::vector<double> max_pairs_;
};

struct EnergyFitConfig {
    std::size_t iterations = 10000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // coupled L2 on standardized non-intercept coefficients
    std::size_t log_every = 100;
    std::uint64_t seed = 0;
};

struct FitLogRow {
    std::size_t iteration = 0;
    double train_mse = 0.0;
    double train_error = 0.0;
    double test_error = 0.0;  // NaN without a test set
};

struct FitResult {
    BilinearEnergyModel model;
    std::vector<double> feature_scale;  // training-set mean of s_j * s_{j+1}
    double energy_scale = 1.0;          // training-set mean energy
    std::vector<FitLogRow> log;
    double train_error = 0.0;
    double test_error = 0.0;
};

/// Full-batch Adam on the squared error in standardized coordinates (features divided by their
/// training mean, energies by the mean energy), coefficients clamped at zero after every step.
FitResult fit(const std::vector<EnergySample>& train, const EnergyFitConfig& cfg,
              const std::vector<EnergySample>* test = nullptr);

/// Mean of |E_hat(s) - E(s)| / E(s).
double relative_test_error(const BilinearEnergyModel& model, const std::vector<EnergySample>& testset);

/// Seeded shuffle, then the last round(n * test_fraction) samples (at least one) form the test set.
std::pair<std::vector<EnergySample>, std::vector<EnergySample>> split(const std::vector<EnergySample>& samples,
                                                                      double test_fraction, std::uint64_t seed);

}  // namespace ecc
