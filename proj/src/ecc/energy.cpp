#include "ecc/energy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ecc/hash.hpp"

namespace ecc {

namespace {

void check_length(const BilinearEnergyModel& model, const SparsityVector& s) {
    if (s.num_layers() != model.num_layers()) {
        throw ShapeError("sparsity vector has " + std::to_string(s.num_layers()) + " layers, energy model expects " +
                         std::to_string(model.num_layers()));
    }
}

}  // namespace

double eval(const BilinearEnergyModel& model, const SparsityVector& s) {
    check_length(model, s);
    double e = model.a0;
    for (std::size_t j = 0; j < model.a.size(); ++j) e += model.a[j] * s.component(j) * s.component(j + 1);
    return e;
}

std::vector<double> grad_s(const BilinearEnergyModel& model, const SparsityVector& s) {
    check_length(model, s);
    const std::size_t n = model.a.size();
    std::vector<double> g(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        g[j] = model.a[j] * s.component(j + 1);
        if (j > 0) g[j] += model.a[j - 1] * s.component(j - 1);
    }
    return g;
}

double eval_at_lower_bounds(const BilinearEnergyModel& model, const std::vector<double>& lower_bounds,
                            std::size_t n_out) {
    return eval(model, SparsityVector{lower_bounds, n_out});
}

OracleError OracleError::with_sample(const SparsityVector& s, std::size_t index) const {
    std::string msg = std::string(what()) + " (sample " + std::to_string(index) + ", s = [";
    for (std::size_t j = 0; j < s.layers.size(); ++j) {
        if (j) msg += ", ";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", s.layers[j]);
        msg += buf;
    }
    msg += "])";
    OracleError e(kind_, msg, exit_code_);
    e.sample_ = s;
    e.index_ = index;
    return e;
}

std::vector<SparsityVector> sample_sparsities(const Architecture& arch, std::size_t n, std::uint64_t seed) {
    arch.validate();
    std::mt19937_64 rng(seed);
    std::vector<std::uniform_int_distribution<std::size_t>> dists;
    for (const auto& l : arch.layers) dists.emplace_back(1, l.c);
    std::vector<SparsityVector> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        SparsityVector s{{}, arch.n_out()};
        for (auto& d : dists) s.layers.push_back(static_cast<double>(d(rng)));
        out.push_back(std::move(s));
    }
    return out;
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t sample_index, std::size_t trial) {
    return hash_combine(hash_combine(base_seed, sample_index), trial);
}

std::vector<EnergySample> collect(EnergyOracle& oracle, const std::vector<SparsityVector>& samples,
                                  std::size_t trials, std::uint64_t base_seed, std::size_t first,
                                  const SampleCallback& on_sample) {
    if (trials == 0) throw InvalidArgument("trials per sample must be at least 1");
    std::vector<EnergySample> out;
    for (std::size_t k = first; k < samples.size(); ++k) {
        std::vector<double> values;
        values.reserve(trials);
        for (std::size_t t = 0; t < trials; ++t) {
            double v = 0.0;
            try {
                v = oracle.measure(samples[k], trial_seed(base_seed, k, t));
            } catch (const OracleError& e) {
                throw e.with_sample(samples[k], k);
            } catch (const std::exception& e) {
                throw OracleError(OracleError::Kind::Failure, e.what()).with_sample(samples[k], k);
            }
            if (!std::isfinite(v) || v <= 0.0) {
                throw OracleError(OracleError::Kind::Unparseable, "oracle returned non-positive energy " +
                                                                      std::to_string(v))
                    .with_sample(samples[k], k);
            }
            values.push_back(v);
        }
        EnergySample es{samples[k], 0.0, trials, 0.0};
        es.energy = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(trials);
        if (trials > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - es.energy) * (v - es.energy);
            es.stdev = std::sqrt(ss / static_cast<double>(trials - 1));
        }
        if (on_sample) on_sample(k, es);
        out.push_back(std::move(es));
    }
    return out;
}

std::string to_string(CostMode mode) {
    switch (mode) {
        case CostMode::Bilinear: return "bilinear";
        case CostMode::Saturating: return "saturating";
        case CostMode::Overhead: return "overhead";
    }
    return "bilinear";
}

CostMode parse_cost_mode(const std::string& s) {
    if (s == "bilinear") return CostMode::Bilinear;
    if (s == "saturating") return CostMode::Saturating;
    if (s == "overhead") return CostMode::Overhead;
    throw InvalidArgument("unknown simulated cost mode '" + s + "'");
}

SimulatedDevice::SimulatedDevice(const Architecture& arch, SimulatedDeviceConfig cfg) : arch_(arch), cfg_(cfg) {
    arch_.validate();
    if (cfg_.noise_sigma < 0.0) throw InvalidArgument("noise sigma must be nonnegative");
    truth_.a0 = cfg_.static_joules;
    const auto spatial = arch_.input_spatial();
    for (std::size_t u = 0; u < arch_.num_layers(); ++u) {
        const auto& l = arch_.layers[u];
        double macs_per_pair = 1.0;
        if (l.kind == LayerKind::Convolution) {
            const auto [h, w] = spatial[u];
            const std::size_t ho = (h + 2 * l.padding - l.rh) / l.stride + 1;
            const std::size_t wo = (w + 2 * l.padding - l.rw) / l.stride + 1;
            macs_per_pair = static_cast<double>(l.rh * l.rw * ho * wo);
        }
        truth_.a.push_back(cfg_.joules_per_mac * macs_per_pair);
        max_pairs_.push_back(static_cast<double>(l.c) * static_cast<double>(l.d));
    }
}

double SimulatedDevice::ground_truth_energy(const SparsityVector& s) const {
    if (s.num_layers() != arch_.num_layers()) throw ShapeError("sparsity vector length does not match device");
    switch (cfg_.mode) {
        case CostMode::Bilinear: return eval(truth_, s);
        case CostMode::Overhead:
            return eval(truth_, s) + cfg_.layer_overhead * static_cast<double>(arch_.num_layers());
        case CostMode::Saturating: {
            // Monotone in each pair count, concave, equal to the bilinear cost at full width.
            double e = truth_.a0;
            const double g = cfg_.saturation;
            for (std::size_t j = 0; j < truth_.a.size(); ++j) {
                const double pairs = s.component(j) * s.component(j + 1);
                e += truth_.a[j] * pairs * (1.0 + g) / (1.0 + g * pairs / max_pairs_[j]);
            }
            return e;
        }
    }
    return eval(truth_, s);
}

double SimulatedDevice::measure(const SparsityVector& s, std::uint64_t trial_seed) {
    const double e = ground_truth_energy(s);
    if (cfg_.noise_sigma == 0.0) return e;
    std::uint64_t seed = hash_combine(cfg_.seed, trial_seed);
    for (double v : s.layers) seed = hash_combine(seed, std::bit_cast<std::uint64_t>(v));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double factor = std::max(1.0 + cfg_.noise_sigma * gauss(rng), 1e-6);
    return e * factor;
}

double relative_test_error(const BilinearEnergyModel& model, const std::vector<EnergySample>& testset) {
    if (testset.empty()) throw InvalidArgument("relative error of an empty test set");
    double acc = 0.0;
    for (const auto& sample : testset) {
        if (!(sample.energy > 0.0)) throw InvalidArgument("measured energy must be positive");
        acc += std::abs(eval(model, sample.s) - sample.energy) / sample.energy;
    }
    return acc / static_cast<double>(testset.size());
}

std::pair<std::vector<EnergySample>, std::vector<EnergySample>> split(const std::vector<EnergySample>& samples,
                                                                      double test_fraction, std::uint64_t seed) {
    if (samples.size() < 2) throw InvalidArgument("need at least two samples to split");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test fraction must lie in (0, 1)");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, samples.size() - 1);
    std::pair<std::vector<EnergySample>, std::vector<EnergySample>> out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        (k < order.size() - n_test ? out.first : out.second).push_back(samples[order[k]]);
    }
    return out;
}

FitResult fit(const std::vector<EnergySample>& train, const EnergyFitConfig& cfg,
              const std::vector<EnergySample>* test) {
    if (train.empty()) throw InvalidArgument("cannot fit an energy model to an empty training set");
    if (train.size() < 2) throw InvalidArgument("energy fitting needs at least two samples");
    const std::size_t layers = train.front().s.num_layers();
    bool varied = false;
    for (const auto& sample : train) {
        if (sample.s.num_layers() != layers) throw ShapeError("training samples disagree on layer count");
        if (!(sample.energy > 0.0)) throw InvalidArgument("training energies must be positive");
        if (!(sample.s == train.front().s)) varied = true;
    }
    if (!varied) throw InvalidArgument("degenerate profile: every sample has the same sparsity vector");

    const std::size_t n = train.size();
    const std::size_t p = layers + 1;
    FitResult result;
    result.feature_scale.assign(layers, 0.0);
    result.energy_scale = 0.0;
    for (const auto& sample : train) {
        for (std::size_t j = 0; j < layers; ++j) result.feature_scale[j] += sample.s.component(j) * sample.s.component(j + 1);
        result.energy_scale += sample.energy;
    }
    for (double& f : result.feature_scale) f /= static_cast<double>(n);
    result.energy_scale /= static_cast<double>(n);

    // Design matrix in standardized coordinates, row-major (n, p) with a leading intercept column.
    std::vector<double> x(n * p), y(n);
    for (std::size_t r = 0; r < n; ++r) {
        x[r * p] = 1.0;
        for (std::size_t j = 0; j < layers; ++j) {
            x[r * p + j + 1] = train[r].s.component(j) * train[r].s.component(j + 1) / result.feature_scale[j];
        }
        y[r] = train[r].energy / result.energy_scale;
    }

    auto to_model = [&](const std::vector<double>& b) {
        BilinearEnergyModel m;
        m.a0 = b[0] * result.energy_scale;
        for (std::size_t j = 0; j < layers; ++j) m.a.push_back(b[j + 1] * result.energy_scale / result.feature_scale[j]);
        return m;
    };

    std::vector<double> b(p, 0.0), m(p, 0.0), v(p, 0.0), g(p), resid(n);
    b[0] = 1.0;  // mean energy
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        double mse = 0.0;
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            double pred = 0.0;
            for (std::size_t j = 0; j < p; ++j) pred += x[r * p + j] * b[j];
            const double e = pred - y[r];
            mse += e * e;
            for (std::size_t j = 0; j < p; ++j) g[j] += 2.0 * e * x[r * p + j];
        }
        for (std::size_t j = 0; j < p; ++j) g[j] *= inv_n;
        for (std::size_t j = 1; j < p; ++j) g[j] += cfg.weight_decay * b[j];

        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(it));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(it));
        for (std::size_t j = 0; j < p; ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            b[j] -= cfg.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.epsilon);
            b[j] = std::max(b[j], 0.0);
        }

        const bool log_now = it == cfg.iterations || (cfg.log_every > 0 && it % cfg.log_every == 0) || it == 1;
        if (log_now) {
            const auto model = to_model(b);
            FitLogRow row;
            row.iteration = it;
            row.train_mse = mse * inv_n * result.energy_scale * result.energy_scale;
            row.train_error = relative_test_error(model, train);
            row.test_error = test != nullptr && !test->empty() ? relative_test_error(model, *test)
                                                               : std::numeric_limits<double>::quiet_NaN();
            result.log.push_back(row);
        }
    }
    result.model = to_model(b);
    result.train_error = relative_test_error(result.model, train);
    result.test_error = test != nullptr && !test->empty() ? relative_test_error(result.model, *test)
                                                          : std::numeric_limits<double>::quiet_NaN();
    return result;
}

}  // namespace ecc
