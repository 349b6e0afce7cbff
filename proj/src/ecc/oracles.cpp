#include "ecc/oracles.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "ecc/errors.hpp"
#include "ecc/solver.hpp"

namespace ecc {

double prox_objective(const ProxInstance& inst, const Tensor4& w) {
    if (!(w.shape() == inst.w_bar.shape()) || !(inst.b.shape() == inst.w_bar.shape())) {
        throw ShapeError("prox objective: shape mismatch");
    }
    const auto wd = w.data();
    const auto wb = inst.w_bar.data();
    const auto bd = inst.b.data();
    double dist = 0.0;
    for (std::size_t e = 0; e < wd.size(); ++e) dist += bd[e] * (wd[e] - wb[e]) * (wd[e] - wb[e]);
    const double phi = static_cast<double>(layer_sparsity(w));
    const double over = std::max(phi - inst.s, 0.0);
    const double l1 = 0.5 * inst.rho1 * over * over + inst.y * (phi - inst.s);
    return 0.5 * dist + inst.alpha * l1;
}

BruteForceProxResult brute_force_prox(const ProxInstance& inst) {
    const std::size_t c = inst.w_bar.shape().c;
    if (c > kMaxBruteForceChannels) {
        throw InvalidArgument("brute-force prox supports at most " + std::to_string(kMaxBruteForceChannels) +
                              " channels, instance has " + std::to_string(c));
    }
    BruteForceProxResult best;
    bool have = false;
    int best_kept = 0;
    const std::uint32_t patterns = 1u << c;
    for (std::uint32_t mask = 0; mask < patterns; ++mask) {
        Tensor4 w = inst.w_bar;
        for (std::size_t i = 0; i < c; ++i) {
            if (!(mask & (1u << i))) zero_channel_inplace(w, i);
        }
        const double obj = prox_objective(inst, w);
        const int kept = std::popcount(mask);
        const double tol = 1e-12 * std::max(1.0, std::abs(best.objective));
        bool take = !have || obj < best.objective - tol;
        if (have && !take && std::abs(obj - best.objective) <= tol && kept < best_kept) take = true;
        if (take) {
            have = true;
            best.objective = obj;
            best.w = std::move(w);
            best_kept = kept;
            best.keep.assign(c, false);
            for (std::size_t i = 0; i < c; ++i) best.keep[i] = (mask >> i) & 1u;
        }
    }
    return best;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
    if (!(h > 0.0)) throw InvalidArgument("finite difference step must be positive");
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double orig = point[j];
        point[j] = orig + h;
        const double up = f(point);
        point[j] = orig - h;
        const double down = f(point);
        point[j] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NonFiniteError(j, "function value is not finite during finite differencing");
        }
        g[j] = (up - down) / (2.0 * h);
    }
    return g;
}

ProxInstance random_prox_instance(std::uint64_t seed, std::size_t c, double alpha, double y, double s) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Shape4 shape{2, c, 2, 2};
    ProxInstance inst;
    inst.w_bar = Tensor4(shape);
    inst.b = Tensor4(shape);
    for (std::size_t i = 0; i < c; ++i) {
        const double scale = std::pow(10.0, -1.5 + 2.0 * unit(rng));
        for (std::size_t o = 0; o < shape.d; ++o) {
            for (std::size_t h = 0; h < shape.rh; ++h) {
                for (std::size_t w = 0; w < shape.rw; ++w) {
                    inst.w_bar.at(o, i, h, w) = scale * gauss(rng);
                    inst.b.at(o, i, h, w) = 0.1 + 1.9 * unit(rng);
                }
            }
        }
    }
    inst.s = s;
    inst.y = y;
    inst.alpha = alpha;
    inst.rho1 = 1.0;
    return inst;
}

VerifyCase verify_prox(const std::string& name, const ProxInstance& inst, const VerifyOptions& opts) {
    VerifyCase vc;
    vc.name = name;
    const auto oracle = brute_force_prox(inst);

    Tensor4 w = inst.w_bar;
    const DiagPreconditioner b(inst.b, std::numeric_limits<double>::min());
    // A threshold perturbation t is the same as raising y by t / (2 alpha).
    const double y = inst.y + opts.threshold_perturbation / (2.0 * inst.alpha);
    prox_l1_layer(w, b, inst.s, y, inst.alpha, inst.rho1);

    const double obj = prox_objective(inst, w);
    vc.gap = obj - oracle.objective;
    const bool same_pattern = w == oracle.w;
    vc.passed = same_pattern && std::abs(vc.gap) <= opts.objective_tolerance;
    std::string pattern;
    for (bool k : oracle.keep) pattern += k ? '1' : '0';
    vc.detail = "c=" + std::to_string(inst.w_bar.shape().c) + " oracle_pattern=" + pattern +
                (same_pattern ? "" : " pattern_mismatch");
    return vc;
}

VerifyCase verify_energy_gradient(const std::string& name, const BilinearEnergyModel& model, const SparsityVector& s,
                                  double h, const VerifyOptions& opts) {
    VerifyCase vc;
    vc.name = name;
    const auto analytic = grad_s(model, s);
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
            return eval(model, SparsityVector{std::vector<double>(x.begin(), x.end()), s.n_out});
        },
        s.layers, h);
    double worst = 0.0;
    for (std::size_t j = 0; j < analytic.size(); ++j) {
        worst = std::max(worst, std::abs(analytic[j] - numeric[j]) / std::max(1.0, std::abs(analytic[j])));
    }
    vc.gap = worst;
    vc.passed = worst <= opts.gradient_tolerance;
    vc.detail = "layers=" + std::to_string(analytic.size());
    return vc;
}

namespace {

ProxInstance prox_from_json(const nlohmann::json& j) {
    const auto dims = j.at("shape").get<std::vector<std::size_t>>();
    if (dims.size() != 4) throw InvalidArgument("prox instance shape must have four entries");
    const Shape4 shape{dims[0], dims[1], dims[2], dims[3]};
    ProxInstance inst;
    inst.w_bar = Tensor4(shape, j.at("w_bar").get<std::vector<double>>());
    inst.b = j.contains("b") ? Tensor4(shape, j.at("b").get<std::vector<double>>()) : Tensor4(shape, 1.0);
    inst.s = j.at("s").get<double>();
    inst.y = j.value("y", 0.0);
    inst.alpha = j.at("alpha").get<double>();
    inst.rho1 = j.value("rho1", 1.0);
    return inst;
}

}  // namespace

std::vector<VerifyCase> verify_instances(const nlohmann::json& doc, const VerifyOptions& opts) {
    std::vector<VerifyCase> cases;
    try {
        if (doc.contains("prox")) {
            for (const auto& j : doc.at("prox")) {
                const auto inst = prox_from_json(j);
                if (inst.w_bar.shape().c > kMaxBruteForceChannels) {
                    throw InvalidArgument("instance '" + j.value("name", std::string("?")) + "' has too many channels (" +
                                          std::to_string(inst.w_bar.shape().c) + " > " +
                                          std::to_string(kMaxBruteForceChannels) + ")");
                }
                cases.push_back(verify_prox(j.value("name", "prox" + std::to_string(cases.size())), inst, opts));
            }
        }
        if (doc.contains("energy")) {
            for (const auto& j : doc.at("energy")) {
                BilinearEnergyModel m{j.at("a0").get<double>(), j.at("a").get<std::vector<double>>()};
                SparsityVector s{j.at("s").get<std::vector<double>>(), j.at("n_out").get<std::size_t>()};
                cases.push_back(verify_energy_gradient(j.value("name", "energy" + std::to_string(cases.size())), m, s,
                                                       j.value("h", 1e-3), opts));
            }
        }
        if (doc.contains("random")) {
            const auto& r = doc.at("random");
            const auto count = r.value("count", std::size_t{100});
            const auto seed = r.value("seed", std::uint64_t{1});
            const auto max_c = r.value("max_channels", std::size_t{10});
            if (max_c > kMaxBruteForceChannels || max_c == 0) throw InvalidArgument("random.max_channels out of range");
            std::mt19937_64 rng(seed);
            const double alphas[] = {1e-3, 1e-1, 1.0};
            const double ys[] = {0.0, 0.5, 5.0};
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t c = 1 + rng() % max_c;
                const double alpha = alphas[rng() % 3];
                const double y = ys[rng() % 3];
                const double s = static_cast<double>(1 + rng() % c);
                cases.push_back(verify_prox("random_prox_" + std::to_string(k),
                                            random_prox_instance(rng(), c, alpha, y, s), opts));

                std::uniform_real_distribution<double> unit(0.0, 1.0);
                const std::size_t layers = 1 + rng() % 6;
                BilinearEnergyModel m{unit(rng), {}};
                SparsityVector sv{{}, 1 + rng() % 16};
                for (std::size_t u = 0; u < layers; ++u) {
                    m.a.push_back(unit(rng) * 1e-2);
                    sv.layers.push_back(1.0 + unit(rng) * 63.0);
                }
                cases.push_back(verify_energy_gradient("random_energy_" + std::to_string(k), m, sv, 1e-3, opts));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed verify instance: ") + e.what());
    }
    return cases;
}

std::vector<VerifyCase> verify_file(const std::string& path, const VerifyOptions& opts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open instance file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("'" + path + "': " + e.what());
    }
    return verify_instances(doc, opts);
}

}  // namespace ecc
