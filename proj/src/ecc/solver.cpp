#include "ecc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ecc/energy_io.hpp"

namespace ecc {

void SolverConfig::validate() const {
    if (!(adam.learning_rate > 0.0)) throw InvalidArgument("solver: alpha must be positive");
    if (!(rho1 > 0.0) || !(rho2 > 0.0)) throw InvalidArgument("solver: rho1 and rho2 must be positive");
    if (!(epsilon > 0.0)) throw InvalidArgument("solver: epsilon must be positive");
    if (!(beta_target_fraction > 0.0 && beta_target_fraction <= 1.0)) {
        throw InvalidArgument("solver: beta_target_fraction must lie in (0, 1]");
    }
    if (max_iterations == 0) throw InvalidArgument("solver: max_iterations must be positive");
    for (double lb : lower_bounds) {
        if (!(lb >= 1.0)) throw InvalidArgument("solver: lower bounds must be >= 1");
    }
    if (!(budget_joules > 0.0)) throw InvalidArgument("solver: energy budget must be positive");
}

double lagrangian_l1(std::span<const std::size_t> phi, std::span<const double> s, std::span<const double> y,
                     double rho1) {
    if (phi.size() != s.size() || y.size() != s.size()) throw ShapeError("lagrangian_l1: length mismatch");
    double total = 0.0;
    for (std::size_t u = 0; u < s.size(); ++u) {
        const double diff = static_cast<double>(phi[u]) - s[u];
        const double pos = std::max(diff, 0.0);
        total += 0.5 * rho1 * pos * pos + y[u] * diff;
    }
    return total;
}

double lagrangian_l2(double energy_estimate, double z, double rho2, double budget) {
    const double diff = energy_estimate - budget;
    const double pos = std::max(diff, 0.0);
    return 0.5 * rho2 * pos * pos + z * diff;
}

double prox_threshold(std::size_t rank, double s, double y, double alpha, double rho1) {
    const double r = static_cast<double>(rank);
    const double hi = std::max(r - s, 0.0);
    const double lo = std::max(r - 1.0 - s, 0.0);
    return rho1 * alpha * (hi * hi - lo * lo) + 2.0 * alpha * y;
}

namespace {

std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

double positive_part(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

std::vector<bool> prox_keep_pattern(std::span<const double> scores, double s, double y, double alpha, double rho1) {
    const auto order = descending_order(scores);
    std::vector<bool> keep(scores.size(), false);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::size_t i = order[pos];
        keep[i] = scores[i] > prox_threshold(pos + 1, s, y, alpha, rho1);
    }
    return keep;
}

std::vector<double> prox_l1_layer(Tensor4& w_bar, const DiagPreconditioner& b, double s, double y, double alpha,
                                  double rho1) {
    const std::size_t c = w_bar.shape().c;
    std::vector<double> scores(c);
    for (std::size_t i = 0; i < c; ++i) scores[i] = channel_slice_norm_sq(w_bar, i, b);
    const auto keep = prox_keep_pattern(scores, s, y, alpha, rho1);
    for (std::size_t i = 0; i < c; ++i) {
        if (!keep[i]) zero_channel_inplace(w_bar, i);
    }
    return scores;
}

std::vector<Tensor4> prox_l1(std::vector<Tensor4> w_bar, std::span<const double> s, std::span<const double> y,
                             double alpha, double rho1, std::span<const DiagPreconditioner> b) {
    if (s.size() != w_bar.size() || y.size() != w_bar.size() || b.size() != w_bar.size()) {
        throw ShapeError("prox_l1: layer count mismatch");
    }
    for (std::size_t u = 0; u < w_bar.size(); ++u) prox_l1_layer(w_bar[u], b[u], s[u], y[u], alpha, rho1);
    return w_bar;
}

PrimalStepResult primal_w_step(Network& net, const Batch& batch, std::span<const int> labels,
                               std::span<const double> s, const DualState& duals, const SolverConfig& cfg,
                               AdamState& adam, const KnowledgeDistillation* kd) {
    if (s.size() != net.num_layers() || duals.y.size() != net.num_layers()) {
        throw ShapeError("primal step: sparsity/dual length does not match network");
    }
    const auto lg = loss_and_grad(net, batch, labels, kd);
    adam.update_moments(lg.grads, cfg.adam);
    adam.apply_update(net, cfg.adam);

    PrimalStepResult result;
    result.loss = lg.loss;
    for (std::size_t u = 0; u < net.num_layers(); ++u) {
        const auto b = adam.preconditioner(u, cfg.adam);
        result.scores.push_back(
            prox_l1_layer(net.layers[u].weight, b, s[u], duals.y[u], cfg.adam.learning_rate, cfg.rho1));
    }
    return result;
}

std::vector<double> sparsity_gradient(std::span<const std::size_t> phi, const SparsityVector& s,
                                      const DualState& duals, const BilinearEnergyModel& model,
                                      const SolverConfig& cfg) {
    const std::size_t n = s.num_layers();
    if (phi.size() != n || duals.y.size() != n) throw ShapeError("sparsity gradient: length mismatch");
    const auto de = grad_s(model, s);
    const double energy_weight = cfg.rho2 * positive_part(eval(model, s) - cfg.budget_joules) + duals.z;
    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double raw = -cfg.rho1 * positive_part(static_cast<double>(phi[j]) - s.layers[j]) - duals.y[j] +
                           energy_weight * de[j];
        g[j] = positive_part(raw);
    }
    return g;
}

SparsityVector sparsity_step(const SparsityVector& s, std::span<const std::size_t> phi, const DualState& duals,
                             const BilinearEnergyModel& model, const SolverConfig& cfg, double beta,
                             std::span<const double> lower_bounds) {
    if (lower_bounds.size() != s.num_layers()) throw ShapeError("sparsity step: lower bound length mismatch");
    const auto g = sparsity_gradient(phi, s, duals, model, cfg);
    SparsityVector next = s;
    for (std::size_t j = 0; j < g.size(); ++j) {
        next.layers[j] = std::max(lower_bounds[j], s.layers[j] - beta * g[j]);
        // g >= 0 already guarantees this unless s started below its bound.
        next.layers[j] = std::min(next.layers[j], std::max(s.layers[j], lower_bounds[j]));
    }
    return next;
}

double dual_y_cap(std::span<const double> scores, double s, double alpha) {
    const auto keep = static_cast<std::size_t>(std::floor(s));
    if (keep == 0) return std::numeric_limits<double>::infinity();
    if (keep > scores.size()) return 0.0;
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double a_k = sorted[keep - 1];
    if (!(a_k > 0.0)) return 0.0;
    // Ranks up to floor(s) have zero quadratic threshold, so they survive iff a_(k) > 2*alpha*y.
    double cap = a_k / (2.0 * alpha);
    while (cap > 0.0 && !(a_k > 2.0 * alpha * cap)) cap = std::nextafter(cap, 0.0);
    return cap;
}

double dual_z_floor(std::span<const std::size_t> phi, const SparsityVector& s, const DualState& duals,
                    const BilinearEnergyModel& model, const SolverConfig& cfg) {
    const std::size_t n = s.num_layers();
    const auto de = grad_s(model, s);
    const double penalty = cfg.rho2 * positive_part(eval(model, s) - cfg.budget_joules);
    auto raw = [&](std::size_t j, double z) {
        return -cfg.rho1 * positive_part(static_cast<double>(phi[j]) - s.layers[j]) - duals.y[j] + (penalty + z) * de[j];
    };
    double best_raw = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) best_raw = std::max(best_raw, raw(j, duals.z));
    if (best_raw >= cfg.epsilon) return duals.z;

    double z_needed = std::numeric_limits<double>::infinity();
    std::size_t arg = n;
    for (std::size_t j = 0; j < n; ++j) {
        if (!(de[j] > 0.0)) continue;
        const double offset = raw(j, 0.0) - penalty * de[j];  // -rho1[phi-s]_+ - y
        const double zj = (cfg.epsilon - offset) / de[j] - penalty;
        if (zj < z_needed) {
            z_needed = zj;
            arg = j;
        }
    }
    if (arg == n) return duals.z;  // no layer can move the energy
    double z = std::max(duals.z, z_needed);
    while (raw(arg, z) < cfg.epsilon) z = std::nextafter(z, std::numeric_limits<double>::infinity()) * (1.0 + 1e-15);
    return z;
}

DualState dual_step(std::span<const std::size_t> phi, const SparsityVector& s, const DualState& duals,
                    const BilinearEnergyModel& model, const SolverConfig& cfg,
                    const std::vector<std::vector<double>>* scores) {
    const std::size_t n = s.num_layers();
    if (phi.size() != n || duals.y.size() != n) throw ShapeError("dual step: length mismatch");
    if (scores != nullptr && scores->size() != n) throw ShapeError("dual step: score layer count mismatch");
    DualState next;
    next.y.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        next.y[u] = positive_part(duals.y[u] + cfg.rho1 * (static_cast<double>(phi[u]) - s.layers[u]));
        if (scores != nullptr) next.y[u] = std::min(next.y[u], dual_y_cap((*scores)[u], s.layers[u], cfg.adam.learning_rate));
    }
    const double gap = eval(model, s) - cfg.budget_joules;
    next.z = positive_part(duals.z + cfg.rho2 * gap);
    if (gap > 0.0) {
        DualState probe{next.y, next.z};
        next.z = dual_z_floor(phi, s, probe, model, cfg);
    }
    return next;
}

double auto_beta(const BilinearEnergyModel& model, const SparsityVector& s0, const SolverConfig& cfg) {
    const auto de = grad_s(model, s0);
    const double norm_sq = std::inner_product(de.begin(), de.end(), de.begin(), 0.0);
    if (!(norm_sq > 0.0)) return 1.0;
    const double k = std::max(1.0, std::ceil(cfg.beta_target_fraction * static_cast<double>(cfg.max_iterations)));
    // Linearized, the gap G obeys G'' = -beta * rho2 * |dE|^2 * G, whose first zero is at
    // pi / (2 * omega). Pick omega so that it lands on iteration k.
    const double omega = std::numbers::pi / (2.0 * k);
    return omega * omega / (cfg.rho2 * norm_sq);
}

std::vector<double> resolve_lower_bounds(const Architecture& arch, const SolverConfig& cfg) {
    if (!cfg.lower_bounds.empty()) {
        if (cfg.lower_bounds.size() != arch.num_layers()) throw InvalidArgument("lower bound count does not match layers");
        for (std::size_t u = 0; u < arch.num_layers(); ++u) {
            if (cfg.lower_bounds[u] > static_cast<double>(arch.layers[u].c)) {
                throw InvalidArgument("lower bound exceeds channel count at layer " + std::to_string(u));
            }
        }
        return cfg.lower_bounds;
    }
    std::vector<double> lbs;
    for (const auto& l : arch.layers) {
        lbs.push_back(std::max(1.0, std::floor(cfg.lower_bound_fraction * static_cast<double>(l.c))));
    }
    return lbs;
}

namespace {

bool constraints_hold(const BilinearEnergyModel& model, const SparsityVector& s, std::span<const std::size_t> phi,
                      double budget) {
    if (eval(model, s) > budget) return false;
    for (std::size_t u = 0; u < phi.size(); ++u) {
        if (static_cast<double>(phi[u]) > s.layers[u]) return false;
    }
    return true;
}

TraceRow make_row(std::size_t iter, double loss, const BilinearEnergyModel& model, const SparsityVector& s,
                  const std::vector<std::size_t>& phi, const DualState& duals) {
    TraceRow row;
    row.iteration = iter;
    row.loss = loss;
    row.energy = eval(model, s);
    for (std::size_t u = 0; u < phi.size(); ++u) {
        row.max_violation = std::max(row.max_violation, static_cast<double>(phi[u]) - s.layers[u]);
    }
    row.max_y = duals.y.empty() ? 0.0 : *std::max_element(duals.y.begin(), duals.y.end());
    row.z = duals.z;
    row.s = s.layers;
    row.phi = phi;
    return row;
}

}  // namespace

CompressResult compress(const Network& dense, const BilinearEnergyModel& model, const SolverConfig& cfg,
                        DataStream& data) {
    cfg.validate();
    const auto arch = dense.architecture();
    if (model.num_layers() != dense.num_layers()) {
        throw ShapeError("energy model has " + std::to_string(model.num_layers()) + " layers, network has " +
                         std::to_string(dense.num_layers()));
    }
    const auto lbs = resolve_lower_bounds(arch, cfg);
    const double floor_energy = eval_at_lower_bounds(model, lbs, dense.n_out());
    if (cfg.budget_joules < floor_energy) throw InfeasibleBudgetError(cfg.budget_joules, floor_energy);

    BilinearEnergyModel inner_model = model;
    SolverConfig inner = cfg;
    if (cfg.budget_units) {
        inner_model.a0 /= cfg.budget_joules;
        for (double& a : inner_model.a) a /= cfg.budget_joules;
        inner.budget_joules = 1.0;
    }

    CompressResult result;
    result.net = dense;
    auto phi = network_sparsity(result.net, cfg.zero_tol);
    result.s = SparsityVector{{}, dense.n_out()};
    for (auto p : phi) result.s.layers.push_back(static_cast<double>(p));
    result.duals.y.assign(dense.num_layers(), 0.0);
    result.beta = cfg.beta > 0.0 ? cfg.beta : auto_beta(inner_model, result.s, inner);

    AdamState adam(result.net);
    const bool use_kd = cfg.kd_weight > 0.0;

    auto primal = [&](bool frozen) {
        auto [batch, labels] = data.next();
        KnowledgeDistillation kd;
        if (use_kd) kd = {forward(dense, batch), cfg.kd_weight, cfg.kd_temperature};
        auto step = primal_w_step(result.net, batch, labels, result.s.layers, result.duals, cfg, adam,
                                  use_kd ? &kd : nullptr);
        phi = network_sparsity(result.net, cfg.zero_tol);
        if (!frozen) {
            result.s = sparsity_step(result.s, phi, result.duals, inner_model, inner, result.beta, lbs);
            result.duals = dual_step(phi, result.s, result.duals, inner_model, inner, &step.scores);
        }
        return step.loss;
    };

    std::size_t iter = 0;
    while (!constraints_hold(model, result.s, phi, cfg.budget_joules)) {
        if (iter == cfg.max_iterations) throw IterationLimitError(iter, std::move(result.trace));
        ++iter;
        const double loss = primal(false);
        result.trace.push_back(make_row(iter, loss, model, result.s, phi, result.duals));
    }
    result.iterations = iter;

    for (std::size_t g = 0; g < cfg.grace_iterations; ++g) {
        const double loss = primal(true);
        result.trace.push_back(make_row(iter + g + 1, loss, model, result.s, phi, result.duals));
    }
    return result;
}

Network finetune(Network net, const ChannelMask& mask, DataStream& data, const FinetuneConfig& cfg,
                 const Network* teacher, std::vector<double>* losses) {
    if (mask.keep.size() != net.num_layers()) throw ShapeError("finetune: mask layer count mismatch");
    for (std::size_t u = 0; u < net.num_layers(); ++u) {
        if (mask.keep[u].size() != net.layers[u].spec.c) throw ShapeError("finetune: mask length mismatch");
        for (std::size_t i = 0; i < mask.keep[u].size(); ++i) {
            if (!mask.keep[u][i] && channel_slice_norm_sq(net.layers[u].weight, i) != 0.0) {
                throw InvalidArgument("finetune: mask excludes nonzero channel " + std::to_string(i) + " of layer " +
                                      std::to_string(u));
            }
        }
    }
    AdamState adam(net);
    const bool use_kd = teacher != nullptr && cfg.kd_weight > 0.0;
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
        auto [batch, labels] = data.next();
        KnowledgeDistillation kd;
        if (use_kd) kd = {forward(*teacher, batch), cfg.kd_weight, cfg.kd_temperature};
        auto lg = loss_and_grad(net, batch, labels, use_kd ? &kd : nullptr, &mask);
        if (losses != nullptr) losses->push_back(lg.loss);
        AdamConfig step_cfg = cfg.adam;
        if (cfg.cosine_decay) {
            step_cfg.learning_rate *=
                0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.iterations)));
        }
        adam_step(net, adam, lg.grads, step_cfg);
        apply_mask_inplace(net, mask);
    }
    return net;
}

std::string trace_header(std::size_t num_layers) {
    std::string h = "iter\tloss\tenergy\tmax_violation\tmax_y\tz";
    for (std::size_t u = 0; u < num_layers; ++u) h += "\ts" + std::to_string(u + 1);
    for (std::size_t u = 0; u < num_layers; ++u) h += "\tphi" + std::to_string(u + 1);
    return h + "\n";
}

std::string trace_row(const TraceRow& row) {
    std::string out = std::to_string(row.iteration) + "\t" + format_real(row.loss) + "\t" + format_real(row.energy) +
                      "\t" + format_real(row.max_violation) + "\t" + format_real(row.max_y) + "\t" + format_real(row.z);
    for (double v : row.s) out += "\t" + format_real(v);
    for (auto p : row.phi) out += "\t" + std::to_string(p);
    return out + "\n";
}

void write_trace(const std::string& path, const std::vector<TraceRow>& trace, std::size_t num_layers,
                 const std::string& meta_line) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace '" + path + "'");
    out << "# ecc-trace format_version=1";
    if (!meta_line.empty()) out << " " << meta_line;
    out << "\n" << trace_header(num_layers);
    for (const auto& row : trace) out << trace_row(row);
}

std::vector<TraceRow> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ecc-trace", 0) != 0) throw IoError("'" + path + "' is not a trace");
    if (!std::getline(in, line)) throw IoError("'" + path + "': missing header");
    std::size_t columns = 0;
    {
        std::istringstream h(line);
        std::string tok;
        while (h >> tok) ++columns;
    }
    if (columns < 6 || (columns - 6) % 2 != 0) throw IoError("'" + path + "': bad trace header");
    const std::size_t layers = (columns - 6) / 2;
    std::vector<TraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream r(line);
        TraceRow row;
        std::string loss;
        r >> row.iteration >> loss >> row.energy >> row.max_violation >> row.max_y >> row.z;
        row.loss = std::strtod(loss.c_str(), nullptr);
        row.s.resize(layers);
        row.phi.resize(layers);
        for (auto& v : row.s) r >> v;
        for (auto& p : row.phi) r >> p;
        if (!r) throw IoError("'" + path + "': malformed trace row");
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ecc
