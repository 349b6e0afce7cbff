#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "ecc/energy.hpp"
#include "ecc/network.hpp"

namespace ecc::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "tmp") {
        static std::uint64_t counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ecc_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline LayerSpec conv(std::size_t d, std::size_t c, std::size_t k, std::size_t stride, std::size_t pad,
                      Activation act = Activation::Relu) {
    LayerSpec l;
    l.kind = LayerKind::Convolution;
    l.d = d;
    l.c = c;
    l.rh = l.rw = k;
    l.stride = stride;
    l.padding = pad;
    l.activation = act;
    return l;
}

inline LayerSpec fc(std::size_t d, std::size_t c, Activation act = Activation::Relu) {
    LayerSpec l;
    l.kind = LayerKind::FullyConnected;
    l.d = d;
    l.c = c;
    l.activation = act;
    return l;
}

inline Batch random_batch(const InputShape& shape, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Batch b{n, shape, std::vector<double>(n * shape.volume())};
    for (auto& v : b.data) v = g(rng);
    return b;
}

inline void randomize(Network& net, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& l : net.layers) {
        for (auto& v : l.weight.data()) v = g(rng);
        for (auto& v : l.bias) v = g(rng);
    }
}

// Straightforward per-sample loops, written without reference to the library's forward pass.
inline std::vector<double> naive_forward(const Network& net, const std::vector<double>& x0, InputShape shape) {
    std::vector<double> x = x0;
    std::size_t c = shape.c, h = shape.h, w = shape.w;
    bool spatial = true;
    for (const auto& layer : net.layers) {
        const auto& s = layer.spec;
        std::vector<double> y;
        if (s.kind == LayerKind::Convolution) {
            const std::size_t ho = (h + 2 * s.padding - s.rh) / s.stride + 1;
            const std::size_t wo = (w + 2 * s.padding - s.rw) / s.stride + 1;
            y.assign(s.d * ho * wo, 0.0);
            for (std::size_t o = 0; o < s.d; ++o)
                for (std::size_t i = 0; i < ho; ++i)
                    for (std::size_t j = 0; j < wo; ++j) {
                        double acc = layer.bias[o];
                        for (std::size_t ci = 0; ci < c; ++ci)
                            for (std::size_t a = 0; a < s.rh; ++a)
                                for (std::size_t b = 0; b < s.rw; ++b) {
                                    const long r = static_cast<long>(i * s.stride + a) - static_cast<long>(s.padding);
                                    const long q = static_cast<long>(j * s.stride + b) - static_cast<long>(s.padding);
                                    if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(w)) continue;
                                    acc += layer.weight.at(o, ci, a, b) * x[(ci * h + r) * w + q];
                                }
                        y[(o * ho + i) * wo + j] = acc;
                    }
            c = s.d;
            h = ho;
            w = wo;
        } else {
            if (spatial && h * w > 1) {  // average over space first
                std::vector<double> pooled(c, 0.0);
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t p = 0; p < h * w; ++p) pooled[ci] += x[ci * h * w + p];
                    pooled[ci] /= static_cast<double>(h * w);
                }
                x = pooled;
            }
            spatial = false;
            h = w = 1;
            y.assign(s.d, 0.0);
            for (std::size_t o = 0; o < s.d; ++o) {
                double acc = layer.bias[o];
                for (std::size_t ci = 0; ci < c; ++ci) acc += layer.weight.at(o, ci, 0, 0) * x[ci];
                y[o] = acc;
            }
            c = s.d;
        }
        if (s.activation == Activation::Relu)
            for (auto& v : y) v = std::max(v, 0.0);
        x = std::move(y);
    }
    return x;
}

// Dense linear solve with partial pivoting; returns false when singular.
inline bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t k = r + 1; k < n; ++k) acc -= a[r][k] * x[k];
        x[r] = acc / a[r][r];
    }
    return true;
}

// Nonnegative least squares by exhaustive active-set enumeration: every support subset is solved
// unconstrained, infeasible ones are discarded, and the smallest residual wins. Fine for <= 8
// coefficients. Columns are [1, s1*s2, s2*s3, ...]; the result is (a0, a1, ...).
inline std::vector<double> nnls_bilinear(const std::vector<EnergySample>& samples) {
    const std::size_t u = samples.front().s.num_layers();
    const std::size_t p = u + 1;
    std::vector<std::vector<double>> rows;
    std::vector<double> target;
    for (const auto& smp : samples) {
        std::vector<double> r{1.0};
        for (std::size_t j = 0; j < u; ++j) r.push_back(smp.s.component(j) * smp.s.component(j + 1));
        rows.push_back(r);
        target.push_back(smp.energy);
    }
    // Column scaling keeps the normal equations well conditioned.
    std::vector<double> scale(p, 0.0);
    for (const auto& r : rows)
        for (std::size_t k = 0; k < p; ++k) scale[k] += r[k] / static_cast<double>(rows.size());

    std::vector<double> best(p, 0.0);
    double best_rss = INFINITY;
    for (std::uint32_t mask = 1; mask < (1u << p); ++mask) {
        std::vector<std::size_t> cols;
        for (std::size_t k = 0; k < p; ++k)
            if (mask & (1u << k)) cols.push_back(k);
        const std::size_t m = cols.size();
        std::vector<std::vector<double>> ata(m, std::vector<double>(m, 0.0));
        std::vector<double> atb(m, 0.0);
        for (std::size_t n = 0; n < rows.size(); ++n)
            for (std::size_t i = 0; i < m; ++i) {
                const double ri = rows[n][cols[i]] / scale[cols[i]];
                atb[i] += ri * target[n];
                for (std::size_t j = 0; j < m; ++j) ata[i][j] += ri * rows[n][cols[j]] / scale[cols[j]];
            }
        std::vector<double> sol;
        if (!solve_linear(ata, atb, sol)) continue;
        if (std::any_of(sol.begin(), sol.end(), [](double v) { return v < 0.0; })) continue;
        std::vector<double> coef(p, 0.0);
        for (std::size_t i = 0; i < m; ++i) coef[cols[i]] = sol[i] / scale[cols[i]];
        double rss = 0.0;
        for (std::size_t n = 0; n < rows.size(); ++n) {
            double pred = 0.0;
            for (std::size_t k = 0; k < p; ++k) pred += coef[k] * rows[n][k];
            rss += (pred - target[n]) * (pred - target[n]);
        }
        if (rss < best_rss) {
            best_rss = rss;
            best = coef;
        }
    }
    return best;
}

// max_k |a_k - b_k| / max(|a_k|, |b_k|, floor), floor = 1e-3 * max|b| guards near-zero entries.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double scale = 0.0;
    for (double v : b) scale = std::max(scale, std::abs(v));
    const double floor = std::max(1e-3 * scale, 1e-12);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double denom = std::max({std::abs(a[k]), std::abs(b[k]), floor});
        worst = std::max(worst, std::abs(a[k] - b[k]) / denom);
    }
    return worst;
}

// Analytic versus central-difference gradient of the training loss over every weight and bias.
inline double network_gradient_error(const Network& net, const Batch& batch, const std::vector<int>& labels,
                                     const KnowledgeDistillation* kd = nullptr, double h = 1e-5) {
    const auto lg = loss_and_grad(net, batch, labels, kd);
    std::vector<double> analytic, numeric;
    Network probe = net;
    auto loss_at = [&] { return loss_and_grad(probe, batch, labels, kd).loss; };
    for (std::size_t u = 0; u < net.num_layers(); ++u) {
        auto wd = probe.layers[u].weight.data();
        const auto gw = lg.grads[u].weight.data();
        for (std::size_t e = 0; e < wd.size(); ++e) {
            const double orig = wd[e];
            wd[e] = orig + h;
            const double up = loss_at();
            wd[e] = orig - h;
            const double down = loss_at();
            wd[e] = orig;
            analytic.push_back(gw[e]);
            numeric.push_back((up - down) / (2.0 * h));
        }
        auto& bias = probe.layers[u].bias;
        for (std::size_t e = 0; e < bias.size(); ++e) {
            const double orig = bias[e];
            bias[e] = orig + h;
            const double up = loss_at();
            bias[e] = orig - h;
            const double down = loss_at();
            bias[e] = orig;
            analytic.push_back(lg.grads[u].bias[e]);
            numeric.push_back((up - down) / (2.0 * h));
        }
    }
    return max_relative_error(analytic, numeric);
}

}  // namespace ecc::testing
