#include "ecc/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ecc/errors.hpp"

namespace ecc {

std::string to_string(LayerKind kind) { return kind == LayerKind::Convolution ? "conv" : "fc"; }
std::string to_string(Activation act) { return act == Activation::Relu ? "relu" : "none"; }

LayerKind parse_layer_kind(const std::string& s) {
    if (s == "conv" || s == "convolution") return LayerKind::Convolution;
    if (s == "fc" || s == "fully_connected" || s == "linear") return LayerKind::FullyConnected;
    throw InvalidArgument("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "none" || s.empty()) return Activation::None;
    throw InvalidArgument("unknown activation '" + s + "'");
}

void Architecture::validate() const {
    if (layers.empty()) throw InvalidArgument("architecture has no layers");
    if (input.c == 0 || input.h == 0 || input.w == 0) throw ShapeError("input shape has a zero dimension");
    std::size_t h = input.h, w = input.w, c = input.c;
    bool flat = false;
    for (std::size_t u = 0; u < layers.size(); ++u) {
        const auto& l = layers[u];
        const std::string where = "layer " + std::to_string(u) + ": ";
        if (l.d == 0 || l.c == 0) throw ShapeError(where + "zero channel count");
        if (l.c != c) {
            throw ShapeError(where + "expects " + std::to_string(l.c) + " input channels, previous stage provides " +
                             std::to_string(c));
        }
        if (l.kind == LayerKind::FullyConnected) {
            if (l.rh != 1 || l.rw != 1) throw ShapeError(where + "fully-connected layer must have rh = rw = 1");
            h = w = 1;
            flat = true;
        } else {
            if (flat) throw ShapeError(where + "convolution after a fully-connected layer");
            if (l.stride == 0) throw InvalidArgument(where + "stride must be positive");
            if (h + 2 * l.padding < l.rh || w + 2 * l.padding < l.rw) throw ShapeError(where + "kernel larger than input");
            h = (h + 2 * l.padding - l.rh) / l.stride + 1;
            w = (w + 2 * l.padding - l.rw) / l.stride + 1;
        }
        c = l.d;
    }
}

std::vector<std::pair<std::size_t, std::size_t>> Architecture::input_spatial() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t h = input.h, w = input.w;
    for (const auto& l : layers) {
        out.emplace_back(h, w);
        if (l.kind == LayerKind::FullyConnected) {
            h = w = 1;
        } else {
            h = (h + 2 * l.padding - l.rh) / l.stride + 1;
            w = (w + 2 * l.padding - l.rw) / l.stride + 1;
        }
    }
    return out;
}

Architecture Network::architecture() const {
    Architecture arch;
    arch.input = input;
    for (const auto& l : layers) arch.layers.push_back(l.spec);
    return arch;
}

Network make_network(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    std::mt19937_64 rng(seed);
    Network net;
    net.input = arch.input;
    for (const auto& spec : arch.layers) {
        Layer layer{spec, Tensor4(spec.weight_shape()), std::vector<double>(spec.d, 0.0)};
        const double fan_in = static_cast<double>(spec.c * spec.rh * spec.rw);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (double& v : layer.weight.data()) v = dist(rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

namespace {

struct Activations {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<double> v;  // (n, c, h, w)
};

struct LayerCache {
    Activations input;   // what the layer consumed (pooled for fc-after-conv)
    Activations spatial; // pre-pool input, only when pooling happened
    bool pooled = false;
    Activations pre;     // pre-activation output
    Activations out;     // post-activation output
};

Activations global_average_pool(const Activations& in, std::size_t n) {
    Activations out{in.c, 1, 1, std::vector<double>(n * in.c, 0.0)};
    const std::size_t hw = in.h * in.w;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < in.c; ++i) {
            const double* src = &in.v[(b * in.c + i) * hw];
            double acc = 0.0;
            for (std::size_t k = 0; k < hw; ++k) acc += src[k];
            out.v[b * in.c + i] = acc / static_cast<double>(hw);
        }
    }
    return out;
}

Activations conv_forward(const Layer& layer, const Activations& in, std::size_t n) {
    const auto& s = layer.spec;
    const std::size_t ho = (in.h + 2 * s.padding - s.rh) / s.stride + 1;
    const std::size_t wo = (in.w + 2 * s.padding - s.rw) / s.stride + 1;
    Activations out{s.d, ho, wo, std::vector<double>(n * s.d * ho * wo, 0.0)};
    const auto w = layer.weight.data();
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t o = 0; o < s.d; ++o) {
            double* dst = &out.v[(b * s.d + o) * ho * wo];
            for (std::size_t k = 0; k < ho * wo; ++k) dst[k] = layer.bias[o];
            for (std::size_t i = 0; i < s.c; ++i) {
                const double* src = &in.v[(b * in.c + i) * in.h * in.w];
                for (std::size_t kh = 0; kh < s.rh; ++kh) {
                    for (std::size_t kw = 0; kw < s.rw; ++kw) {
                        const double wv = w[layer.weight.index(o, i, kh, kw)];
                        if (wv == 0.0) continue;
                        for (std::size_t y = 0; y < ho; ++y) {
                            const long iy = static_cast<long>(y * s.stride + kh) - static_cast<long>(s.padding);
                            if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
                            for (std::size_t x = 0; x < wo; ++x) {
                                const long ix = static_cast<long>(x * s.stride + kw) - static_cast<long>(s.padding);
                                if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
                                dst[y * wo + x] += wv * src[iy * static_cast<long>(in.w) + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Activations fc_forward(const Layer& layer, const Activations& in, std::size_t n) {
    const auto& s = layer.spec;
    Activations out{s.d, 1, 1, std::vector<double>(n * s.d, 0.0)};
    const auto w = layer.weight.data();
    for (std::size_t b = 0; b < n; ++b) {
        const double* x = &in.v[b * s.c];
        for (std::size_t o = 0; o < s.d; ++o) {
            double acc = layer.bias[o];
            const double* row = &w[o * s.c];
            for (std::size_t i = 0; i < s.c; ++i) acc += row[i] * x[i];
            out.v[b * s.d + o] = acc;
        }
    }
    return out;
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<LayerCache> run_forward(const Network& net, const Batch& batch) {
    if (net.layers.empty()) throw InvalidArgument("network has no layers");
    if (!(batch.shape == net.input)) throw ShapeError("batch shape does not match network input");
    if (batch.data.size() != batch.n * batch.shape.volume()) throw ShapeError("batch data length mismatch");

    std::vector<LayerCache> caches(net.layers.size());
    Activations current{batch.shape.c, batch.shape.h, batch.shape.w, batch.data};
    for (std::size_t u = 0; u < net.layers.size(); ++u) {
        const auto& layer = net.layers[u];
        auto& cache = caches[u];
        if (current.c != layer.spec.c) throw ShapeError("layer " + std::to_string(u) + ": channel mismatch");
        if (layer.spec.kind == LayerKind::FullyConnected) {
            if (current.h * current.w > 1) {
                cache.spatial = std::move(current);
                cache.pooled = true;
                cache.input = global_average_pool(cache.spatial, batch.n);
            } else {
                cache.input = std::move(current);
            }
            cache.pre = fc_forward(layer, cache.input, batch.n);
        } else {
            cache.input = std::move(current);
            cache.pre = conv_forward(layer, cache.input, batch.n);
        }
        if (!all_finite(cache.pre.v)) throw NonFiniteError(u, "non-finite activation in forward pass");
        cache.out = cache.pre;
        if (layer.spec.activation == Activation::Relu) {
            for (double& v : cache.out.v) v = v > 0.0 ? v : 0.0;
        }
        current = cache.out;
    }
    return caches;
}

double log_sum_exp(const double* z, std::size_t k, double scale) {
    double m = z[0] * scale;
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, z[j] * scale);
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += std::exp(z[j] * scale - m);
    return m + std::log(acc);
}

}  // namespace

Logits forward(const Network& net, const Batch& batch) {
    auto caches = run_forward(net, batch);
    auto& last = caches.back().out;
    return Logits{batch.n, last.c, std::move(last.v)};
}

LossAndGrad loss_and_grad(const Network& net, const Batch& batch, std::span<const int> labels,
                          const KnowledgeDistillation* kd, const ChannelMask* mask) {
    if (labels.size() != batch.n) throw ShapeError("label count does not match batch size");
    const std::size_t k = net.n_out();
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw InvalidArgument("label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
        }
    }
    if (kd != nullptr) {
        if (kd->teacher.n != batch.n || kd->teacher.k != k) throw ShapeError("teacher logits shape mismatch");
        if (!(kd->temperature > 0.0)) throw InvalidArgument("distillation temperature must be positive");
    }

    auto caches = run_forward(net, batch);
    const auto& logits = caches.back().out.v;
    const std::size_t n = batch.n;
    const double inv_n = 1.0 / static_cast<double>(n);

    LossAndGrad result;
    std::vector<double> dz(n * k, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
        const double* z = &logits[b * k];
        const double lse = log_sum_exp(z, k, 1.0);
        result.cross_entropy += (lse - z[labels[b]]) * inv_n;
        for (std::size_t j = 0; j < k; ++j) dz[b * k + j] = std::exp(z[j] - lse) * inv_n;
        dz[b * k + static_cast<std::size_t>(labels[b])] -= inv_n;

        if (kd != nullptr && kd->weight != 0.0) {
            const double t = kd->temperature;
            const double* zt = &kd->teacher.values[b * k];
            const double lse_s = log_sum_exp(z, k, 1.0 / t);
            const double lse_t = log_sum_exp(zt, k, 1.0 / t);
            double kl = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double log_p = zt[j] / t - lse_t;
                const double log_q = z[j] / t - lse_s;
                const double p = std::exp(log_p);
                kl += p * (log_p - log_q);
                dz[b * k + j] += kd->weight * t * (std::exp(log_q) - p) * inv_n;
            }
            result.distillation += kd->weight * t * t * kl * inv_n;
        }
    }
    result.loss = result.cross_entropy + result.distillation;
    if (!std::isfinite(result.loss)) throw NonFiniteError(net.layers.size() - 1, "non-finite loss");

    result.grads.resize(net.layers.size());
    std::vector<double> dout = std::move(dz);
    for (std::size_t ui = net.layers.size(); ui-- > 0;) {
        const auto& layer = net.layers[ui];
        const auto& s = layer.spec;
        auto& cache = caches[ui];
        auto& g = result.grads[ui];
        g.weight = Tensor4(s.weight_shape());
        g.bias.assign(s.d, 0.0);

        // dout is w.r.t. post-activation output; fold in the activation derivative.
        if (s.activation == Activation::Relu) {
            for (std::size_t e = 0; e < dout.size(); ++e) {
                if (!(cache.pre.v[e] > 0.0)) dout[e] = 0.0;
            }
        }
        const bool need_input_grad = ui > 0;
        std::vector<double> din(need_input_grad ? cache.input.v.size() : 0, 0.0);
        auto gw = g.weight.data();
        const auto w = layer.weight.data();

        if (s.kind == LayerKind::FullyConnected) {
            for (std::size_t b = 0; b < n; ++b) {
                const double* x = &cache.input.v[b * s.c];
                const double* d = &dout[b * s.d];
                for (std::size_t o = 0; o < s.d; ++o) {
                    g.bias[o] += d[o];
                    double* grow = &gw[o * s.c];
                    for (std::size_t i = 0; i < s.c; ++i) grow[i] += d[o] * x[i];
                    if (need_input_grad) {
                        const double* row = &w[o * s.c];
                        double* dx = &din[b * s.c];
                        for (std::size_t i = 0; i < s.c; ++i) dx[i] += d[o] * row[i];
                    }
                }
            }
            if (need_input_grad && cache.pooled) {
                const auto& sp = cache.spatial;
                const std::size_t hw = sp.h * sp.w;
                std::vector<double> dspatial(sp.v.size());
                for (std::size_t b = 0; b < n; ++b) {
                    for (std::size_t i = 0; i < sp.c; ++i) {
                        const double v = din[b * sp.c + i] / static_cast<double>(hw);
                        double* dst = &dspatial[(b * sp.c + i) * hw];
                        for (std::size_t e = 0; e < hw; ++e) dst[e] = v;
                    }
                }
                din = std::move(dspatial);
            }
        } else {
            const auto& in = cache.input;
            const std::size_t ho = cache.pre.h, wo = cache.pre.w;
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t o = 0; o < s.d; ++o) {
                    const double* d = &dout[(b * s.d + o) * ho * wo];
                    for (std::size_t e = 0; e < ho * wo; ++e) g.bias[o] += d[e];
                    for (std::size_t i = 0; i < s.c; ++i) {
                        const double* src = &in.v[(b * in.c + i) * in.h * in.w];
                        double* dsrc = need_input_grad ? &din[(b * in.c + i) * in.h * in.w] : nullptr;
                        for (std::size_t kh = 0; kh < s.rh; ++kh) {
                            for (std::size_t kw = 0; kw < s.rw; ++kw) {
                                const std::size_t widx = layer.weight.index(o, i, kh, kw);
                                const double wv = w[widx];
                                double acc = 0.0;
                                for (std::size_t y = 0; y < ho; ++y) {
                                    const long iy = static_cast<long>(y * s.stride + kh) - static_cast<long>(s.padding);
                                    if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
                                    for (std::size_t x = 0; x < wo; ++x) {
                                        const long ix =
                                            static_cast<long>(x * s.stride + kw) - static_cast<long>(s.padding);
                                        if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
                                        const long at = iy * static_cast<long>(in.w) + ix;
                                        acc += d[y * wo + x] * src[at];
                                        if (dsrc != nullptr) dsrc[at] += wv * d[y * wo + x];
                                    }
                                }
                                gw[widx] += acc;
                            }
                        }
                    }
                }
            }
        }
        if (!g.weight.all_finite()) throw NonFiniteError(ui, "non-finite weight gradient");
        dout = std::move(din);
    }

    if (mask != nullptr) mask_gradients(result.grads, *mask);
    return result;
}

std::vector<std::size_t> network_sparsity(const Network& net, double zero_tol) {
    std::vector<std::size_t> phi;
    phi.reserve(net.layers.size());
    for (const auto& l : net.layers) phi.push_back(layer_sparsity(l.weight, zero_tol));
    return phi;
}

ChannelMask full_mask(const Network& net) {
    ChannelMask m;
    for (const auto& l : net.layers) m.keep.emplace_back(l.spec.c, true);
    return m;
}

ChannelMask mask_from_zeros(const Network& net, double zero_tol) {
    ChannelMask m;
    for (const auto& l : net.layers) {
        std::vector<bool> keep(l.spec.c);
        for (std::size_t i = 0; i < l.spec.c; ++i) {
            keep[i] = std::sqrt(channel_slice_norm_sq(l.weight, i)) > zero_tol;
        }
        m.keep.push_back(std::move(keep));
    }
    return m;
}

namespace {

void check_mask(std::size_t layers, const ChannelMask& mask, auto channels_of) {
    if (mask.keep.size() != layers) throw ShapeError("mask layer count does not match network");
    for (std::size_t u = 0; u < layers; ++u) {
        if (mask.keep[u].size() != channels_of(u)) {
            throw ShapeError("mask length mismatch at layer " + std::to_string(u));
        }
    }
}

}  // namespace

void apply_mask_inplace(Network& net, const ChannelMask& mask) {
    check_mask(net.layers.size(), mask, [&](std::size_t u) { return net.layers[u].spec.c; });
    for (std::size_t u = 0; u < net.layers.size(); ++u) {
        for (std::size_t i = 0; i < mask.keep[u].size(); ++i) {
            if (!mask.keep[u][i]) zero_channel_inplace(net.layers[u].weight, i);
        }
    }
}

Network apply_mask(Network net, const ChannelMask& mask) {
    apply_mask_inplace(net, mask);
    return net;
}

void mask_gradients(std::vector<LayerGrad>& grads, const ChannelMask& mask) {
    check_mask(grads.size(), mask, [&](std::size_t u) { return grads[u].weight.shape().c; });
    for (std::size_t u = 0; u < grads.size(); ++u) {
        for (std::size_t i = 0; i < mask.keep[u].size(); ++i) {
            if (!mask.keep[u][i]) zero_channel_inplace(grads[u].weight, i);
        }
    }
}

Architecture pruned_architecture(const Architecture& arch, const SparsityVector& s) {
    arch.validate();
    if (s.num_layers() != arch.num_layers()) throw ShapeError("sparsity vector length does not match layer count");
    if (s.n_out != arch.n_out()) throw ShapeError("sparsity vector output dimensionality does not match network");
    std::vector<std::size_t> keep(arch.num_layers());
    for (std::size_t u = 0; u < arch.num_layers(); ++u) {
        const double v = s.layers[u];
        if (!(v >= 1.0) || v > static_cast<double>(arch.layers[u].c)) {
            throw InvalidArgument("s[" + std::to_string(u) + "] = " + std::to_string(v) + " outside [1, " +
                                  std::to_string(arch.layers[u].c) + "]");
        }
        keep[u] = static_cast<std::size_t>(std::floor(v));
    }
    Architecture out = arch;
    out.input.c = keep[0];
    for (std::size_t u = 0; u < arch.num_layers(); ++u) {
        out.layers[u].c = keep[u];
        out.layers[u].d = u + 1 < arch.num_layers() ? keep[u + 1] : arch.n_out();
    }
    return out;
}

Network instantiate_pruned(const Architecture& arch, const SparsityVector& s, std::uint64_t seed) {
    return make_network(pruned_architecture(arch, s), seed);
}

std::size_t argmax_row(const Logits& logits, std::size_t row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.k; ++j) {
        if (logits.at(row, j) > logits.at(row, best)) best = j;
    }
    return best;
}

}  // namespace ecc
