#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecc/sparsity_vector.hpp"
#include "ecc/tensor.hpp"

namespace ecc {

enum class LayerKind { Convolution, FullyConnected };
enum class Activation { None, Relu };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
LayerKind parse_layer_kind(const std::string& s);
Activation parse_activation(const std::string& s);

struct LayerSpec {
    LayerKind kind = LayerKind::FullyConnected;
    std::size_t d = 0;
    std::size_t c = 0;
    std::size_t rh = 1;
    std::size_t rw = 1;
    Activation activation = Activation::None;
    std::size_t stride = 1;
    std::size_t padding = 0;

    Shape4 weight_shape() const { return {d, c, rh, rw}; }
    bool operator==(const LayerSpec&) const = default;
};

struct InputShape {
    std::size_t c = 0;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t volume() const { return c * h * w; }
    bool operator==(const InputShape&) const = default;
};

/// Layer specs plus the input they consume. A fully-connected layer that follows a
/// spatial feature map global-average-pools it first, so every layer's c equals the
/// previous layer's d.
struct Architecture {
    InputShape input;
    std::vector<LayerSpec> layers;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t n_out() const { return layers.empty() ? 0 : layers.back().d; }

    /// Throws ShapeError/InvalidArgument on any inconsistency.
    void validate() const;

    /// Spatial (h, w) of each layer's input, computed from the input shape.
    std::vector<std::pair<std::size_t, std::size_t>> input_spatial() const;

    bool operator==(const Architecture&) const = default;
};

struct Layer {
    LayerSpec spec;
    Tensor4 weight;
    std::vector<double> bias;
};

struct Network {
    InputShape input;
    std::vector<Layer> layers;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t n_out() const { return layers.empty() ? 0 : layers.back().spec.d; }
    Architecture architecture() const;
};

/// Row-major (n, c, h, w) batch of inputs.
struct Batch {
    std::size_t n = 0;
    InputShape shape;
    std::vector<double> data;
};

/// Row-major (n, k) matrix of class scores.
struct Logits {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> values;

    double at(std::size_t row, std::size_t col) const { return values[row * k + col]; }
};

struct LayerGrad {
    Tensor4 weight;
    std::vector<double> bias;
};

struct LossAndGrad {
    double loss = 0.0;
    double cross_entropy = 0.0;
    double distillation = 0.0;
    std::vector<LayerGrad> grads;
};

/// Temperature-softened distillation target: loss += weight * T^2 * KL(teacher_T || student_T).
struct KnowledgeDistillation {
    Logits teacher;
    double weight = 0.5;
    double temperature = 4.0;
};

/// Per-layer keep flags over input channels.
struct ChannelMask {
    std::vector<std::vector<bool>> keep;
};

/// He-normal weights, zero biases.
Network make_network(const Architecture& arch, std::uint64_t seed);

Logits forward(const Network& net, const Batch& batch);

LossAndGrad loss_and_grad(const Network& net, const Batch& batch, std::span<const int> labels,
                          const KnowledgeDistillation* kd = nullptr, const ChannelMask* mask = nullptr);

/// phi(w) per layer.
std::vector<std::size_t> network_sparsity(const Network& net, double zero_tol = 0.0);

ChannelMask full_mask(const Network& net);
ChannelMask mask_from_zeros(const Network& net, double zero_tol = 0.0);
Network apply_mask(Network net, const ChannelMask& mask);
void apply_mask_inplace(Network& net, const ChannelMask& mask);
void mask_gradients(std::vector<LayerGrad>& grads, const ChannelMask& mask);

/// Builds a structurally smaller network keeping floor(s_u) input channels in layer u
/// (lowest indices survive). The last layer keeps n_out outputs.
Network instantiate_pruned(const Architecture& arch, const SparsityVector& s, std::uint64_t seed);

/// Architecture that instantiate_pruned would produce.
Architecture pruned_architecture(const Architecture& arch, const SparsityVector& s);

std::size_t argmax_row(const Logits& logits, std::size_t row);

}  // namespace ecc
