#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ecc {

/// Dimensions of a layer weight: output channels, input channels, kernel height, kernel width.
struct Shape4 {
    std::size_t d = 0;
    std::size_t c = 0;
    std::size_t rh = 1;
    std::size_t rw = 1;

    std::size_t size() const { return d * c * rh * rw; }
    bool operator==(const Shape4&) const = default;
};

/// Dense row-major (d, c, rh, rw) tensor of doubles.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape4 shape, double fill = 0.0);
    Tensor4(Shape4 shape, std::vector<double> data);

    const Shape4& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    std::size_t index(std::size_t o, std::size_t i, std::size_t h, std::size_t w) const {
        return ((o * shape_.c + i) * shape_.rh + h) * shape_.rw + w;
    }
    double& at(std::size_t o, std::size_t i, std::size_t h, std::size_t w) { return data_[index(o, i, h, w)]; }
    double at(std::size_t o, std::size_t i, std::size_t h, std::size_t w) const { return data_[index(o, i, h, w)]; }

    bool all_finite() const;

    bool operator==(const Tensor4&) const = default;

private:
    Shape4 shape_;
    std::vector<double> data_;
};

/// Positive diagonal metric with the same shape as the tensor it weights.
class DiagPreconditioner {
public:
    /// Throws InvalidArgument unless every entry is >= floor and floor > 0.
    DiagPreconditioner(Tensor4 diag, double floor);

    static DiagPreconditioner identity(Shape4 shape);

    const Tensor4& diag() const { return diag_; }
    const Shape4& shape() const { return diag_.shape(); }

private:
    explicit DiagPreconditioner(Tensor4 diag) : diag_(std::move(diag)) {}
    Tensor4 diag_;
};

/// Sum over the input-channel slice i of B_e * w_e^2.
double channel_slice_norm_sq(const Tensor4& w, std::size_t i, const DiagPreconditioner& b);

/// Plain squared Euclidean norm of input-channel slice i.
double channel_slice_norm_sq(const Tensor4& w, std::size_t i);

/// Number of input channels whose slice norm exceeds zero_tol.
std::size_t layer_sparsity(const Tensor4& w, double zero_tol = 0.0);

/// Copy of w with input-channel slice i set to exactly zero.
Tensor4 zero_channel(Tensor4 w, std::size_t i);

/// Zeroes slice i in place.
void zero_channel_inplace(Tensor4& w, std::size_t i);

}  // namespace ecc
