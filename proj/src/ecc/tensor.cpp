#include "ecc/tensor.hpp"

#include <cmath>
#include <string>

#include "ecc/errors.hpp"

namespace ecc {

namespace {

void check_channel(const Tensor4& w, std::size_t i) {
    if (i >= w.shape().c) {
        throw InvalidArgument("input channel " + std::to_string(i) + " out of range (c = " +
                              std::to_string(w.shape().c) + ")");
    }
}

}  // namespace

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape volume " +
                         std::to_string(shape_.size()));
    }
}

bool Tensor4::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

DiagPreconditioner::DiagPreconditioner(Tensor4 diag, double floor) : diag_(std::move(diag)) {
    if (!(floor > 0.0)) throw InvalidArgument("preconditioner floor must be positive");
    for (double v : diag_.data()) {
        if (!(v >= floor) || !std::isfinite(v)) {
            throw InvalidArgument("preconditioner entry " + std::to_string(v) + " below floor " +
                                  std::to_string(floor));
        }
    }
}

DiagPreconditioner DiagPreconditioner::identity(Shape4 shape) { return DiagPreconditioner(Tensor4(shape, 1.0)); }

double channel_slice_norm_sq(const Tensor4& w, std::size_t i, const DiagPreconditioner& b) {
    check_channel(w, i);
    if (!(b.shape() == w.shape())) throw ShapeError("preconditioner shape does not match tensor");
    const auto& s = w.shape();
    const auto wd = w.data();
    const auto bd = b.diag().data();
    double acc = 0.0;
    for (std::size_t o = 0; o < s.d; ++o) {
        const std::size_t base = w.index(o, i, 0, 0);
        for (std::size_t k = 0; k < s.rh * s.rw; ++k) acc += bd[base + k] * wd[base + k] * wd[base + k];
    }
    return acc;
}

double channel_slice_norm_sq(const Tensor4& w, std::size_t i) {
    check_channel(w, i);
    const auto& s = w.shape();
    const auto wd = w.data();
    double acc = 0.0;
    for (std::size_t o = 0; o < s.d; ++o) {
        const std::size_t base = w.index(o, i, 0, 0);
        for (std::size_t k = 0; k < s.rh * s.rw; ++k) acc += wd[base + k] * wd[base + k];
    }
    return acc;
}

std::size_t layer_sparsity(const Tensor4& w, double zero_tol) {
    if (zero_tol < 0.0) throw InvalidArgument("zero_tol must be nonnegative");
    std::size_t count = 0;
    for (std::size_t i = 0; i < w.shape().c; ++i) {
        if (std::sqrt(channel_slice_norm_sq(w, i)) > zero_tol) ++count;
    }
    return count;
}

void zero_channel_inplace(Tensor4& w, std::size_t i) {
    check_channel(w, i);
    const auto& s = w.shape();
    auto wd = w.data();
    for (std::size_t o = 0; o < s.d; ++o) {
        const std::size_t base = w.index(o, i, 0, 0);
        for (std::size_t k = 0; k < s.rh * s.rw; ++k) wd[base + k] = 0.0;
    }
}

Tensor4 zero_channel(Tensor4 w, std::size_t i) {
    zero_channel_inplace(w, i);
    return w;
}

}  // namespace ecc
