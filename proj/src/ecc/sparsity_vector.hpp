#pragma once

#include <cstddef>
#include <vector>

namespace ecc {

/// Per-layer retained input-channel counts, plus the fixed output dimensionality of the network.
/// Layer entries are real during solving and integral when sampled for profiling.
struct SparsityVector {
    std::vector<double> layers;
    std::size_t n_out = 0;

    std::size_t num_layers() const { return layers.size(); }

    /// Component j of (s_1, ..., s_|U|, s_|U|+1), zero-based.
    double component(std::size_t j) const {
        return j < layers.size() ? layers[j] : static_cast<double>(n_out);
    }

    bool operator==(const SparsityVector&) const = default;
};

}  // namespace ecc
