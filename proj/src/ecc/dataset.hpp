#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ecc/network.hpp"

namespace ecc {

struct Dataset {
    InputShape shape;
    std::size_t num_classes = 0;
    std::vector<double> features;  // (n, c, h, w)
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    Batch batch(std::span<const std::size_t> indices) const;
    std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
    Batch all() const;
};

/// Class templates are drawn from template_seed; samples from sample_seed.
struct SyntheticSpec {
    InputShape shape{3, 8, 8};
    std::size_t num_classes = 4;
    double noise = 1.0;
    std::uint64_t template_seed = 1;
};

Dataset make_synthetic(const SyntheticSpec& spec, std::size_t samples, std::uint64_t sample_seed);

/// One sample per line: integer label, then shape.volume() reals. '#' lines are comments.
Dataset read_columnar(const std::string& path, const InputShape& shape);
void write_columnar(const std::string& path, const Dataset& ds);

/// Binary raster: 8-byte magic "ECCRAST1", little-endian uint32 n, c, h, w, num_classes,
/// then per sample one label byte followed by c*h*w pixel bytes (row-major). Pixels map to [0, 1].
Dataset read_raster(const std::string& path);
void write_raster(const std::string& path, const Dataset& ds);

/// Reshuffles every epoch; deterministic per seed.
class BatchSampler {
public:
    BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);
    std::vector<std::size_t> next();

private:
    std::size_t n_, batch_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

/// Fraction of rows whose argmax matches the label.
double accuracy(const Network& net, const Dataset& ds);

}  // namespace ecc
