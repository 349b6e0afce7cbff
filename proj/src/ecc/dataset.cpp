#include "ecc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ecc/binary_io.hpp"
#include "ecc/errors.hpp"

namespace ecc {

Batch Dataset::batch(std::span<const std::size_t> indices) const {
    const std::size_t vol = shape.volume();
    Batch b{indices.size(), shape, std::vector<double>(indices.size() * vol)};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= size()) throw InvalidArgument("sample index out of range");
        std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(indices[r] * vol), vol,
                    b.data.begin() + static_cast<std::ptrdiff_t>(r * vol));
    }
    return b;
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels.at(i));
    return out;
}

Batch Dataset::all() const { return Batch{size(), shape, features}; }

Dataset make_synthetic(const SyntheticSpec& spec, std::size_t samples, std::uint64_t sample_seed) {
    if (spec.num_classes < 2) throw InvalidArgument("synthetic task needs at least two classes");
    const auto& sh = spec.shape;
    const std::size_t vol = sh.volume();

    // Each class template is a few signed Gaussian bumps per channel plus a channel offset.
    std::mt19937_64 trng(spec.template_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> templates(spec.num_classes * vol, 0.0);
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        for (std::size_t c = 0; c < sh.c; ++c) {
            double* t = &templates[(k * sh.c + c) * sh.h * sh.w];
            const double offset = 0.6 * (unit(trng) - 0.5);
            for (std::size_t e = 0; e < sh.h * sh.w; ++e) t[e] = offset;
            for (int bump = 0; bump < 2; ++bump) {
                const double cy = unit(trng) * static_cast<double>(sh.h);
                const double cx = unit(trng) * static_cast<double>(sh.w);
                const double sign = unit(trng) < 0.5 ? -1.0 : 1.0;
                const double width = 1.0 + unit(trng) * 1.5;
                for (std::size_t y = 0; y < sh.h; ++y) {
                    for (std::size_t x = 0; x < sh.w; ++x) {
                        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
                        t[y * sh.w + x] += sign * 1.5 * std::exp(-(dy * dy + dx * dx) / (2.0 * width * width));
                    }
                }
            }
        }
    }

    std::mt19937_64 rng(sample_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset ds;
    ds.shape = sh;
    ds.num_classes = spec.num_classes;
    ds.features.resize(samples * vol);
    ds.labels.resize(samples);
    for (std::size_t n = 0; n < samples; ++n) {
        const auto k = static_cast<std::size_t>(rng() % spec.num_classes);
        ds.labels[n] = static_cast<int>(k);
        for (std::size_t e = 0; e < vol; ++e) ds.features[n * vol + e] = templates[k * vol + e] + spec.noise * gauss(rng);
    }
    return ds;
}

Dataset read_columnar(const std::string& path, const InputShape& shape) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset '" + path + "'");
    Dataset ds;
    ds.shape = shape;
    const std::size_t vol = shape.volume();
    std::string line;
    std::size_t lineno = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        int label = 0;
        if (!(row >> label) || label < 0) throw IoError(path + ":" + std::to_string(lineno) + ": bad label");
        for (std::size_t e = 0; e < vol; ++e) {
            double v = 0.0;
            if (!(row >> v)) {
                throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(vol) + " features");
            }
            ds.features.push_back(v);
        }
        double extra = 0.0;
        if (row >> extra) throw IoError(path + ":" + std::to_string(lineno) + ": too many features");
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    ds.num_classes = static_cast<std::size_t>(max_label + 1);
    return ds;
}

void write_columnar(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset '" + path + "'");
    const std::size_t vol = ds.shape.volume();
    char buf[32];
    for (std::size_t n = 0; n < ds.size(); ++n) {
        out << ds.labels[n];
        for (std::size_t e = 0; e < vol; ++e) {
            std::snprintf(buf, sizeof buf, " %.17g", ds.features[n * vol + e]);
            out << buf;
        }
        out << '\n';
    }
}

namespace {
constexpr char kRasterMagic[8] = {'E', 'C', 'C', 'R', 'A', 'S', 'T', '1'};
}

Dataset read_raster(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raster '" + path + "'");
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kRasterMagic)) {
        throw IoError("'" + path + "' is not a raster dataset (bad magic)");
    }
    const std::size_t n = binary::read_u32(in);
    Dataset ds;
    ds.shape.c = binary::read_u32(in);
    ds.shape.h = binary::read_u32(in);
    ds.shape.w = binary::read_u32(in);
    ds.num_classes = binary::read_u32(in);
    const std::size_t vol = ds.shape.volume();
    ds.features.resize(n * vol);
    ds.labels.resize(n);
    std::vector<unsigned char> row(vol + 1);
    for (std::size_t s = 0; s < n; ++s) {
        if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()))) {
            throw IoError("'" + path + "' truncated at sample " + std::to_string(s));
        }
        if (row[0] >= ds.num_classes) throw IoError("'" + path + "': label out of range at sample " + std::to_string(s));
        ds.labels[s] = row[0];
        for (std::size_t e = 0; e < vol; ++e) ds.features[s * vol + e] = row[e + 1] / 255.0;
    }
    return ds;
}

void write_raster(const std::string& path, const Dataset& ds) {
    if (ds.num_classes > 256) throw InvalidArgument("raster format stores labels in one byte");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write raster '" + path + "'");
    out.write(kRasterMagic, 8);
    binary::write_u32(out, static_cast<std::uint32_t>(ds.size()));
    binary::write_u32(out, static_cast<std::uint32_t>(ds.shape.c));
    binary::write_u32(out, static_cast<std::uint32_t>(ds.shape.h));
    binary::write_u32(out, static_cast<std::uint32_t>(ds.shape.w));
    binary::write_u32(out, static_cast<std::uint32_t>(ds.num_classes));
    const std::size_t vol = ds.shape.volume();
    for (std::size_t s = 0; s < ds.size(); ++s) {
        out.put(static_cast<char>(ds.labels[s]));
        for (std::size_t e = 0; e < vol; ++e) {
            const double v = std::clamp(ds.features[s * vol + e], 0.0, 1.0);
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    }
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : n_(dataset_size), batch_(batch_size), rng_(seed), order_(dataset_size) {
    if (n_ == 0 || batch_ == 0) throw InvalidArgument("batch sampler needs a nonempty dataset and batch size");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> BatchSampler::next() {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    while (out.size() < batch_) {
        if (cursor_ == n_) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            cursor_ = 0;
        }
        out.push_back(order_[cursor_++]);
    }
    return out;
}

double accuracy(const Network& net, const Dataset& ds) {
    if (ds.size() == 0) throw InvalidArgument("accuracy of an empty dataset");
    const auto logits = forward(net, ds.all());
    std::size_t correct = 0;
    for (std::size_t n = 0; n < ds.size(); ++n) {
        if (static_cast<int>(argmax_row(logits, n)) == ds.labels[n]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace ecc
