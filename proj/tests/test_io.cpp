#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "ecc/adam.hpp"
#include "ecc/checkpoint.hpp"
#include "ecc/dataset.hpp"
#include "ecc/errors.hpp"
#include "support.hpp"

using namespace ecc;
using namespace ecc::testing;

TEST_SUITE("adam") {

TEST_CASE("first two steps on a single weight, frozen values") {
    Architecture arch{{1, 1, 1}, {fc(1, 1, Activation::None)}};
    auto net = make_network(arch, 1);
    net.layers[0].weight.data()[0] = 0.5;
    net.layers[0].bias = {0.0};
    AdamState st(net);
    const AdamConfig cfg;  // 1e-3, 0.9, 0.999, 1e-8
    std::vector<LayerGrad> g{{Tensor4({1, 1, 1, 1}, 0.2), {0.0}}};
    adam_step(net, st, g, cfg);
    // m_hat = 0.2, v_hat = 0.04: w -= 1e-3 * 0.2 / (0.2 + 1e-8)
    CHECK(net.layers[0].weight.data()[0] == doctest::Approx(0.49900000005).epsilon(1e-15));
    CHECK(net.layers[0].bias[0] == 0.0);
    g[0].weight.data()[0] = -0.1;
    adam_step(net, st, g, cfg);
    // m = 0.9*0.02 - 0.01 = 0.008, v = 0.999*4e-5 + 1e-5 = 4.996e-5
    const double m_hat = 0.008 / (1 - 0.81), v_hat = 4.996e-5 / (1 - 0.998001);
    const double expected = 0.49900000005 - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(net.layers[0].weight.data()[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(st.step() == 2);
    const auto b = st.preconditioner(0, cfg);
    CHECK(b.diag().data()[0] == doctest::Approx(std::sqrt(v_hat) + 1e-8).epsilon(1e-14));
}

TEST_CASE("non-finite gradients are rejected") {
    Architecture arch{{1, 1, 1}, {fc(1, 1, Activation::None)}};
    auto net = make_network(arch, 1);
    AdamState st(net);
    std::vector<LayerGrad> g{{Tensor4({1, 1, 1, 1}, NAN), {0.0}}};
    CHECK_THROWS_AS(st.update_moments(g, AdamConfig{}), NonFiniteError);
}

}

TEST_SUITE("dataset") {

TEST_CASE("synthetic data is deterministic and balanced enough") {
    SyntheticSpec spec;
    const auto a = make_synthetic(spec, 400, 3);
    const auto b = make_synthetic(spec, 400, 3);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(make_synthetic(spec, 400, 4).features != a.features);
    std::vector<int> counts(4, 0);
    for (int l : a.labels) counts[static_cast<std::size_t>(l)]++;
    for (int c : counts) CHECK(c > 50);
}

TEST_CASE("columnar round trip is lossless") {
    TempDir dir("columnar");
    SyntheticSpec spec;
    spec.shape = {2, 2, 3};
    const auto ds = make_synthetic(spec, 17, 9);
    write_columnar(dir.file("d.txt"), ds);
    const auto back = read_columnar(dir.file("d.txt"), spec.shape);
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);

    spit(dir.file("bad.txt"), "# comment\n1 0.5 0.5\n");
    CHECK_THROWS_AS(read_columnar(dir.file("bad.txt"), InputShape{3, 1, 1}), IoError);
    spit(dir.file("ok.txt"), "# comment\n1 0.5 0.5 1\n\n0 1 2 3\n");
    const auto ok = read_columnar(dir.file("ok.txt"), InputShape{3, 1, 1});
    CHECK(ok.size() == 2);
    CHECK(ok.labels == std::vector<int>{1, 0});
}

TEST_CASE("raster round trip quantizes to bytes") {
    TempDir dir("raster");
    Dataset ds;
    ds.shape = {1, 2, 2};
    ds.num_classes = 3;
    ds.labels = {2, 0};
    ds.features = {0.0, 1.0, 0.5, 0.25, 1.0, 0.0, 0.2, 0.8};
    write_raster(dir.file("r.bin"), ds);
    const auto back = read_raster(dir.file("r.bin"));
    CHECK(back.labels == ds.labels);
    CHECK(back.shape == ds.shape);
    for (std::size_t e = 0; e < ds.features.size(); ++e) CHECK(std::abs(back.features[e] - ds.features[e]) <= 0.5 / 255.0);
    CHECK(slurp(dir.file("r.bin")).substr(0, 8) == "ECCRAST1");

    auto bytes = slurp(dir.file("r.bin"));
    spit(dir.file("trunc.bin"), bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(read_raster(dir.file("trunc.bin")), IoError);
    bytes[0] = 'X';
    spit(dir.file("magic.bin"), bytes);
    CHECK_THROWS_AS(read_raster(dir.file("magic.bin")), IoError);
}

TEST_CASE("batch sampler visits every index once per epoch") {
    BatchSampler s(10, 4, 7);
    std::multiset<std::size_t> seen;
    for (int k = 0; k < 5; ++k)
        for (auto i : s.next()) seen.insert(i);
    // 20 draws over two epochs of 10
    for (std::size_t i = 0; i < 10; ++i) CHECK(seen.count(i) == 2);
}

TEST_CASE("accuracy matches an independent argmax count") {
    Architecture arch{{3, 8, 8}, {conv(4, 3, 3, 1, 1), fc(4, 4, Activation::None)}};
    auto net = make_network(arch, 5);
    const auto ds = make_synthetic(SyntheticSpec{}, 60, 5);
    std::size_t correct = 0;
    for (std::size_t n = 0; n < ds.size(); ++n) {
        std::vector<double> x(ds.features.begin() + n * 192, ds.features.begin() + (n + 1) * 192);
        const auto logits = naive_forward(net, x, arch.input);
        const auto pred = std::max_element(logits.begin(), logits.end()) - logits.begin();
        if (pred == ds.labels[n]) ++correct;
    }
    CHECK(accuracy(net, ds) == doctest::Approx(static_cast<double>(correct) / 60.0));
}

}

TEST_SUITE("checkpoint") {

TEST_CASE("round trip is bitwise and rejects corruption") {
    TempDir dir("ckpt");
    Architecture arch{{3, 8, 8}, {conv(8, 3, 3, 1, 1), conv(16, 8, 3, 2, 1), fc(32, 16), fc(4, 32, Activation::None)}};
    auto net = make_network(arch, 17);
    net.layers[2].weight.data()[5] = -0.0;
    net.layers[1].bias[3] = 1.0 / 3.0;
    const nlohmann::json meta{{"seed", 17}, {"note", "x"}};
    save_checkpoint(dir.file("a.ckpt"), net, meta);
    const auto back = load_checkpoint(dir.file("a.ckpt"));
    CHECK(back.meta == meta);
    REQUIRE(back.net.num_layers() == 4);
    CHECK(back.net.architecture() == arch);
    for (std::size_t u = 0; u < 4; ++u) {
        CHECK(back.net.layers[u].weight == net.layers[u].weight);
        CHECK(back.net.layers[u].bias == net.layers[u].bias);
    }
    CHECK(std::signbit(back.net.layers[2].weight.data()[5]));

    save_checkpoint(dir.file("b.ckpt"), back.net, back.meta);
    CHECK(slurp(dir.file("a.ckpt")) == slurp(dir.file("b.ckpt")));

    const auto bytes = slurp(dir.file("a.ckpt"));
    spit(dir.file("short.ckpt"), bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(load_checkpoint(dir.file("short.ckpt")), IoError);
    spit(dir.file("long.ckpt"), bytes + "x");
    CHECK_THROWS_AS(load_checkpoint(dir.file("long.ckpt")), IoError);
    spit(dir.file("magic.ckpt"), "NOT-A-CHECKPOINT\n{}\n");
    CHECK_THROWS_AS(load_checkpoint(dir.file("magic.ckpt")), IoError);
    CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), IoError);
}

TEST_CASE("header is one JSON line with a format version") {
    TempDir dir("ckpt_header");
    Architecture arch{{2, 1, 1}, {fc(3, 2, Activation::None)}};
    save_checkpoint(dir.file("c.ckpt"), make_network(arch, 1));
    const auto text = slurp(dir.file("c.ckpt"));
    const auto first = text.find('\n');
    const auto second = text.find('\n', first + 1);
    CHECK(text.substr(0, first) == "ECC-CHECKPOINT");
    const auto header = nlohmann::json::parse(text.substr(first + 1, second - first - 1));
    CHECK(header.at("format_version") == 1);
    CHECK(header.at("n_out") == 3);
    // 6 weights + 3 biases as little-endian doubles
    CHECK(text.size() - second - 1 == 9 * 8);
}

TEST_CASE("architecture json accepts kernel shorthand and infers c") {
    const auto arch = architecture_from_json(nlohmann::json::parse(R"({
      "input": {"c": 3, "h": 8, "w": 8},
      "layers": [{"kind": "conv", "d": 8, "kernel": 3, "padding": 1, "activation": "relu"},
                 {"kind": "fc", "d": 4}]})"));
    CHECK(arch.layers[0].c == 3);
    CHECK(arch.layers[0].rh == 3);
    CHECK(arch.layers[1].c == 8);
    CHECK(arch.layers[1].activation == Activation::None);
    CHECK(architecture_from_json(architecture_to_json(arch)) == arch);
}

}
