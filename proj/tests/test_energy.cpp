#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ecc/energy.hpp"
#include "ecc/energy_io.hpp"
#include "ecc/errors.hpp"
#include "ecc/external_device.hpp"
#include "ecc/oracles.hpp"
#include "support.hpp"

using namespace ecc;
using namespace ecc::testing;

namespace {

Architecture toy_arch() {
    return {{3, 8, 8}, {conv(8, 3, 3, 1, 1), conv(16, 8, 3, 2, 1), fc(32, 16), fc(4, 32, Activation::None)}};
}

std::vector<EnergySample> exact_samples(const BilinearEnergyModel& m, const Architecture& arch, std::size_t n,
                                        std::uint64_t seed) {
    std::vector<EnergySample> out;
    for (const auto& s : sample_sparsities(arch, n, seed)) out.push_back({s, eval(m, s), 1, 0.0});
    return out;
}

// Energy-model error relative to each coefficient, with zero coefficients compared on the scale of
// their contribution to the mean energy.
double coefficient_error(const BilinearEnergyModel& fitted, const std::vector<double>& ref,
                         const std::vector<EnergySample>& samples) {
    double mean_e = 0.0;
    for (const auto& s : samples) mean_e += s.energy / static_cast<double>(samples.size());
    std::vector<double> scale(ref.size(), 1.0);
    for (std::size_t j = 1; j < ref.size(); ++j) {
        scale[j] = 0.0;
        for (const auto& s : samples) scale[j] += s.s.component(j - 1) * s.s.component(j) / static_cast<double>(samples.size());
    }
    std::vector<double> got{fitted.a0};
    got.insert(got.end(), fitted.a.begin(), fitted.a.end());
    double worst = 0.0;
    for (std::size_t j = 0; j < ref.size(); ++j) {
        const double denom = ref[j] > 0.0 ? ref[j] : 1e-3 * mean_e / scale[j];
        worst = std::max(worst, std::abs(got[j] - ref[j]) / denom);
    }
    return worst;
}

}  // namespace

TEST_SUITE("energy") {

TEST_CASE("bilinear evaluation and gradient, worked example") {
    const BilinearEnergyModel m{1.0, {2.0, 3.0}};
    const SparsityVector s{{2.0, 3.0}, 4};
    CHECK(eval(m, s) == 49.0);
    CHECK(grad_s(m, s) == std::vector<double>{6.0, 16.0});
    const BilinearEnergyModel flat{0.7, {0.0, 0.0}};
    CHECK(eval(flat, s) == 0.7);
    CHECK(grad_s(flat, s) == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(eval(m, SparsityVector{{1.0}, 4}), ShapeError);
}

TEST_CASE("property: evaluation and gradient against independent references") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const std::size_t layers = 1 + rng() % 6;
        BilinearEnergyModel m{u(rng), {}};
        SparsityVector s{{}, 1 + rng() % 10};
        for (std::size_t j = 0; j < layers; ++j) {
            m.a.push_back(u(rng));
            s.layers.push_back(1.0 + 30.0 * u(rng));
        }
        double direct = m.a0;
        for (std::size_t j = 0; j < layers; ++j)
            direct += m.a[j] * s.layers[j] * (j + 1 < layers ? s.layers[j + 1] : static_cast<double>(s.n_out));
        CHECK(eval(m, s) == doctest::Approx(direct).epsilon(1e-12));
        CHECK(eval(m, s) >= m.a0);

        const auto fd = finite_diff_grad(
            [&](std::span<const double> x) { return eval(m, SparsityVector{{x.begin(), x.end()}, s.n_out}); },
            s.layers, 1e-3);
        const auto g = grad_s(m, s);
        for (std::size_t j = 0; j < layers; ++j) {
            CHECK(g[j] >= 0.0);
            CHECK(std::abs(g[j] - fd[j]) <= 1e-9 * std::max(1.0, std::abs(g[j])));
        }
        // monotone in each component
        const std::size_t j = rng() % layers;
        auto bigger = s;
        bigger.layers[j] += 0.5;
        CHECK(eval(m, bigger) >= eval(m, s));
    }
}

TEST_CASE("sampling is uniform over channel counts and deterministic") {
    Architecture ones{{1, 1, 1}, {fc(1, 1), fc(1, 1, Activation::None)}};
    for (const auto& s : sample_sparsities(ones, 20, 1)) CHECK(s.layers == std::vector<double>{1.0, 1.0});

    const auto arch = toy_arch();
    const auto a = sample_sparsities(arch, 10000, 5);
    CHECK(a.size() == 10000);
    for (std::size_t k = 0; k < 50; ++k) CHECK(a[k] == sample_sparsities(arch, 10000, 5)[k]);
    for (std::size_t u = 0; u < arch.num_layers(); ++u) {
        const double c = static_cast<double>(arch.layers[u].c);
        double mean = 0.0;
        for (const auto& s : a) {
            CHECK(s.layers[u] == std::floor(s.layers[u]));
            CHECK(s.layers[u] >= 1.0);
            CHECK(s.layers[u] <= c);
            mean += s.layers[u] / 10000.0;
        }
        const double sd = std::sqrt((c * c - 1.0) / 12.0);
        CHECK(std::abs(mean - (c + 1.0) / 2.0) <= 3.0 * sd / 100.0);
    }
}

TEST_CASE("collect averages trials") {
    const auto arch = toy_arch();
    SimulatedDeviceConfig quiet;
    SimulatedDevice exact(arch, quiet);
    const auto samples = sample_sparsities(arch, 5, 3);
    const auto clean = collect(exact, samples, 4, 11);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(clean[k].stdev == 0.0);
        CHECK(clean[k].trials == 4);
        CHECK(clean[k].energy == doctest::Approx(exact.ground_truth_energy(samples[k])).epsilon(1e-14));
    }

    SimulatedDeviceConfig noisy;
    noisy.noise_sigma = 0.02;
    noisy.seed = 9;
    SimulatedDevice dev(arch, noisy);
    const auto single = collect(dev, samples, 1, 11);
    CHECK(single[0].energy == dev.measure(samples[0], trial_seed(11, 0, 0)));

    const auto many = collect(dev, {samples[0]}, 100, 12);
    const double rel = many[0].stdev / many[0].energy;
    CHECK(rel >= 0.5 * 0.02);
    CHECK(rel <= 1.5 * 0.02);
    CHECK_THROWS_AS(collect(dev, samples, 0, 1), InvalidArgument);
}

TEST_CASE("simulated device") {
    const auto arch = toy_arch();
    SimulatedDeviceConfig cfg;
    SimulatedDevice dev(arch, cfg);
    const auto& truth = dev.ground_truth();
    // 3x3 kernels on 8x8 (stride 1) then 4x4 (stride 2) outputs; fc layers charge one MAC per pair.
    CHECK(truth.a0 == cfg.static_joules);
    CHECK(truth.a[0] == doctest::Approx(1e-5 * 9 * 64).epsilon(1e-12).scale(0));
    CHECK(truth.a[1] == doctest::Approx(1e-5 * 9 * 16).epsilon(1e-12).scale(0));
    CHECK(truth.a[2] == doctest::Approx(1e-5).epsilon(1e-12).scale(0));
    CHECK(truth.a[3] == doctest::Approx(1e-5).epsilon(1e-12).scale(0));
    const SparsityVector s{{2, 5, 9, 20}, 4};
    CHECK(dev.measure(s, 123) == eval(truth, s));
    for (std::size_t j = 0; j < 4; ++j) {
        auto up = s;
        up.layers[j] += 1.0;
        CHECK(dev.measure(up, 1) > dev.measure(s, 1));
    }

    cfg.noise_sigma = 0.01;
    SimulatedDevice noisy(arch, cfg);
    CHECK(noisy.measure(s, 5) == noisy.measure(s, 5));
    CHECK(noisy.measure(s, 5) != noisy.measure(s, 6));
    std::vector<double> xs;
    for (std::uint64_t t = 0; t < 1000; ++t) xs.push_back(noisy.measure(s, t));
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / 1000.0;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean) / 999.0;
    const double ratio = std::sqrt(var) / mean;
    CHECK(ratio >= 0.005);
    CHECK(ratio <= 0.015);

    SimulatedDeviceConfig over;
    over.mode = CostMode::Overhead;
    CHECK(SimulatedDevice(arch, over).measure(s, 1) == doctest::Approx(eval(truth, s) + 4 * over.layer_overhead).epsilon(1e-12).scale(0));
    SimulatedDeviceConfig sat;
    sat.mode = CostMode::Saturating;
    SimulatedDevice satdev(arch, sat);
    // Concave in each pair count: above the bilinear cost inside the box, equal at full width.
    CHECK(satdev.measure(s, 1) > eval(truth, s));
    const SparsityVector full{{3, 8, 16, 32}, 4};
    CHECK(satdev.measure(full, 1) == doctest::Approx(eval(truth, full)).epsilon(1e-14));
    CHECK(parse_cost_mode("saturating") == CostMode::Saturating);
    CHECK_THROWS_AS(parse_cost_mode("quadratic"), InvalidArgument);
}

TEST_CASE("relative test error") {
    const BilinearEnergyModel m{0.0, {1.0}};
    auto at = [](double s, double e) { return EnergySample{SparsityVector{{s}, 1}, e, 1, 0.0}; };
    CHECK(relative_test_error(m, {at(2, 2.0), at(3, 3.0)}) == 0.0);
    CHECK(relative_test_error(m, {at(1.1, 1.0), at(2.2, 2.0)}) == doctest::Approx(0.1));
    CHECK(relative_test_error(m, {at(1.1, 1.0), at(1.2, 1.0), at(1.3, 1.0)}) == doctest::Approx(0.2));
    CHECK_THROWS_AS(relative_test_error(m, {at(1, 0.0)}), InvalidArgument);
    CHECK_THROWS_AS(relative_test_error(m, {}), InvalidArgument);
}

TEST_CASE("noise-free fit recovers the nonnegative least-squares solution") {
    const auto arch = toy_arch();
    SimulatedDevice dev(arch, SimulatedDeviceConfig{});
    const auto samples = exact_samples(dev.ground_truth(), arch, 400, 8);
    const auto ref = nnls_bilinear(samples);
    EnergyFitConfig cfg;
    const auto r = fit(samples, cfg);
    CHECK(coefficient_error(r.model, ref, samples) <= 1e-3);
    CHECK(r.train_error <= 1e-3);
}

TEST_CASE("fit lands on the boundary when a coefficient should be zero") {
    const auto arch = toy_arch();
    const BilinearEnergyModel truth{0.05, {5e-3, 0.0, 2e-5, 1e-4}};
    const auto samples = exact_samples(truth, arch, 400, 9);
    const auto ref = nnls_bilinear(samples);
    CHECK(ref[2] == 0.0);
    const auto r = fit(samples, EnergyFitConfig{});
    CHECK(coefficient_error(r.model, ref, samples) <= 1e-3);
    for (double a : r.model.a) CHECK(a >= 0.0);
}

TEST_CASE("constant energies give a pure intercept") {
    const auto arch = toy_arch();
    std::vector<EnergySample> samples;
    for (const auto& s : sample_sparsities(arch, 100, 1)) samples.push_back({s, 0.3, 1, 0.0});
    EnergyFitConfig cfg;
    cfg.weight_decay = 1.0;
    const auto r = fit(samples, cfg);
    CHECK(r.model.a0 == doctest::Approx(0.3).epsilon(1e-3));
    double mean_feature_energy = 0.0;
    for (const auto& s : samples)
        for (std::size_t j = 0; j < 4; ++j) mean_feature_energy += r.model.a[j] * s.s.component(j) * s.s.component(j + 1) / 100.0;
    CHECK(mean_feature_energy <= 1e-3 * 0.3);
}

TEST_CASE("fit is deterministic and logs every interval") {
    const auto arch = toy_arch();
    SimulatedDeviceConfig cfg;
    cfg.noise_sigma = 0.01;
    SimulatedDevice dev(arch, cfg);
    const auto samples = collect(dev, sample_sparsities(arch, 200, 4), 1, 4);
    const auto [train, test] = split(samples, 0.2, 3);
    CHECK(train.size() == 160);
    CHECK(test.size() == 40);
    EnergyFitConfig fc;
    fc.iterations = 2000;
    fc.log_every = 100;
    const auto a = fit(train, fc, &test);
    const auto b = fit(train, fc, &test);
    CHECK(a.model == b.model);
    REQUIRE(a.log.size() == 21);  // iterations 1, 100, 200, ..., 2000
    CHECK(a.log.front().iteration == 1);
    CHECK(a.log[1].iteration == 100);
    CHECK(a.log.back().iteration == 2000);
    CHECK(a.test_error <= 0.05);
}

TEST_CASE("fit input validation") {
    const SparsityVector s{{2.0}, 1};
    CHECK_THROWS_AS(fit({{s, 1.0, 1, 0.0}}, EnergyFitConfig{}), InvalidArgument);
    CHECK_THROWS_AS(fit({{s, 1.0, 1, 0.0}, {s, 1.2, 1, 0.0}}, EnergyFitConfig{}), InvalidArgument);
    CHECK_THROWS_AS(fit({}, EnergyFitConfig{}), InvalidArgument);
}

TEST_CASE("split is a seeded partition") {
    std::vector<EnergySample> samples;
    for (int k = 0; k < 10; ++k) samples.push_back({SparsityVector{{static_cast<double>(k + 1)}, 1}, 1.0 + k, 1, 0.0});
    const auto [a, b] = split(samples, 0.2, 1);
    CHECK(a.size() == 8);
    CHECK(b.size() == 2);
    std::vector<double> all;
    for (const auto& s : a) all.push_back(s.s.layers[0]);
    for (const auto& s : b) all.push_back(s.s.layers[0]);
    std::sort(all.begin(), all.end());
    for (int k = 0; k < 10; ++k) CHECK(all[static_cast<std::size_t>(k)] == k + 1);
    CHECK(split(samples, 0.2, 1).second == b);
}

TEST_CASE("profile table round trips losslessly") {
    TempDir dir("profile");
    Profile p;
    p.meta = {{"seed", "4"}, {"oracle", "simulated"}};
    p.num_layers = 2;
    p.samples = {{SparsityVector{{1, 3}, 4}, 0.1 + 0.2, 3, 1.0 / 3.0}, {SparsityVector{{2, 2}, 4}, 1e-300, 1, 0.0}};
    write_profile(dir.file("p.tsv"), p);
    const auto back = read_profile(dir.file("p.tsv"));
    CHECK(back.meta == p.meta);
    CHECK(back.num_layers == 2);
    CHECK(back.samples == p.samples);
    const auto text = slurp(dir.file("p.tsv"));
    CHECK(text.rfind("# ecc-profile format_version=1", 0) == 0);
    CHECK(text.find("s1\ts2\ts_out\tenergy\ttrials\tstdev\n") != std::string::npos);

    spit(dir.file("torn.tsv"), text + "1\t2\t4\t0.5");
    CHECK_THROWS_AS(read_profile(dir.file("torn.tsv")), IoError);
    CHECK(read_profile(dir.file("torn.tsv"), true).samples == p.samples);
}

TEST_CASE("energy model file round trips") {
    TempDir dir("model");
    EnergyModelFile f;
    f.model = {0.05, {1e-3, 2.5e-4}};
    f.feature_scale = {10.0, 20.0};
    f.energy_scale = 0.3;
    f.fit_meta = {{"seed", 1}, {"iterations", 10000}};
    write_energy_model(dir.file("m.json"), f);
    const auto back = read_energy_model(dir.file("m.json"));
    CHECK(back.model == f.model);
    CHECK(back.feature_scale == f.feature_scale);
    CHECK(back.fit_meta == f.fit_meta);
    CHECK(nlohmann::json::parse(slurp(dir.file("m.json"))).at("format_version") == 1);
}

TEST_CASE("exchange request round trips") {
    const auto arch = toy_arch();
    const SparsityVector s{{2, 5, 9, 17}, 4};
    const auto j = make_exchange(arch, s, 99);
    const auto req = parse_exchange(j);
    CHECK(req.arch == arch);
    CHECK(req.s == s);
    CHECK(req.trial_seed == 99);
    CHECK(j.at("pruned_architecture").at("layers").at(1).at("c") == 5);
}

TEST_CASE("external command device") {
    const auto arch = toy_arch();
    const SparsityVector s{{2, 5, 9, 17}, 4};
    SUBCASE("constant output") {
        ExternalCommandDevice dev(arch, {"echo 0.125", 10.0, "/tmp"});
        CHECK(dev.measure(s, 1) == 0.125);
    }
    SUBCASE("placeholder and environment name the exchange file") {
        ExternalCommandDevice dev(arch, {"grep -q pruned_architecture {input} && cmp -s {input} \"$ECC_EXCHANGE_FILE\" && echo 2.5", 10.0, "/tmp"});
        CHECK(dev.measure(s, 1) == 2.5);
    }
    SUBCASE("nonzero exit carries the code") {
        ExternalCommandDevice dev(arch, {"exit 7", 10.0, "/tmp"});
        try {
            dev.measure(s, 1);
            FAIL("expected failure");
        } catch (const OracleError& e) {
            CHECK(e.kind() == OracleError::Kind::NonzeroExit);
            CHECK(e.exit_code() == 7);
            CHECK(e.code() == ErrorCode::Oracle);
        }
    }
    SUBCASE("unparseable output") {
        ExternalCommandDevice dev(arch, {"echo joules", 10.0, "/tmp"});
        try {
            dev.measure(s, 1);
            FAIL("expected failure");
        } catch (const OracleError& e) {
            CHECK(e.kind() == OracleError::Kind::Unparseable);
        }
    }
    SUBCASE("timeout") {
        ExternalCommandDevice dev(arch, {"sleep 5; echo 1", 0.3, "/tmp"});
        try {
            dev.measure(s, 1);
            FAIL("expected failure");
        } catch (const OracleError& e) {
            CHECK(e.kind() == OracleError::Kind::Timeout);
        }
    }
    SUBCASE("collect attaches the failing sample") {
        ExternalCommandDevice dev(arch, {"exit 3", 10.0, "/tmp"});
        try {
            collect(dev, {s, s}, 1, 1);
            FAIL("expected failure");
        } catch (const OracleError& e) {
            REQUIRE(e.sample().has_value());
            CHECK(*e.sample() == s);
            CHECK(e.sample_index() == std::optional<std::size_t>(0));
        }
    }
}

TEST_CASE("single real parsing") {
    double v = 0.0;
    CHECK(parse_single_real("  3.5e-2\n", v));
    CHECK(v == 0.035);
    CHECK_FALSE(parse_single_real("1 2", v));
    CHECK_FALSE(parse_single_real("", v));
    CHECK_FALSE(parse_single_real("nan", v));
}

}
