// Acceptance run: one PASS/FAIL line per criterion with the measured value, its tolerance and the
// wall time. Exit status is nonzero if any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ecc/checkpoint.hpp"
#include "ecc/dataset.hpp"
#include "ecc/energy_io.hpp"
#include "ecc/errors.hpp"
#include "ecc/oracles.hpp"
#include "ecc/pipeline.hpp"
#include "ecc/solver.hpp"
#include "support.hpp"

using namespace ecc;
using namespace ecc::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string measured;
    std::string tolerance;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int failures = 0;
std::map<int, std::string> lines;  // printed in criterion order once everything has run

void report(int id, const std::string& title, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.passed = false;
        out.measured = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= limit_seconds;
    const bool ok = out.passed && in_time;
    if (!ok) ++failures;
    char buf[1024];
    std::snprintf(buf, sizeof buf, "criterion %d: %s  %s  measured=%s  tolerance=%s  time=%.1fs/%.0fs%s", id,
                  ok ? "PASS" : "FAIL", title.c_str(), out.measured.c_str(), out.tolerance.c_str(), secs, limit_seconds,
                  in_time ? "" : " (over time limit)");
    lines[id] = buf;
    std::fprintf(stderr, "[done] %s\n", buf);
}

Pipeline toy_pipeline(const std::string& out_dir) {
    auto cfg = default_config();
    cfg["output_dir"] = out_dir;
    return Pipeline(cfg);
}

bool same_bytes(const std::string& a, const std::string& b) {
    return fs::exists(a) && fs::exists(b) && slurp(a) == slurp(b);
}

void copy_stage_inputs(const std::string& from, const std::string& to) {
    fs::create_directories(to);
    for (const char* name : {"energy_model.json", "dense.ckpt"}) {
        fs::copy_file(fs::path(from) / name, fs::path(to) / name, fs::copy_options::overwrite_existing);
    }
}

}  // namespace

int main() {
    TempDir root("acceptance");
    const auto dir = [&](const std::string& name) { return root.file(name); };

    report(1, "energy model relative test error, 1% noise, 2000 samples", 120.0, [&] {
        auto p = toy_pipeline(dir("c1"));
        p.profile();
        const auto fit = p.fit_energy();
        const auto meta = read_energy_model(fit.model_path).fit_meta;
        const bool split_ok = meta.at("train_samples") == 1600 && meta.at("test_samples") == 400;
        return Outcome{split_ok && fit.test_error <= 0.05,
                       fmt(fit.test_error) + (split_ok ? " (1600/400)" : " (wrong split)"), "<=0.05"};
    });

    report(2, "noise-free fit vs nonnegative least squares", 60.0, [&] {
        const auto arch = toy_pipeline(dir("c2")).architecture();
        SimulatedDeviceConfig dc;
        dc.noise_sigma = 0.0;
        SimulatedDevice dev(arch, dc);
        const auto samples = collect(dev, sample_sparsities(arch, 2000, 21), 1, 22);
        const auto [train, test] = split(samples, 0.2, 23);
        EnergyFitConfig fc;
        fc.iterations = 10000;
        const auto fitted = fit(train, fc, &test).model;
        const auto oracle = nnls_bilinear(train);
        std::vector<double> got{fitted.a0};
        got.insert(got.end(), fitted.a.begin(), fitted.a.end());
        double worst = 0.0;
        for (std::size_t j = 0; j < got.size(); ++j) {
            worst = std::max(worst, std::abs(got[j] - oracle[j]) / std::max(std::abs(oracle[j]), 1e-300));
        }
        return Outcome{worst <= 1e-3, fmt(worst) + " (max per-coefficient relative)", "<=1e-3"};
    });

    report(3, "proximal step vs exhaustive search, 500 instances", 60.0, [&] {
        std::mt19937_64 rng(2024);
        const double alphas[] = {1e-3, 1e-1, 1.0};
        const double ys[] = {0.0, 0.5, 5.0};
        std::size_t failed = 0;
        double worst_gap = 0.0;
        for (int k = 0; k < 500; ++k) {
            const std::size_t c = 1 + rng() % 10;
            const double alpha = alphas[rng() % 3];
            const double y = ys[rng() % 3];
            const double s = static_cast<double>(1 + rng() % c);
            const auto vc = verify_prox("p" + std::to_string(k), random_prox_instance(rng(), c, alpha, y, s), {});
            if (!vc.passed) ++failed;
            worst_gap = std::max(worst_gap, std::abs(vc.gap));
        }
        return Outcome{failed == 0, std::to_string(failed) + " mismatches, max |objective gap| " + fmt(worst_gap),
                       "0 mismatches, gap<=1e-8"};
    });

    report(4, "gradient checks: backprop and dE/ds vs central differences", 120.0, [&] {
        double worst_net = 0.0;
        for (int k = 0; k < 20; ++k) {
            const std::uint64_t seed = 100 + static_cast<std::uint64_t>(k);
            Architecture arch;
            if (k % 2 == 0) {
                arch = Architecture{{3, 5, 5}, {conv(4, 3, 3, 1 + k % 3 / 2, 1), fc(5, 4), fc(3, 5, Activation::None)}};
            } else if (k % 4 == 1) {
                arch = Architecture{{2, 4, 4}, {conv(3, 2, 3, 1, 0), fc(4, 3, Activation::None)}};
            } else {
                arch = Architecture{{6, 1, 1}, {fc(7, 6), fc(4, 7, Activation::None)}};
            }
            auto net = make_network(arch, seed);
            randomize(net, seed, 0.5);
            const auto batch = random_batch(arch.input, 3, seed);
            std::vector<int> labels;
            for (int n = 0; n < 3; ++n) labels.push_back(static_cast<int>((seed + n) % arch.n_out()));
            double err = 0.0;
            if (k % 3 == 0) {
                auto teacher = make_network(arch, seed + 1000);
                randomize(teacher, seed + 1000, 0.5);
                const KnowledgeDistillation kd{forward(teacher, batch), 0.5, 4.0};
                err = network_gradient_error(net, batch, labels, &kd);
            } else {
                err = network_gradient_error(net, batch, labels);
            }
            worst_net = std::max(worst_net, err);
        }
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double worst_energy = 0.0;
        for (int k = 0; k < 100; ++k) {
            const std::size_t layers = 1 + rng() % 6;
            BilinearEnergyModel m{u(rng), {}};
            SparsityVector s{{}, 1 + rng() % 16};
            for (std::size_t j = 0; j < layers; ++j) {
                m.a.push_back(u(rng) * 1e-2);
                s.layers.push_back(1.0 + 63.0 * u(rng));
            }
            worst_energy = std::max(worst_energy, verify_energy_gradient("e", m, s, 1e-3, {}).gap);
        }
        return Outcome{worst_net <= 1e-4 && worst_energy <= 1e-9,
                       "network " + fmt(worst_net) + ", energy " + fmt(worst_energy), "network<=1e-4, energy<=1e-9"};
    });

    // Two full runs of the shipped toy task; the first also feeds criteria 5, 6, 8 and 9.
    const auto run_a = dir("run_a"), run_b = dir("run_b");
    report(7, "determinism of two full pipeline runs", 600.0, [&] {
        toy_pipeline(run_a).run_all();
        toy_pipeline(run_b).run_all();
        std::vector<std::string> differing;
        for (const char* name : {"profile.tsv", "energy_model.json", "fit_report.tsv", "dense.ckpt", "compressed.ckpt",
                                 "trace.tsv", "finetuned.ckpt", "evaluation.json"}) {
            if (!same_bytes(run_a + "/" + name, run_b + "/" + name)) differing.push_back(name);
        }
        std::string measured = differing.empty() ? "8/8 artifacts byte-identical" : "differs:";
        for (const auto& d : differing) measured += " " + d;
        return Outcome{differing.empty(), measured, "all identical"};
    });

    struct BudgetRun {
        double fraction = 0.0;
        bool ok = false;
        double accuracy = 0.0;
    };
    std::vector<BudgetRun> runs;
    double dense_accuracy = 0.0;
    report(5, "solver contract at 90/75/60% budgets", 600.0, [&] {
        std::ostringstream measured;
        bool all_ok = true;
        {
            auto p = toy_pipeline(run_a);
            dense_accuracy = accuracy(load_checkpoint(p.dense_checkpoint_path()).net, p.test_set());
        }
        for (double f : {0.9, 0.75, 0.6}) {
            const auto out = dir("c5_" + std::to_string(static_cast<int>(f * 100)));
            copy_stage_inputs(run_a, out);
            auto p = toy_pipeline(out);
            p.set_option("solver.budget_fraction", fmt(f));
            BudgetRun br{f};
            std::string why;
            try {
                const auto summary = p.compress();
                const auto trace = read_trace(p.trace_path());
                bool ok = summary.final_energy <= summary.budget_joules;
                if (!ok) why = "over budget";
                for (std::size_t u = 0; u < summary.phi.size(); ++u) {
                    if (static_cast<double>(summary.phi[u]) > summary.s[u]) ok = false, why = "phi > s";
                }
                for (std::size_t k = 1; k < trace.size(); ++k) {
                    for (std::size_t u = 0; u < trace[k].s.size(); ++u) {
                        if (trace[k].s[u] > trace[k - 1].s[u]) ok = false, why = "s increased";
                    }
                    if (trace[k].energy > trace[k - 1].energy) ok = false, why = "energy increased";
                }
                for (const auto& row : trace) {
                    if (row.z < 0.0 || row.max_y < 0.0) ok = false, why = "negative dual";
                }
                br.ok = ok;
                br.accuracy = p.finetune().accuracy_after;
                measured << " " << static_cast<int>(f * 100) << "%:" << summary.iterations << "it,E/budget="
                         << fmt(summary.final_energy / summary.budget_joules) << (ok ? "" : "[" + why + "]");
            } catch (const std::exception& e) {
                measured << " " << static_cast<int>(f * 100) << "%:" << e.what();
            }
            all_ok = all_ok && br.ok;
            runs.push_back(br);
        }
        return Outcome{all_ok, measured.str().substr(1), "E<=budget, phi<=s, monotone trace, duals>=0"};
    });

    report(6, "accuracy after fine-tuning: 90% vs 60% and vs dense", 600.0, [&] {
        if (runs.size() != 3 || !runs[0].ok || !runs[2].ok) return Outcome{false, "budget runs unavailable", ""};
        const double a90 = runs[0].accuracy, a75 = runs[1].accuracy, a60 = runs[2].accuracy;
        const bool ok = a90 >= a60 - 0.02 && a90 >= dense_accuracy - 0.05;
        return Outcome{ok,
                       "acc90=" + fmt(a90) + " acc75=" + fmt(a75) + " acc60=" + fmt(a60) + " dense=" + fmt(dense_accuracy),
                       "acc90>=acc60-0.02, acc90>=dense-0.05"};
    });

    report(8, "command-line compress with an infeasible budget", 60.0, [&] {
        const auto out = dir("c8");
        copy_stage_inputs(run_a, out);
        const std::string cmd = std::string("'") + ECC_CLI_PATH + "' compress -q -o '" + out + "' --budget 1e-9 2>/dev/null";
        const int raw = std::system(cmd.c_str());
        const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        const bool no_trace = !fs::exists(out + "/trace.tsv") && !fs::exists(out + "/compressed.ckpt");
        return Outcome{code == 2 && no_trace,
                       "exit " + std::to_string(code) + (no_trace ? ", no trace written" : ", trace written"),
                       "exit 2, no trace"};
    });

    report(9, "slack constraints: 50 solver iterations equal plain Adam", 120.0, [&] {
        auto p = toy_pipeline(run_a);
        const auto dense = load_checkpoint(p.dense_checkpoint_path()).net;
        const auto model = read_energy_model(p.energy_model_path()).model;
        SparsityVector s{{}, dense.n_out()};
        const auto phi0 = network_sparsity(dense);
        for (auto v : phi0) s.layers.push_back(static_cast<double>(v));
        auto cfg = p.solver_config(1.5 * eval(model, s));
        cfg.kd_weight = 0.0;
        const std::vector<double> lbs(dense.num_layers(), 1.0);

        Network a = dense, b = dense;
        AdamState sa(a), sb(b);
        DualState duals{std::vector<double>(dense.num_layers(), 0.0), 0.0};
        DatasetStream stream_a(p.train_set(), 64, 5), stream_b(p.train_set(), 64, 5);
        const SparsityVector s_start = s;
        for (int k = 0; k < 50; ++k) {
            auto [xa, la] = stream_a.next();
            auto [xb, lb] = stream_b.next();
            const auto step = primal_w_step(a, xa, la, s.layers, duals, cfg, sa);
            const auto phi = network_sparsity(a);
            s = sparsity_step(s, phi, duals, model, cfg, 1e-3, lbs);
            duals = dual_step(phi, s, duals, model, cfg, &step.scores);
            adam_step(b, sb, loss_and_grad(b, xb, lb).grads, cfg.adam);
        }
        std::size_t differing = 0;
        for (std::size_t u = 0; u < a.num_layers(); ++u) {
            if (!(a.layers[u].weight == b.layers[u].weight) || a.layers[u].bias != b.layers[u].bias) ++differing;
        }
        const bool duals_idle = s.layers == s_start.layers && duals.z == 0.0 &&
                                std::all_of(duals.y.begin(), duals.y.end(), [](double y) { return y == 0.0; });
        return Outcome{differing == 0 && duals_idle,
                       std::to_string(differing) + " layers differ" + (duals_idle ? ", s and duals unchanged" : ", s or duals moved"),
                       "bitwise equal"};
    });

    for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", failures);
    return failures == 0 ? 0 : 1;
}
