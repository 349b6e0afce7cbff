#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecc/dataset.hpp"
#include "ecc/energy.hpp"
#include "ecc/external_device.hpp"
#include "ecc/network.hpp"
#include "ecc/oracles.hpp"
#include "ecc/solver.hpp"

namespace ecc {

inline constexpr int kConfigFormatVersion = 1;

/// Built-in toy experiment: two convolutions and two fully-connected layers on a synthetic
/// 4-class 3x8x8 image task.
nlohmann::json default_config();

/// Orchestrates profile -> fit-energy -> train -> compress -> finetune -> evaluate from one JSON
/// config document. Relative paths resolve against base_dir. Artifacts land in output_dir and carry
/// the config hash and seeds; they contain no timestamps, so reruns are byte-identical.
class Pipeline {
public:
    using Logger = std::function<void(const std::string&)>;

    Pipeline(nlohmann::json config, std::string base_dir = ".");
    static Pipeline from_file(const std::string& path);

    void set_seed(std::uint64_t seed);
    void set_budget_joules(double joules);
    void set_output_dir(const std::string& dir);
    /// Overrides one config key given as a dotted path ("solver.rho1"). The value is parsed as
    /// JSON when possible and taken as a string otherwise.
    void set_option(const std::string& dotted_key, const std::string& value);
    void set_logger(Logger logger) { logger_ = std::move(logger); }

    const nlohmann::json& config() const { return config_; }
    std::uint64_t seed() const;
    std::string config_hash() const;
    std::string output_dir() const;
    std::string output_path(const std::string& name) const;
    Architecture architecture() const;

    std::string profile_path() const { return output_path("profile.tsv"); }
    std::string energy_model_path() const { return output_path("energy_model.json"); }
    std::string fit_report_path() const { return output_path("fit_report.tsv"); }
    std::string dense_checkpoint_path() const { return output_path("dense.ckpt"); }
    std::string compressed_checkpoint_path() const { return output_path("compressed.ckpt"); }
    std::string trace_path() const { return output_path("trace.tsv"); }
    std::string finetuned_checkpoint_path() const { return output_path("finetuned.ckpt"); }
    std::string evaluation_path() const { return output_path("evaluation.json"); }

    /// Measures the sampled sparsities and writes the profile table row by row. With resume set,
    /// rows already present in a matching profile are kept and sampling continues after them.
    std::string profile(bool resume = false);

    struct FitSummary {
        double train_error = 0.0;
        double test_error = 0.0;
        std::string model_path;
    };
    FitSummary fit_energy(const std::string& profile_path = "");

    /// Trains the dense network from scratch.
    std::string train();

    struct CompressSummary {
        std::size_t iterations = 0;
        double budget_joules = 0.0;
        double dense_energy = 0.0;
        double final_energy = 0.0;
        std::vector<double> s;
        std::vector<std::size_t> phi;
    };
    CompressSummary compress(const std::string& model_path = "", const std::string& dense_path = "");

    struct FinetuneSummary {
        double accuracy_before = 0.0;
        double accuracy_after = 0.0;
        std::string checkpoint_path;
    };
    FinetuneSummary finetune(const std::string& checkpoint_path = "");

    /// Accuracy, confusion matrix, per-layer phi, predicted and measured energy.
    nlohmann::json evaluate(const std::string& checkpoint_path = "", const std::string& model_path = "");

    /// Runs every stage in order.
    void run_all();

    /// Energy of the configured simulated device for an exchange request file.
    double measure_exchange(const std::string& exchange_path) const;

    std::unique_ptr<EnergyOracle> make_oracle() const;
    const Dataset& train_set();
    const Dataset& test_set();

    SolverConfig solver_config(double budget_joules) const;
    FinetuneConfig finetune_config() const;

private:
    void log(const std::string& msg) const;
    std::string resolve(const std::string& path) const;
    std::uint64_t stage_seed(const std::string& stage) const;
    nlohmann::json artifact_meta(const std::string& stage) const;
    std::string profile_hash() const;
    void load_datasets();

    nlohmann::json config_;
    std::string base_dir_;
    Logger logger_;
    std::optional<Dataset> train_;
    std::optional<Dataset> test_;
};

struct VerifyReport {
    std::vector<VerifyCase> cases;
    bool all_passed() const;
    std::string to_text() const;
};

VerifyReport run_verify(const std::string& instance_path, double threshold_perturbation = 0.0);

}  // namespace ecc
