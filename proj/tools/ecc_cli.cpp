// Command-line front end. Talks to the library only through the C API.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ecc/ecc.h"

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> budget;
    std::string output_dir;
    std::vector<std::string> overrides;
    bool quiet = false;
};

void print_log(const char* msg, void*) { std::printf("%s\n", msg); }

int exit_code(ecc_status st) {
    if (st == ECC_OK) return 0;
    std::fprintf(stderr, "ecc: %s: %s\n", ecc_status_name(st), ecc_last_error());
    const int code = static_cast<int>(st);
    return code <= 4 ? code : 1;
}

class PipelineHandle {
public:
    ~PipelineHandle() { ecc_pipeline_free(p_); }
    ecc_status open(const Common& c) {
        ecc_status st = c.config.empty() ? ecc_pipeline_from_json(nullptr, ".", &p_) : ecc_pipeline_open(c.config.c_str(), &p_);
        if (st != ECC_OK) return st;
        if (c.seed && (st = ecc_pipeline_set_seed(p_, *c.seed)) != ECC_OK) return st;
        if (c.budget && (st = ecc_pipeline_set_budget(p_, *c.budget)) != ECC_OK) return st;
        if (!c.output_dir.empty() && (st = ecc_pipeline_set_output_dir(p_, std::filesystem::absolute(c.output_dir).c_str())) != ECC_OK) {
            return st;
        }
        for (const auto& kv : c.overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) {
                std::fprintf(stderr, "ecc: --set expects key=value, got '%s'\n", kv.c_str());
                return ECC_ERR_INVALID_ARGUMENT;
            }
            st = ecc_pipeline_set_option(p_, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
            if (st != ECC_OK) return st;
        }
        return ecc_pipeline_set_logger(p_, c.quiet ? nullptr : print_log, nullptr);
    }
    ecc_pipeline* get() const { return p_; }

private:
    ecc_pipeline* p_ = nullptr;
};

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void add_common(CLI::App* sub, Common& c, bool with_budget = false) {
    sub->add_option("--config,-c", c.config, "experiment config (JSON); built-in toy experiment if omitted");
    sub->add_option("--seed", c.seed, "override the config seed");
    sub->add_option("--output-dir,-o", c.output_dir, "override the artifact directory");
    sub->add_flag("--quiet,-q", c.quiet, "suppress progress output");
    sub->add_option("--set", c.overrides, "override a config key, e.g. --set solver.rho1=10")->allow_extra_args(false);
    if (with_budget) sub->add_option("--budget", c.budget, "energy budget in joules");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-constrained channel pruning toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ecc_version()));

    Common common;
    bool resume = false;
    std::string profile_path, model_path, dense_path, checkpoint_path, instances, request;
    double perturbation = 0.0;

    auto* profile = app.add_subcommand("profile", "measure the energy of sampled channel counts");
    add_common(profile, common);
    profile->add_flag("--resume", resume, "continue an interrupted profile");

    auto* fit = app.add_subcommand("fit-energy", "fit the bilinear energy model to a profile");
    add_common(fit, common);
    fit->add_option("--profile", profile_path, "profile table (default: output dir)");

    auto* train = app.add_subcommand("train", "train the dense network");
    add_common(train, common);

    auto* compress = app.add_subcommand("compress", "prune the dense network under an energy budget");
    add_common(compress, common, true);
    compress->add_option("--model", model_path, "energy model file");
    compress->add_option("--dense", dense_path, "dense checkpoint");

    auto* finetune = app.add_subcommand("finetune", "fine-tune a pruned checkpoint with its mask fixed");
    add_common(finetune, common);
    finetune->add_option("--checkpoint", checkpoint_path, "compressed checkpoint");

    auto* evaluate = app.add_subcommand("evaluate", "accuracy and energy report for a checkpoint");
    add_common(evaluate, common);
    evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint (default: fine-tuned)");
    evaluate->add_option("--model", model_path, "energy model file");

    auto* verify = app.add_subcommand("verify", "check the proximal step and energy gradient against references");
    verify->add_option("instances", instances, "instance file (JSON)")->required()->check(CLI::ExistingFile);
    verify->add_option("--perturb-threshold", perturbation, "shift the solver threshold (negative control)");
    verify->add_flag("--quiet,-q", common.quiet, "print only the summary line");

    auto* measure = app.add_subcommand("measure", "answer an exchange request with the simulated device");
    add_common(measure, common);
    measure->add_option("request", request, "exchange request file")->required();

    auto* run_all = app.add_subcommand("run-all", "run every stage in order");
    add_common(run_all, common, true);

    auto* show = app.add_subcommand("show-config", "print the effective config after overrides");
    add_common(show, common, true);

    CLI11_PARSE(app, argc, argv);

    if (verify->parsed()) {
        char* text = nullptr;
        std::size_t cases = 0, failed = 0;
        const auto st = ecc_verify(instances.c_str(), perturbation, &text, &cases, &failed);
        if (st != ECC_OK) return exit_code(st);
        if (common.quiet) {
            std::printf("%zu/%zu cases passed\n", cases - failed, cases);
        } else {
            std::fputs(text, stdout);
        }
        ecc_string_free(text);
        return failed == 0 ? 0 : 1;
    }

    if (measure->parsed() || show->parsed()) common.quiet = true;
    PipelineHandle ph;
    if (const auto st = ph.open(common); st != ECC_OK) return exit_code(st);
    ecc_pipeline* p = ph.get();

    ecc_status st = ECC_OK;
    if (profile->parsed()) {
        st = ecc_pipeline_profile(p, resume ? 1 : 0);
    } else if (fit->parsed()) {
        st = ecc_pipeline_fit_energy(p, or_null(profile_path), nullptr, nullptr);
    } else if (train->parsed()) {
        st = ecc_pipeline_train(p);
    } else if (compress->parsed()) {
        st = ecc_pipeline_compress(p, or_null(model_path), or_null(dense_path), nullptr);
    } else if (finetune->parsed()) {
        st = ecc_pipeline_finetune(p, or_null(checkpoint_path), nullptr, nullptr);
    } else if (evaluate->parsed()) {
        st = ecc_pipeline_evaluate(p, or_null(checkpoint_path), or_null(model_path), nullptr);
    } else if (measure->parsed()) {
        double energy = 0.0;
        st = ecc_pipeline_measure(p, request.c_str(), &energy);
        if (st == ECC_OK) std::printf("%.17g\n", energy);
    } else if (show->parsed()) {
        char* json = nullptr;
        st = ecc_pipeline_config_json(p, &json);
        if (st == ECC_OK) std::printf("%s\n", json);
        ecc_string_free(json);
    } else if (run_all->parsed()) {
        st = ecc_pipeline_run_all(p);
    }
    return exit_code(st);
}
