#include "ecc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecc/checkpoint.hpp"
#include "ecc/energy_io.hpp"
#include "ecc/hash.hpp"

namespace ecc {

namespace fs = std::filesystem;

nlohmann::json default_config() {
    return nlohmann::json::parse(R"({
  "format_version": 1,
  "seed": 42,
  "output_dir": "ecc_out",
  "architecture": {
    "input": {"c": 3, "h": 8, "w": 8},
    "layers": [
      {"kind": "conv", "d": 8, "kernel": 3, "stride": 1, "padding": 1, "activation": "relu"},
      {"kind": "conv", "d": 16, "kernel": 3, "stride": 2, "padding": 1, "activation": "relu"},
      {"kind": "fc", "d": 32, "activation": "relu"},
      {"kind": "fc", "d": 4, "activation": "none"}
    ]
  },
  "dataset": {
    "format": "synthetic",
    "classes": 4,
    "noise": 1.0,
    "template_seed": 1,
    "train_samples": 2000,
    "test_samples": 1000
  },
  "oracle": {
    "kind": "simulated",
    "mode": "bilinear",
    "noise_sigma": 0.01,
    "static_joules": 0.05,
    "joules_per_mac": 1e-5,
    "saturation": 0.5,
    "layer_overhead": 0.01,
    "command": "",
    "timeout_seconds": 60
  },
  "profile": {"samples": 2000, "trials": 3, "test_fraction": 0.2},
  "energy_fit": {"iterations": 10000, "learning_rate": 0.001, "weight_decay": 0.0, "log_every": 100},
  "train": {"iterations": 1500, "batch_size": 64, "learning_rate": 0.003},
  "solver": {
    "budget_fraction": 0.6,
    "alpha": 0.001,
    "beta": 0.0,
    "beta_target_fraction": 0.4,
    "rho1": 1.0,
    "rho2": 1.0,
    "epsilon": 0.001,
    "budget_units": true,
    "lower_bound_fraction": 0.0,
    "max_iterations": 3000,
    "grace_iterations": 0,
    "batch_size": 64,
    "kd_weight": 0.5,
    "kd_temperature": 4.0
  },
  "evaluate": {"trials": 30},
  "finetune": {
    "iterations": 500,
    "batch_size": 64,
    "learning_rate": 0.001,
    "kd_weight": 0.5,
    "kd_temperature": 4.0,
    "cosine_decay": false
  }
})");
}

Pipeline::Pipeline(nlohmann::json config, std::string base_dir) : base_dir_(std::move(base_dir)) {
    config_ = default_config();
    config_.merge_patch(config);
    if (config_.value("format_version", 0) != kConfigFormatVersion) {
        throw InvalidArgument("unsupported config format_version");
    }
    architecture();  // validates
}

Pipeline Pipeline::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("'" + path + "': " + e.what());
    }
    const auto dir = fs::path(path).parent_path();
    return Pipeline(std::move(j), dir.empty() ? "." : dir.string());
}

void Pipeline::set_seed(std::uint64_t seed) {
    config_["seed"] = seed;
    train_.reset();
    test_.reset();
}

void Pipeline::set_budget_joules(double joules) {
    if (!(joules > 0.0)) throw InvalidArgument("budget must be positive");
    config_["solver"]["budget_joules"] = joules;
}

void Pipeline::set_output_dir(const std::string& dir) { config_["output_dir"] = dir; }

void Pipeline::set_option(const std::string& dotted_key, const std::string& value) {
    if (dotted_key.empty()) throw InvalidArgument("empty option key");
    std::string pointer;
    std::size_t start = 0;
    while (start <= dotted_key.size()) {
        const auto dot = dotted_key.find('.', start);
        const auto part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw InvalidArgument("malformed option key '" + dotted_key + "'");
        pointer += "/" + part;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value;  // bare words are strings
    }
    auto updated = config_;
    updated[nlohmann::json::json_pointer(pointer)] = parsed;
    architecture_from_json(updated.at("architecture")).validate();
    config_ = std::move(updated);
    train_.reset();
    test_.reset();
}

std::uint64_t Pipeline::seed() const { return config_.at("seed").get<std::uint64_t>(); }

std::string Pipeline::config_hash() const {
    auto c = config_;
    c.erase("output_dir");
    return hex64(fnv1a64(c.dump()));
}

std::string Pipeline::profile_hash() const {
    nlohmann::json c{{"architecture", config_.at("architecture")},
                     {"oracle", config_.at("oracle")},
                     {"profile", config_.at("profile")},
                     {"seed", config_.at("seed")}};
    return hex64(fnv1a64(c.dump()));
}

std::string Pipeline::resolve(const std::string& path) const {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base_dir_) / path).lexically_normal().string();
}

std::string Pipeline::output_dir() const { return resolve(config_.at("output_dir").get<std::string>()); }

std::string Pipeline::output_path(const std::string& name) const { return (fs::path(output_dir()) / name).string(); }

Architecture Pipeline::architecture() const { return architecture_from_json(config_.at("architecture")); }

std::uint64_t Pipeline::stage_seed(const std::string& stage) const { return hash_combine(seed(), fnv1a64(stage)); }

nlohmann::json Pipeline::artifact_meta(const std::string& stage) const {
    return {{"stage", stage}, {"config_hash", config_hash()}, {"seed", seed()}, {"stage_seed", stage_seed(stage)}};
}

void Pipeline::log(const std::string& msg) const {
    if (logger_) logger_(msg);
}

void Pipeline::load_datasets() {
    if (train_ && test_) return;
    const auto& d = config_.at("dataset");
    const auto format = d.value("format", std::string("synthetic"));
    const auto arch = architecture();
    if (format == "synthetic") {
        SyntheticSpec spec;
        spec.shape = arch.input;
        spec.num_classes = d.value("classes", arch.n_out());
        spec.noise = d.value("noise", 1.0);
        spec.template_seed = d.value("template_seed", std::uint64_t{1});
        train_ = make_synthetic(spec, d.value("train_samples", std::size_t{2000}), stage_seed("dataset/train"));
        test_ = make_synthetic(spec, d.value("test_samples", std::size_t{1000}), stage_seed("dataset/test"));
    } else if (format == "columnar") {
        train_ = read_columnar(resolve(d.at("train").get<std::string>()), arch.input);
        test_ = read_columnar(resolve(d.at("test").get<std::string>()), arch.input);
    } else if (format == "raster") {
        train_ = read_raster(resolve(d.at("train").get<std::string>()));
        test_ = read_raster(resolve(d.at("test").get<std::string>()));
    } else {
        throw InvalidArgument("unknown dataset format '" + format + "'");
    }
    for (const Dataset* ds : {&*train_, &*test_}) {
        if (!(ds->shape == arch.input)) throw ShapeError("dataset sample shape does not match the architecture input");
        for (int label : ds->labels) {
            if (label < 0 || static_cast<std::size_t>(label) >= arch.n_out()) {
                throw InvalidArgument("dataset label " + std::to_string(label) + " exceeds network outputs");
            }
        }
        if (ds->size() == 0) throw InvalidArgument("dataset is empty");
    }
}

const Dataset& Pipeline::train_set() {
    load_datasets();
    return *train_;
}

const Dataset& Pipeline::test_set() {
    load_datasets();
    return *test_;
}

std::unique_ptr<EnergyOracle> Pipeline::make_oracle() const {
    const auto& o = config_.at("oracle");
    const auto kind = o.value("kind", std::string("simulated"));
    if (kind == "simulated") {
        SimulatedDeviceConfig cfg;
        cfg.mode = parse_cost_mode(o.value("mode", std::string("bilinear")));
        cfg.noise_sigma = o.value("noise_sigma", 0.0);
        cfg.static_joules = o.value("static_joules", cfg.static_joules);
        cfg.joules_per_mac = o.value("joules_per_mac", cfg.joules_per_mac);
        cfg.saturation = o.value("saturation", cfg.saturation);
        cfg.layer_overhead = o.value("layer_overhead", cfg.layer_overhead);
        cfg.seed = stage_seed("oracle");
        return std::make_unique<SimulatedDevice>(architecture(), cfg);
    }
    if (kind == "external") {
        ExternalCommandConfig cfg;
        cfg.command = o.value("command", std::string());
        cfg.timeout_seconds = o.value("timeout_seconds", 60.0);
        cfg.work_dir = o.value("work_dir", std::string("/tmp"));
        return std::make_unique<ExternalCommandDevice>(architecture(), cfg);
    }
    throw InvalidArgument("unknown oracle kind '" + kind + "'");
}

double Pipeline::measure_exchange(const std::string& exchange_path) const {
    const auto req = read_exchange(exchange_path);
    if (!(req.arch == architecture())) throw ShapeError("exchange architecture does not match the configured one");
    const auto& o = config_.at("oracle");
    if (o.value("kind", std::string("simulated")) != "simulated") {
        throw InvalidArgument("measure needs a simulated oracle in the config");
    }
    return make_oracle()->measure(req.s, req.trial_seed);
}

std::string Pipeline::profile(bool resume) {
    const auto arch = architecture();
    const auto& pc = config_.at("profile");
    const auto n = pc.value("samples", std::size_t{2000});
    const auto trials = pc.value("trials", std::size_t{1});
    if (n == 0) throw InvalidArgument("profile.samples must be positive");
    const auto samples = sample_sparsities(arch, n, stage_seed("profile/sample"));
    const std::uint64_t measure_seed = stage_seed("profile/measure");

    fs::create_directories(output_dir());
    const auto path = profile_path();
    const std::map<std::string, std::string> meta{{"config_hash", profile_hash()},
                                                  {"seed", std::to_string(seed())},
                                                  {"sample_seed", std::to_string(stage_seed("profile/sample"))},
                                                  {"measure_seed", std::to_string(measure_seed)},
                                                  {"trials", std::to_string(trials)},
                                                  {"oracle", config_.at("oracle").value("kind", std::string("simulated"))}};

    std::size_t done = 0;
    if (resume && fs::exists(path)) {
        const auto existing = read_profile(path, true);
        if (existing.meta != meta || existing.num_layers != arch.num_layers()) {
            throw InvalidArgument("cannot resume: '" + path + "' was produced by a different configuration");
        }
        for (const auto& row : existing.samples) {
            if (done >= n || !(row.s == samples[done])) {
                throw InvalidArgument("cannot resume: row " + std::to_string(done) + " does not match the sample plan");
            }
            ++done;
        }
        // Rewrite so a torn last line from an interrupted run disappears.
        write_profile(path, existing);
        log("resuming profile at sample " + std::to_string(done) + " of " + std::to_string(n));
    } else {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write profile '" + path + "'");
        out << profile_header(meta, arch.num_layers());
    }

    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append to profile '" + path + "'");
    auto oracle = make_oracle();
    try {
        collect(*oracle, samples, trials, measure_seed, done, [&](std::size_t, const EnergySample& s) {
            out << profile_row(s);
            out.flush();
        });
    } catch (const OracleError& e) {
        log(std::string("oracle failure: ") + e.what());
        throw;
    }
    out.close();

    const auto full = read_profile(path);
    double mean = 0.0;
    for (const auto& s : full.samples) mean += s.energy;
    mean /= static_cast<double>(full.samples.size());
    std::ostringstream summary;
    summary << "profiled " << full.samples.size() << " samples, mean energy " << format_real(mean) << " J";
    for (std::size_t u = 0; u < arch.num_layers(); ++u) {
        double lo = 1e300, hi = -1e300;
        for (const auto& s : full.samples) {
            lo = std::min(lo, s.s.layers[u]);
            hi = std::max(hi, s.s.layers[u]);
        }
        summary << "\n  layer " << u + 1 << ": s in [" << lo << ", " << hi << "] of " << arch.layers[u].c;
    }
    log(summary.str());
    return path;
}

Pipeline::FitSummary Pipeline::fit_energy(const std::string& profile_file) {
    const auto arch = architecture();
    const auto path = profile_file.empty() ? profile_path() : profile_file;
    const auto prof = read_profile(path);
    if (prof.num_layers != arch.num_layers()) throw ShapeError("profile layer count does not match the architecture");
    if (prof.samples.size() < 2) throw InvalidArgument("profile needs at least two rows to fit");

    const auto& pc = config_.at("profile");
    const auto& fc = config_.at("energy_fit");
    const auto [trainset, testset] = split(prof.samples, pc.value("test_fraction", 0.2), stage_seed("fit/split"));

    EnergyFitConfig cfg;
    cfg.iterations = fc.value("iterations", cfg.iterations);
    cfg.learning_rate = fc.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = fc.value("weight_decay", cfg.weight_decay);
    cfg.log_every = fc.value("log_every", cfg.log_every);
    cfg.seed = stage_seed("fit");
    const auto result = fit(trainset, cfg, &testset);

    fs::create_directories(output_dir());
    EnergyModelFile file;
    file.model = result.model;
    file.feature_scale = result.feature_scale;
    file.energy_scale = result.energy_scale;
    file.fit_meta = artifact_meta("fit-energy");
    file.fit_meta["iterations"] = cfg.iterations;
    file.fit_meta["learning_rate"] = cfg.learning_rate;
    file.fit_meta["weight_decay"] = cfg.weight_decay;
    file.fit_meta["train_samples"] = trainset.size();
    file.fit_meta["test_samples"] = testset.size();
    file.fit_meta["train_error"] = result.train_error;
    file.fit_meta["test_error"] = result.test_error;
    file.fit_meta["profile_config_hash"] = prof.meta.count("config_hash") ? prof.meta.at("config_hash") : "";
    write_energy_model(energy_model_path(), file);

    std::ofstream report(fit_report_path());
    if (!report) throw IoError("cannot write fit report");
    report << "# ecc-fit-report format_version=1 config_hash=" << config_hash() << " seed=" << seed() << "\n";
    report << "iteration\ttrain_mse\ttrain_error\ttest_error\n";
    for (const auto& row : result.log) {
        report << row.iteration << "\t" << format_real(row.train_mse) << "\t" << format_real(row.train_error) << "\t"
               << format_real(row.test_error) << "\n";
    }
    log("energy model fitted: train relative error " + format_real(result.train_error) + ", test relative error " +
        format_real(result.test_error));
    return {result.train_error, result.test_error, energy_model_path()};
}

std::string Pipeline::train() {
    const auto arch = architecture();
    const auto& tc = config_.at("train");
    const auto& train_data = train_set();
    Network net = make_network(arch, stage_seed("train/init"));
    DatasetStream stream(train_data, tc.value("batch_size", std::size_t{64}), stage_seed("train/batches"));
    FinetuneConfig cfg;
    cfg.iterations = tc.value("iterations", std::size_t{1500});
    cfg.adam.learning_rate = tc.value("learning_rate", 3e-3);
    const auto mask = full_mask(net);
    net = ecc::finetune(std::move(net), mask, stream, cfg);
    const double acc = accuracy(net, test_set());
    fs::create_directories(output_dir());
    auto meta = artifact_meta("train");
    meta["test_accuracy"] = acc;
    save_checkpoint(dense_checkpoint_path(), net, meta);
    log("dense network trained: test accuracy " + format_real(acc));
    return dense_checkpoint_path();
}

SolverConfig Pipeline::solver_config(double budget_joules) const {
    const auto& sc = config_.at("solver");
    SolverConfig cfg;
    cfg.budget_joules = budget_joules;
    cfg.adam.learning_rate = sc.value("alpha", 1e-3);
    cfg.beta = sc.value("beta", 0.0);
    cfg.beta_target_fraction = sc.value("beta_target_fraction", cfg.beta_target_fraction);
    cfg.rho1 = sc.value("rho1", cfg.rho1);
    cfg.rho2 = sc.value("rho2", 1.0);
    cfg.epsilon = sc.value("epsilon", 1e-3);
    cfg.budget_units = sc.value("budget_units", true);
    cfg.lower_bound_fraction = sc.value("lower_bound_fraction", 0.0);
    if (sc.contains("lower_bounds")) cfg.lower_bounds = sc.at("lower_bounds").get<std::vector<double>>();
    cfg.max_iterations = sc.value("max_iterations", std::size_t{3000});
    cfg.grace_iterations = sc.value("grace_iterations", std::size_t{0});
    cfg.kd_weight = sc.value("kd_weight", 0.0);
    cfg.kd_temperature = sc.value("kd_temperature", 4.0);
    return cfg;
}

FinetuneConfig Pipeline::finetune_config() const {
    const auto& fc = config_.at("finetune");
    FinetuneConfig cfg;
    cfg.iterations = fc.value("iterations", std::size_t{500});
    cfg.adam.learning_rate = fc.value("learning_rate", 1e-3);
    cfg.kd_weight = fc.value("kd_weight", 0.0);
    cfg.kd_temperature = fc.value("kd_temperature", 4.0);
    cfg.cosine_decay = fc.value("cosine_decay", false);
    return cfg;
}

Pipeline::CompressSummary Pipeline::compress(const std::string& model_file, const std::string& dense_file) {
    const auto model = read_energy_model(model_file.empty() ? energy_model_path() : model_file).model;
    const auto dense = load_checkpoint(dense_file.empty() ? dense_checkpoint_path() : dense_file).net;
    if (model.num_layers() != dense.num_layers()) {
        throw ShapeError("energy model layer count does not match the checkpoint");
    }
    SparsityVector dense_s{{}, dense.n_out()};
    for (auto p : network_sparsity(dense)) dense_s.layers.push_back(static_cast<double>(p));
    const double dense_energy = eval(model, dense_s);

    const auto& sc = config_.at("solver");
    const double budget = sc.contains("budget_joules") ? sc.at("budget_joules").get<double>()
                                                        : sc.value("budget_fraction", 0.6) * dense_energy;
    const auto cfg = solver_config(budget);
    log("compressing: dense estimate " + format_real(dense_energy) + " J, budget " + format_real(budget) + " J");

    DatasetStream stream(train_set(), sc.value("batch_size", std::size_t{64}), stage_seed("compress/batches"));
    fs::create_directories(output_dir());
    const std::string trace_meta = "config_hash=" + config_hash() + " seed=" + std::to_string(seed()) +
                                   " budget_joules=" + format_real(budget);
    CompressResult result;
    try {
        result = ecc::compress(dense, model, cfg, stream);
    } catch (const IterationLimitError& e) {
        write_trace(trace_path(), e.trace(), dense.num_layers(), trace_meta + " status=iteration_limit");
        log(e.what());
        throw;
    }
    write_trace(trace_path(), result.trace, dense.num_layers(), trace_meta + " status=success");
    auto meta = artifact_meta("compress");
    meta["budget_joules"] = budget;
    meta["energy_estimate"] = eval(model, result.s);
    meta["s"] = result.s.layers;
    meta["iterations"] = result.iterations;
    meta["beta"] = result.beta;
    save_checkpoint(compressed_checkpoint_path(), result.net, meta);

    CompressSummary summary{result.iterations, budget, dense_energy, eval(model, result.s), result.s.layers,
                            network_sparsity(result.net)};
    std::ostringstream msg;
    msg << "compressed in " << summary.iterations << " iterations: estimate " << format_real(summary.final_energy)
        << " J (budget " << format_real(budget) << " J), phi =";
    for (auto p : summary.phi) msg << " " << p;
    log(msg.str());
    return summary;
}

Pipeline::FinetuneSummary Pipeline::finetune(const std::string& checkpoint_file) {
    const auto loaded = load_checkpoint(checkpoint_file.empty() ? compressed_checkpoint_path() : checkpoint_file);
    const auto cfg = finetune_config();
    const auto mask = mask_from_zeros(loaded.net);
    std::optional<Network> teacher;
    if (cfg.kd_weight > 0.0 && fs::exists(dense_checkpoint_path())) {
        teacher = load_checkpoint(dense_checkpoint_path()).net;
        if (!(teacher->architecture() == loaded.net.architecture())) teacher.reset();
    }
    const auto& fc = config_.at("finetune");
    DatasetStream stream(train_set(), fc.value("batch_size", std::size_t{64}), stage_seed("finetune/batches"));
    FinetuneSummary summary;
    summary.accuracy_before = accuracy(loaded.net, test_set());
    Network tuned = ecc::finetune(loaded.net, mask, stream, cfg, teacher ? &*teacher : nullptr);
    summary.accuracy_after = accuracy(tuned, test_set());

    fs::create_directories(output_dir());
    auto meta = artifact_meta("finetune");
    meta["accuracy_before"] = summary.accuracy_before;
    meta["accuracy_after"] = summary.accuracy_after;
    meta["source"] = loaded.meta;
    save_checkpoint(finetuned_checkpoint_path(), tuned, meta);
    summary.checkpoint_path = finetuned_checkpoint_path();
    log("fine-tuned: test accuracy " + format_real(summary.accuracy_before) + " -> " +
        format_real(summary.accuracy_after));
    return summary;
}

nlohmann::json Pipeline::evaluate(const std::string& checkpoint_file, const std::string& model_file) {
    const auto ck = checkpoint_file.empty() ? finetuned_checkpoint_path() : checkpoint_file;
    const auto loaded = load_checkpoint(ck);
    const auto model_data = read_energy_model(model_file.empty() ? energy_model_path() : model_file);
    const auto& net = loaded.net;
    if (model_data.model.num_layers() != net.num_layers()) throw ShapeError("energy model does not match checkpoint");
    const auto& ds = test_set();
    if (!(ds.shape == net.input)) throw ShapeError("dataset does not match checkpoint input");

    const auto logits = forward(net, ds.all());
    const std::size_t k = net.n_out();
    std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t n = 0; n < ds.size(); ++n) {
        const auto pred = argmax_row(logits, n);
        confusion[static_cast<std::size_t>(ds.labels[n])][pred] += 1;
        if (static_cast<int>(pred) == ds.labels[n]) ++correct;
    }
    const auto phi = network_sparsity(net);
    SparsityVector s{{}, net.n_out()};
    for (auto p : phi) s.layers.push_back(std::max<double>(1.0, static_cast<double>(p)));
    const double predicted = eval(model_data.model, s);

    auto oracle = make_oracle();
    const auto trials = config_.at("evaluate").value("trials", std::size_t{30});
    const auto measured = collect(*oracle, {s}, trials, stage_seed("evaluate/measure")).front().energy;

    nlohmann::json report{{"format_version", 1},
                          {"checkpoint", fs::path(ck).filename().string()},
                          {"accuracy", static_cast<double>(correct) / static_cast<double>(ds.size())},
                          {"test_samples", ds.size()},
                          {"confusion", confusion},
                          {"phi", phi},
                          {"widths", [&] {
                               std::vector<std::size_t> w;
                               for (const auto& l : net.layers) w.push_back(l.spec.c);
                               return w;
                           }()},
                          {"predicted_energy", predicted},
                          {"measured_energy", measured},
                          {"relative_gap", std::abs(predicted - measured) / measured},
                          {"meta", artifact_meta("evaluate")}};
    fs::create_directories(output_dir());
    std::ofstream out(evaluation_path());
    out << report.dump(2) << "\n";

    std::ostringstream msg;
    msg << "accuracy " << format_real(report["accuracy"].get<double>()) << ", predicted energy " << format_real(predicted)
        << " J, measured " << format_real(measured) << " J\nlayer\tphi\twidth";
    for (std::size_t u = 0; u < phi.size(); ++u) msg << "\n" << u + 1 << "\t" << phi[u] << "\t" << net.layers[u].spec.c;
    log(msg.str());
    return report;
}

void Pipeline::run_all() {
    profile();
    fit_energy();
    train();
    compress();
    finetune();
    evaluate();
}

bool VerifyReport::all_passed() const {
    return std::all_of(cases.begin(), cases.end(), [](const VerifyCase& c) { return c.passed; });
}

std::string VerifyReport::to_text() const {
    std::ostringstream out;
    std::size_t passed = 0;
    for (const auto& c : cases) {
        out << (c.passed ? "PASS" : "FAIL") << "\t" << c.name << "\tgap=" << format_real(c.gap) << "\t" << c.detail << "\n";
        if (c.passed) ++passed;
    }
    out << passed << "/" << cases.size() << " cases passed\n";
    return out.str();
}

VerifyReport run_verify(const std::string& instance_path, double threshold_perturbation) {
    VerifyOptions opts;
    opts.threshold_perturbation = threshold_perturbation;
    return VerifyReport{verify_file(instance_path, opts)};
}

}  // namespace ecc
