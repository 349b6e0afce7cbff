#include "ecc/ecc.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "ecc/checkpoint.hpp"
#include "ecc/energy_io.hpp"
#include "ecc/pipeline.hpp"

struct ecc_pipeline {
    ecc::Pipeline impl;
};

struct ecc_energy_model {
    ecc::BilinearEnergyModel model;
};

struct ecc_network {
    ecc::Network net;
    nlohmann::json meta;
};

namespace {

thread_local std::string g_last_error;

ecc_status fail(ecc_status status, const char* msg) {
    g_last_error = msg;
    return status;
}

// Runs fn and converts any exception into a status code plus thread-local message.
template <class Fn>
ecc_status guarded(Fn&& fn) noexcept {
    try {
        g_last_error.clear();
        fn();
        return ECC_OK;
    } catch (const ecc::Error& e) {
        return fail(static_cast<ecc_status>(static_cast<int>(e.code())), e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(ECC_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(ECC_ERR_GENERIC, "out of memory");
    } catch (const std::exception& e) {
        return fail(ECC_ERR_GENERIC, e.what());
    } catch (...) {
        return fail(ECC_ERR_GENERIC, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

#define ECC_REQUIRE(cond, msg) \
    if (!(cond)) return fail(ECC_ERR_INVALID_ARGUMENT, msg)

ecc::SparsityVector make_s(const double* s, std::size_t n, std::size_t n_out) {
    return ecc::SparsityVector{std::vector<double>(s, s + n), n_out};
}

}  // namespace

extern "C" {

const char* ecc_last_error(void) { return g_last_error.c_str(); }

const char* ecc_version(void) { return "1.0.0"; }

const char* ecc_status_name(ecc_status status) {
    switch (status) {
        case ECC_OK: return "ok";
        case ECC_ERR_GENERIC: return "error";
        case ECC_ERR_INFEASIBLE: return "infeasible budget";
        case ECC_ERR_ITERATION_LIMIT: return "iteration limit";
        case ECC_ERR_ORACLE: return "oracle failure";
        case ECC_ERR_INVALID_ARGUMENT: return "invalid argument";
        case ECC_ERR_IO: return "i/o error";
        case ECC_ERR_SHAPE: return "shape mismatch";
        case ECC_ERR_NONFINITE: return "non-finite value";
    }
    return "unknown status";
}

void ecc_string_free(char* s) { std::free(s); }

ecc_status ecc_pipeline_open(const char* config_path, ecc_pipeline** out) {
    ECC_REQUIRE(config_path && out, "config path and output handle are required");
    *out = nullptr;
    return guarded([&] { *out = new ecc_pipeline{ecc::Pipeline::from_file(config_path)}; });
}

ecc_status ecc_pipeline_from_json(const char* json, const char* base_dir, ecc_pipeline** out) {
    ECC_REQUIRE(out, "output handle is required");
    *out = nullptr;
    return guarded([&] {
        auto cfg = json ? nlohmann::json::parse(json) : nlohmann::json::object();
        *out = new ecc_pipeline{ecc::Pipeline(std::move(cfg), base_dir ? base_dir : ".")};
    });
}

void ecc_pipeline_free(ecc_pipeline* p) { delete p; }

ecc_status ecc_pipeline_set_seed(ecc_pipeline* p, uint64_t seed) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] { p->impl.set_seed(seed); });
}

ecc_status ecc_pipeline_set_budget(ecc_pipeline* p, double joules) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] { p->impl.set_budget_joules(joules); });
}

ecc_status ecc_pipeline_set_output_dir(ecc_pipeline* p, const char* dir) {
    ECC_REQUIRE(p && dir, "null argument");
    return guarded([&] { p->impl.set_output_dir(dir); });
}

ecc_status ecc_pipeline_set_option(ecc_pipeline* p, const char* key, const char* value) {
    ECC_REQUIRE(p && key && value, "null argument");
    return guarded([&] { p->impl.set_option(key, value); });
}

ecc_status ecc_pipeline_set_logger(ecc_pipeline* p, ecc_log_fn fn, void* user) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] {
        if (!fn) {
            p->impl.set_logger({});
        } else {
            p->impl.set_logger([fn, user](const std::string& msg) { fn(msg.c_str(), user); });
        }
    });
}

ecc_status ecc_pipeline_config_json(const ecc_pipeline* p, char** out) {
    ECC_REQUIRE(p && out, "null argument");
    return guarded([&] { *out = dup_string(p->impl.config().dump(2)); });
}

ecc_status ecc_pipeline_config_hash(const ecc_pipeline* p, char** out) {
    ECC_REQUIRE(p && out, "null argument");
    return guarded([&] { *out = dup_string(p->impl.config_hash()); });
}

ecc_status ecc_pipeline_output_path(const ecc_pipeline* p, const char* name, char** out) {
    ECC_REQUIRE(p && name && out, "null argument");
    return guarded([&] { *out = dup_string(p->impl.output_path(name)); });
}

ecc_status ecc_pipeline_profile(ecc_pipeline* p, int resume) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] { p->impl.profile(resume != 0); });
}

ecc_status ecc_pipeline_fit_energy(ecc_pipeline* p, const char* profile_path, double* train_error,
                                   double* test_error) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] {
        const auto r = p->impl.fit_energy(opt(profile_path));
        if (train_error) *train_error = r.train_error;
        if (test_error) *test_error = r.test_error;
    });
}

ecc_status ecc_pipeline_train(ecc_pipeline* p) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] { p->impl.train(); });
}

ecc_status ecc_pipeline_compress(ecc_pipeline* p, const char* model_path, const char* dense_path,
                                 ecc_compress_summary* summary) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] {
        const auto r = p->impl.compress(opt(model_path), opt(dense_path));
        if (summary) {
            summary->iterations = r.iterations;
            summary->budget_joules = r.budget_joules;
            summary->dense_energy = r.dense_energy;
            summary->final_energy = r.final_energy;
        }
    });
}

ecc_status ecc_pipeline_finetune(ecc_pipeline* p, const char* checkpoint_path, double* accuracy_before,
                                 double* accuracy_after) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] {
        const auto r = p->impl.finetune(opt(checkpoint_path));
        if (accuracy_before) *accuracy_before = r.accuracy_before;
        if (accuracy_after) *accuracy_after = r.accuracy_after;
    });
}

ecc_status ecc_pipeline_evaluate(ecc_pipeline* p, const char* checkpoint_path, const char* model_path,
                                 char** report_json) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] {
        const auto r = p->impl.evaluate(opt(checkpoint_path), opt(model_path));
        if (report_json) *report_json = dup_string(r.dump(2));
    });
}

ecc_status ecc_pipeline_run_all(ecc_pipeline* p) {
    ECC_REQUIRE(p, "null pipeline");
    return guarded([&] { p->impl.run_all(); });
}

ecc_status ecc_pipeline_measure(const ecc_pipeline* p, const char* exchange_path, double* energy) {
    ECC_REQUIRE(p && exchange_path && energy, "null argument");
    return guarded([&] { *energy = p->impl.measure_exchange(exchange_path); });
}

ecc_status ecc_verify(const char* instance_path, double threshold_perturbation, char** report_text,
                      size_t* num_cases, size_t* num_failed) {
    ECC_REQUIRE(instance_path, "instance path is required");
    return guarded([&] {
        const auto report = ecc::run_verify(instance_path, threshold_perturbation);
        std::size_t failed = 0;
        for (const auto& c : report.cases) failed += c.passed ? 0 : 1;
        if (num_cases) *num_cases = report.cases.size();
        if (num_failed) *num_failed = failed;
        if (report_text) *report_text = dup_string(report.to_text());
    });
}

ecc_status ecc_energy_model_load(const char* path, ecc_energy_model** out) {
    ECC_REQUIRE(path && out, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new ecc_energy_model{ecc::read_energy_model(path).model}; });
}

ecc_status ecc_energy_model_create(double a0, const double* a, size_t num_layers, ecc_energy_model** out) {
    ECC_REQUIRE(out && (a || num_layers == 0), "null argument");
    *out = nullptr;
    return guarded([&] {
        ecc::BilinearEnergyModel m{a0, std::vector<double>(a, a + num_layers)};
        if (a0 < 0.0) throw ecc::InvalidArgument("coefficients must be nonnegative");
        for (double v : m.a) {
            if (!(v >= 0.0)) throw ecc::InvalidArgument("coefficients must be nonnegative");
        }
        *out = new ecc_energy_model{std::move(m)};
    });
}

void ecc_energy_model_free(ecc_energy_model* m) { delete m; }

size_t ecc_energy_model_num_layers(const ecc_energy_model* m) { return m ? m->model.num_layers() : 0; }

ecc_status ecc_energy_model_coefficients(const ecc_energy_model* m, double* a0, double* a, size_t capacity) {
    ECC_REQUIRE(m, "null model");
    ECC_REQUIRE(!a || capacity >= m->model.a.size(), "coefficient buffer too small");
    if (a0) *a0 = m->model.a0;
    if (a) std::copy(m->model.a.begin(), m->model.a.end(), a);
    return ECC_OK;
}

ecc_status ecc_energy_model_eval(const ecc_energy_model* m, const double* s, size_t num_layers, size_t n_out,
                                 double* energy) {
    ECC_REQUIRE(m && s && energy, "null argument");
    return guarded([&] { *energy = ecc::eval(m->model, make_s(s, num_layers, n_out)); });
}

ecc_status ecc_energy_model_grad(const ecc_energy_model* m, const double* s, size_t num_layers, size_t n_out,
                                 double* grad) {
    ECC_REQUIRE(m && s && grad, "null argument");
    return guarded([&] {
        const auto g = ecc::grad_s(m->model, make_s(s, num_layers, n_out));
        std::copy(g.begin(), g.end(), grad);
    });
}

ecc_status ecc_network_load(const char* checkpoint_path, ecc_network** out) {
    ECC_REQUIRE(checkpoint_path && out, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto loaded = ecc::load_checkpoint(checkpoint_path);
        *out = new ecc_network{std::move(loaded.net), std::move(loaded.meta)};
    });
}

void ecc_network_free(ecc_network* n) { delete n; }

size_t ecc_network_num_layers(const ecc_network* n) { return n ? n->net.num_layers() : 0; }

size_t ecc_network_n_out(const ecc_network* n) { return n ? n->net.n_out() : 0; }

ecc_status ecc_network_channels(const ecc_network* n, size_t* widths, size_t* phi, size_t capacity) {
    ECC_REQUIRE(n, "null network");
    ECC_REQUIRE(capacity >= n->net.num_layers() || (!widths && !phi), "channel buffer too small");
    return guarded([&] {
        const auto p = ecc::network_sparsity(n->net);
        for (std::size_t u = 0; u < p.size(); ++u) {
            if (widths) widths[u] = n->net.layers[u].spec.c;
            if (phi) phi[u] = p[u];
        }
    });
}

ecc_status ecc_network_metadata(const ecc_network* n, char** json) {
    ECC_REQUIRE(n && json, "null argument");
    return guarded([&] { *json = dup_string(n->meta.dump(2)); });
}

}  // extern "C"
