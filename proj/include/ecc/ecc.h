#ifndef ECC_ECC_H
#define ECC_ECC_H

#include <stddef.h>
#include <stdint.h>

#if defined(ECC_BUILDING_LIBRARY)
#define ECC_API __attribute__((visibility("default")))
#else
#define ECC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/*
 * Status codes. Values 0 to 4 double as process exit codes of the command-line tool;
 * the remaining codes refine ECC_ERR_GENERIC and map to exit code 1.
 */
typedef enum ecc_status {
    ECC_OK = 0,
    ECC_ERR_GENERIC = 1,
    ECC_ERR_INFEASIBLE = 2,
    ECC_ERR_ITERATION_LIMIT = 3,
    ECC_ERR_ORACLE = 4,
    ECC_ERR_INVALID_ARGUMENT = 5,
    ECC_ERR_IO = 6,
    ECC_ERR_SHAPE = 7,
    ECC_ERR_NONFINITE = 8
} ecc_status;

typedef struct ecc_pipeline ecc_pipeline;
typedef struct ecc_energy_model ecc_energy_model;
typedef struct ecc_network ecc_network;

/* Message of the most recent failure on the calling thread ("" if none). */
ECC_API const char* ecc_last_error(void);
ECC_API const char* ecc_version(void);
ECC_API const char* ecc_status_name(ecc_status status);

/* Strings returned through char** out-parameters are owned by the caller. */
ECC_API void ecc_string_free(char* s);

/* ---- pipeline ---- */

typedef void (*ecc_log_fn)(const char* message, void* user);

ECC_API ecc_status ecc_pipeline_open(const char* config_path, ecc_pipeline** out);
/* json may be NULL or "{}" for the built-in defaults; base_dir may be NULL ("."). */
ECC_API ecc_status ecc_pipeline_from_json(const char* json, const char* base_dir, ecc_pipeline** out);
ECC_API void ecc_pipeline_free(ecc_pipeline* p);

ECC_API ecc_status ecc_pipeline_set_seed(ecc_pipeline* p, uint64_t seed);
ECC_API ecc_status ecc_pipeline_set_budget(ecc_pipeline* p, double joules);
ECC_API ecc_status ecc_pipeline_set_output_dir(ecc_pipeline* p, const char* dir);
/* Overrides a config key by dotted path, e.g. ("solver.rho1", "10"). */
ECC_API ecc_status ecc_pipeline_set_option(ecc_pipeline* p, const char* key, const char* value);
ECC_API ecc_status ecc_pipeline_set_logger(ecc_pipeline* p, ecc_log_fn fn, void* user);

ECC_API ecc_status ecc_pipeline_config_json(const ecc_pipeline* p, char** out);
ECC_API ecc_status ecc_pipeline_config_hash(const ecc_pipeline* p, char** out);
ECC_API ecc_status ecc_pipeline_output_path(const ecc_pipeline* p, const char* name, char** out);

/* Path arguments set to NULL select the default artifact in the output directory. */
ECC_API ecc_status ecc_pipeline_profile(ecc_pipeline* p, int resume);
ECC_API ecc_status ecc_pipeline_fit_energy(ecc_pipeline* p, const char* profile_path, double* train_error,
                                           double* test_error);
ECC_API ecc_status ecc_pipeline_train(ecc_pipeline* p);

typedef struct ecc_compress_summary {
    size_t iterations;
    double budget_joules;
    double dense_energy;
    double final_energy;
} ecc_compress_summary;

ECC_API ecc_status ecc_pipeline_compress(ecc_pipeline* p, const char* model_path, const char* dense_path,
                                         ecc_compress_summary* summary);
ECC_API ecc_status ecc_pipeline_finetune(ecc_pipeline* p, const char* checkpoint_path, double* accuracy_before,
                                         double* accuracy_after);
/* report_json receives the evaluation report; pass NULL to skip it. */
ECC_API ecc_status ecc_pipeline_evaluate(ecc_pipeline* p, const char* checkpoint_path, const char* model_path,
                                         char** report_json);
ECC_API ecc_status ecc_pipeline_run_all(ecc_pipeline* p);
/* Answers an exchange request file with the configured simulated device. */
ECC_API ecc_status ecc_pipeline_measure(const ecc_pipeline* p, const char* exchange_path, double* energy);

/* ---- reference verification ---- */

ECC_API ecc_status ecc_verify(const char* instance_path, double threshold_perturbation, char** report_text,
                              size_t* num_cases, size_t* num_failed);

/* ---- energy model ---- */

ECC_API ecc_status ecc_energy_model_load(const char* path, ecc_energy_model** out);
ECC_API ecc_status ecc_energy_model_create(double a0, const double* a, size_t num_layers, ecc_energy_model** out);
ECC_API void ecc_energy_model_free(ecc_energy_model* m);
ECC_API size_t ecc_energy_model_num_layers(const ecc_energy_model* m);
ECC_API ecc_status ecc_energy_model_coefficients(const ecc_energy_model* m, double* a0, double* a, size_t capacity);
/* s holds num_layers entries; the output width n_out is passed separately. */
ECC_API ecc_status ecc_energy_model_eval(const ecc_energy_model* m, const double* s, size_t num_layers,
                                         size_t n_out, double* energy);
ECC_API ecc_status ecc_energy_model_grad(const ecc_energy_model* m, const double* s, size_t num_layers,
                                         size_t n_out, double* grad);

/* ---- networks ---- */

ECC_API ecc_status ecc_network_load(const char* checkpoint_path, ecc_network** out);
ECC_API void ecc_network_free(ecc_network* n);
ECC_API size_t ecc_network_num_layers(const ecc_network* n);
ECC_API size_t ecc_network_n_out(const ecc_network* n);
/* widths[u] = input channels of layer u; phi[u] = nonzero input channels. Either may be NULL. */
ECC_API ecc_status ecc_network_channels(const ecc_network* n, size_t* widths, size_t* phi, size_t capacity);
ECC_API ecc_status ecc_network_metadata(const ecc_network* n, char** json);

#ifdef __cplusplus
}
#endif

#endif
