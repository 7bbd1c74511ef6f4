/* slrcmi - conditional mean imputation of longitudinal outcomes under
 * reference-based assumptions (hypothetical / jump-to-reference /
 * copy-increments-in-reference), with sequential-linear-regression
 * imputation models, treatment-effect estimation, jackknife and stratified
 * bootstrap inference, and a Monte Carlo study harness.
 *
 * All objects are opaque handles created and destroyed by the library.
 * Functions return slrcmi_status; on failure slrcmi_last_error() holds a
 * thread-local message describing what went wrong.
 */
#ifndef SLRCMI_H
#define SLRCMI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum slrcmi_status {
  SLRCMI_OK = 0,
  SLRCMI_ERR_USAGE = 2,   /* bad arguments or configuration */
  SLRCMI_ERR_DATA = 3,    /* input data violates a contract */
  SLRCMI_ERR_NUMERIC = 4  /* rank deficiency, non-SPD matrix, ... */
} slrcmi_status;

typedef enum slrcmi_strategy {
  SLRCMI_STRATEGY_HYPOTHETICAL = 0,
  SLRCMI_STRATEGY_J2R = 1,
  SLRCMI_STRATEGY_CIR = 2
} slrcmi_strategy;

typedef enum slrcmi_inference {
  SLRCMI_INFER_NONE = 0,
  SLRCMI_INFER_JACKKNIFE = 1,
  SLRCMI_INFER_BOOTSTRAP = 2
} slrcmi_inference;

/* Provenance of a completed cell. */
typedef enum slrcmi_provenance {
  SLRCMI_PROV_OBSERVED = 0,
  SLRCMI_PROV_IMPUTED_ON_TREATMENT = 1,
  SLRCMI_PROV_IMPUTED_REFERENCE = 2,
  SLRCMI_PROV_OBSERVED_OVERWRITTEN = 3
} slrcmi_provenance;

typedef struct slrcmi_dataset slrcmi_dataset;
typedef struct slrcmi_validation slrcmi_validation;
typedef struct slrcmi_completed slrcmi_completed;
typedef struct slrcmi_estimate slrcmi_estimate;
typedef struct slrcmi_scenario slrcmi_scenario;
typedef struct slrcmi_simreport slrcmi_simreport;

const char* slrcmi_version(void);
/* Thread-local message from the most recent failing call. */
const char* slrcmi_last_error(void);
/* Frees any char* returned through an out-parameter by this library. */
void slrcmi_free_text(char* text);

/* ------------------------------------------------------------------ */
/* Datasets: long-format CSV, one row per patient-visit.               */
/* ------------------------------------------------------------------ */

/* Column mapping; any NULL member falls back to the default name
 * (patient_id, visit, arm, outcome, on_treatment). stratum_col NULL means
 * no stratification variable. covariate_cols NULL means every remaining
 * column is a covariate. */
typedef struct slrcmi_csv_schema {
  const char* patient_col;
  const char* visit_col;
  const char* arm_col;
  const char* outcome_col;
  const char* on_treatment_col;
  const char* stratum_col;
  const char* const* covariate_cols;
  int n_covariate_cols;
} slrcmi_csv_schema;

void slrcmi_csv_schema_init(slrcmi_csv_schema* schema);

slrcmi_status slrcmi_dataset_read_csv(const char* path, const slrcmi_csv_schema* schema,
                                      slrcmi_dataset** out);
slrcmi_status slrcmi_dataset_parse_csv(const char* text, size_t length,
                                       const slrcmi_csv_schema* schema, slrcmi_dataset** out);
slrcmi_status slrcmi_dataset_write_csv(const slrcmi_dataset* ds, const char* path);
slrcmi_status slrcmi_dataset_to_csv(const slrcmi_dataset* ds, char** out_text);
slrcmi_status slrcmi_dataset_change_from_baseline(const slrcmi_dataset* ds,
                                                  slrcmi_dataset** out);
int slrcmi_dataset_n_patients(const slrcmi_dataset* ds);
int slrcmi_dataset_n_visits(const slrcmi_dataset* ds);
int slrcmi_dataset_n_covariates(const slrcmi_dataset* ds);
void slrcmi_dataset_free(slrcmi_dataset* ds);

slrcmi_status slrcmi_validate(const slrcmi_dataset* ds, slrcmi_validation** out);
int slrcmi_validation_error_count(const slrcmi_validation* v);
int slrcmi_validation_warning_count(const slrcmi_validation* v);
double slrcmi_validation_missing_fraction(const slrcmi_validation* v);
slrcmi_status slrcmi_validation_render(const slrcmi_validation* v, int as_csv,
                                       char** out_text);
void slrcmi_validation_free(slrcmi_validation* v);

/* ------------------------------------------------------------------ */
/* Imputation: completed datasets with per-cell provenance.            */
/* ------------------------------------------------------------------ */

/* covariates: imputation covariate names; n_covariates < 0 uses every
 * dataset covariate. */
slrcmi_status slrcmi_impute(const slrcmi_dataset* ds, slrcmi_strategy strategy,
                            const char* const* covariates, int n_covariates,
                            slrcmi_completed** out);
slrcmi_status slrcmi_completed_to_csv(const slrcmi_completed* cd, char** out_text);
slrcmi_status slrcmi_completed_write_csv(const slrcmi_completed* cd, const char* path);
double slrcmi_completed_value(const slrcmi_completed* cd, int patient, int visit);
slrcmi_provenance slrcmi_completed_provenance(const slrcmi_completed* cd, int patient,
                                              int visit);
void slrcmi_completed_free(slrcmi_completed* cd);

/* ------------------------------------------------------------------ */
/* Analysis + inference.                                               */
/* ------------------------------------------------------------------ */

typedef struct slrcmi_analysis_opts {
  slrcmi_strategy strategy;
  int visit;  /* -1 = final visit */
  /* imputation model covariates; n < 0 = all dataset covariates */
  const char* const* imputation_covariates;
  int n_imputation_covariates;
  /* analysis model covariates; n < 0 = same as imputation covariates.
   * The reserved name "Y0" denotes the completed visit-0 outcome. */
  const char* const* analysis_covariates;
  int n_analysis_covariates;
  slrcmi_inference inference;
  int boot_samples;  /* bootstrap only; default 1000 */
  uint64_t seed;     /* bootstrap only */
  double alpha;      /* two-sided level, default 0.05 */
  int threads;       /* 0 = all hardware threads */
} slrcmi_analysis_opts;

void slrcmi_analysis_opts_init(slrcmi_analysis_opts* opts);

slrcmi_status slrcmi_analyze(const slrcmi_dataset* ds, const slrcmi_analysis_opts* opts,
                             slrcmi_estimate** out);

double slrcmi_estimate_point(const slrcmi_estimate* est);
/* arm 1 = active, 0 = control */
double slrcmi_estimate_marginal_mean(const slrcmi_estimate* est, int arm);
int slrcmi_estimate_has_se(const slrcmi_estimate* est);
double slrcmi_estimate_se(const slrcmi_estimate* est);
int slrcmi_estimate_has_ci(const slrcmi_estimate* est);
double slrcmi_estimate_ci_low(const slrcmi_estimate* est);
double slrcmi_estimate_ci_high(const slrcmi_estimate* est);
/* Bootstrap only: normal-approximation interval around the point estimate. */
int slrcmi_estimate_has_normal_ci(const slrcmi_estimate* est);
double slrcmi_estimate_normal_ci_low(const slrcmi_estimate* est);
double slrcmi_estimate_normal_ci_high(const slrcmi_estimate* est);
long slrcmi_estimate_n_resamples(const slrcmi_estimate* est);
long slrcmi_estimate_n_failures(const slrcmi_estimate* est);
/* Borrowed view of the per-replicate treatment-effect estimates (successes,
 * replicate order); valid until the estimate is freed. */
slrcmi_status slrcmi_estimate_replicates(const slrcmi_estimate* est, const double** data,
                                         size_t* n);
slrcmi_status slrcmi_estimate_replicates_csv(const slrcmi_estimate* est, char** out_text);
/* as_csv = 0: key-value text; 1: one-row CSV with header. */
slrcmi_status slrcmi_estimate_render(const slrcmi_estimate* est, int as_csv, char** out_text);
void slrcmi_estimate_free(slrcmi_estimate* est);

/* ------------------------------------------------------------------ */
/* Simulation study harness.                                           */
/* ------------------------------------------------------------------ */

slrcmi_status slrcmi_scenario_read(const char* path, slrcmi_scenario** out);
slrcmi_status slrcmi_scenario_parse(const char* text, size_t length, slrcmi_scenario** out);
slrcmi_status slrcmi_scenario_render(const slrcmi_scenario* s, char** out_text);
void slrcmi_scenario_free(slrcmi_scenario* s);

slrcmi_status slrcmi_generate(const slrcmi_scenario* s, uint64_t seed,
                              slrcmi_dataset** out_complete, slrcmi_dataset** out_observed);

slrcmi_status slrcmi_true_estimands(const slrcmi_scenario* s, long n_mc_per_arm,
                                    uint64_t seed, int threads, double* out_hypothetical,
                                    double* out_policy);

typedef struct slrcmi_simulate_opts {
  int n_sims;
  uint64_t seed;
  double alpha;
  int boot_samples;
  int threads;
  int run_complete_data;  /* nonzero = include the complete-data estimator */
  int run_jackknife;
  int run_bootstrap;
  /* strategy used by the SLR methods; negative = the scenario truth */
  int strategy;
  /* when has_truth_policy is zero the policy truth is computed by Monte
   * Carlo with truth_mc_per_arm draws per arm */
  int has_truth_policy;
  double truth_policy;
  long truth_mc_per_arm;
  int keep_replicates;
} slrcmi_simulate_opts;

void slrcmi_simulate_opts_init(slrcmi_simulate_opts* opts);

slrcmi_status slrcmi_simulate(const slrcmi_scenario* s, const slrcmi_simulate_opts* opts,
                              slrcmi_simreport** out);

slrcmi_status slrcmi_simreport_render(const slrcmi_simreport* r, int as_csv, char** out_text);
slrcmi_status slrcmi_simreport_replicates_csv(const slrcmi_simreport* r, char** out_text);
double slrcmi_simreport_truth_policy(const slrcmi_simreport* r);
double slrcmi_simreport_truth_hypothetical(const slrcmi_simreport* r);
int slrcmi_simreport_n_methods(const slrcmi_simreport* r);
slrcmi_status slrcmi_simreport_method_label(const slrcmi_simreport* r, int method,
                                            char** out_text);
/* stat: 0 bias, 1 rmse, 2 coverage, 3 reject_rate, 4 mean_ci_width,
 * 5 n_ok, 6 n_failures, 7 truth */
double slrcmi_simreport_stat(const slrcmi_simreport* r, int method, int stat);
void slrcmi_simreport_free(slrcmi_simreport* r);

#ifdef __cplusplus
}
#endif

#endif /* SLRCMI_H */
