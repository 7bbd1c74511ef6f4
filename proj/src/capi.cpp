#include "slrcmi.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "core/analysis.hpp"
#include "core/dataset.hpp"
#include "core/errors.hpp"
#include "core/imputation.hpp"
#include "core/inference.hpp"
#include "core/rng.hpp"
#include "core/simulation.hpp"
#include "core/version.hpp"

using slrcmi::DataError;
using slrcmi::NumericError;
using slrcmi::UsageError;

struct slrcmi_dataset {
  slrcmi::TrialDataset ds;
};
struct slrcmi_validation {
  slrcmi::ValidationReport rep;
};
struct slrcmi_completed {
  // Owns a copy of the source dataset so the handle cannot dangle.
  slrcmi::TrialDataset source;
  slrcmi::CompletedDataset cd;
};
struct slrcmi_estimate {
  slrcmi::EffectEstimate est;
  slrcmi::ResampleResult resamples;
  bool has_resamples = false;
  int visit = 0;
  double alpha = 0.05;
};
struct slrcmi_scenario {
  slrcmi::Scenario s;
};
struct slrcmi_simreport {
  slrcmi::SimulationReport rep;
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& msg) { t_last_error = msg; }

template <typename Fn>
slrcmi_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return SLRCMI_OK;
  } catch (const UsageError& e) {
    set_error(e.what());
    return SLRCMI_ERR_USAGE;
  } catch (const NumericError& e) {
    set_error(e.what());
    return SLRCMI_ERR_NUMERIC;
  } catch (const DataError& e) {
    set_error(e.what());
    return SLRCMI_ERR_DATA;
  } catch (const std::exception& e) {
    set_error(e.what());
    return SLRCMI_ERR_DATA;
  } catch (...) {
    set_error("unknown error");
    return SLRCMI_ERR_DATA;
  }
}

char* dup_text(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

slrcmi::ColumnSchema to_schema(const slrcmi_csv_schema* schema) {
  slrcmi::ColumnSchema out;
  if (schema == nullptr) return out;
  if (schema->patient_col) out.patient_col = schema->patient_col;
  if (schema->visit_col) out.visit_col = schema->visit_col;
  if (schema->arm_col) out.arm_col = schema->arm_col;
  if (schema->outcome_col) out.outcome_col = schema->outcome_col;
  if (schema->on_treatment_col) out.on_treatment_col = schema->on_treatment_col;
  if (schema->stratum_col) out.stratum_col = schema->stratum_col;
  if (schema->covariate_cols != nullptr && schema->n_covariate_cols >= 0) {
    std::vector<std::string> covs;
    for (int i = 0; i < schema->n_covariate_cols; ++i)
      covs.emplace_back(schema->covariate_cols[i]);
    out.covariate_cols = std::move(covs);
  }
  return out;
}

std::vector<std::string> to_names(const char* const* names, int n) {
  std::vector<std::string> out;
  if (names != nullptr && n > 0)
    for (int i = 0; i < n; ++i) out.emplace_back(names[i]);
  return out;
}

slrcmi::Strategy to_strategy(int s) {
  switch (s) {
    case SLRCMI_STRATEGY_HYPOTHETICAL: return slrcmi::Strategy::Hypothetical;
    case SLRCMI_STRATEGY_J2R: return slrcmi::Strategy::J2R;
    case SLRCMI_STRATEGY_CIR: return slrcmi::Strategy::CIR;
  }
  throw UsageError("invalid strategy code " + std::to_string(s));
}

std::string format_ci(const slrcmi::ConfidenceInterval& ci) {
  return slrcmi::format_double(ci.low) + "," + slrcmi::format_double(ci.high);
}

}  // namespace

extern "C" {

const char* slrcmi_version(void) { return slrcmi::kVersion; }

const char* slrcmi_last_error(void) { return t_last_error.c_str(); }

void slrcmi_free_text(char* text) { delete[] text; }

void slrcmi_csv_schema_init(slrcmi_csv_schema* schema) {
  if (!schema) return;
  schema->patient_col = nullptr;
  schema->visit_col = nullptr;
  schema->arm_col = nullptr;
  schema->outcome_col = nullptr;
  schema->on_treatment_col = nullptr;
  schema->stratum_col = nullptr;
  schema->covariate_cols = nullptr;
  schema->n_covariate_cols = -1;
}

slrcmi_status slrcmi_dataset_read_csv(const char* path, const slrcmi_csv_schema* schema,
                                      slrcmi_dataset** out) {
  return guarded([&] {
    if (!path || !out) throw UsageError("null argument");
    auto handle = std::make_unique<slrcmi_dataset>();
    handle->ds = slrcmi::read_trial_csv(path, to_schema(schema));
    *out = handle.release();
  });
}

slrcmi_status slrcmi_dataset_parse_csv(const char* text, size_t length,
                                       const slrcmi_csv_schema* schema, slrcmi_dataset** out) {
  return guarded([&] {
    if (!text || !out) throw UsageError("null argument");
    auto handle = std::make_unique<slrcmi_dataset>();
    handle->ds = slrcmi::parse_trial_csv(std::string_view(text, length), to_schema(schema));
    *out = handle.release();
  });
}

slrcmi_status slrcmi_dataset_write_csv(const slrcmi_dataset* ds, const char* path) {
  return guarded([&] {
    if (!ds || !path) throw UsageError("null argument");
    slrcmi::write_trial_csv(ds->ds, path);
  });
}

slrcmi_status slrcmi_dataset_to_csv(const slrcmi_dataset* ds, char** out_text) {
  return guarded([&] {
    if (!ds || !out_text) throw UsageError("null argument");
    *out_text = dup_text(slrcmi::serialize_trial_csv(ds->ds));
  });
}

slrcmi_status slrcmi_dataset_change_from_baseline(const slrcmi_dataset* ds,
                                                  slrcmi_dataset** out) {
  return guarded([&] {
    if (!ds || !out) throw UsageError("null argument");
    auto handle = std::make_unique<slrcmi_dataset>();
    handle->ds = slrcmi::change_from_baseline(ds->ds);
    *out = handle.release();
  });
}

int slrcmi_dataset_n_patients(const slrcmi_dataset* ds) {
  return ds ? static_cast<int>(ds->ds.patients.size()) : 0;
}

int slrcmi_dataset_n_visits(const slrcmi_dataset* ds) { return ds ? ds->ds.n_visits : 0; }

int slrcmi_dataset_n_covariates(const slrcmi_dataset* ds) {
  return ds ? static_cast<int>(ds->ds.covariate_names.size()) : 0;
}

void slrcmi_dataset_free(slrcmi_dataset* ds) { delete ds; }

slrcmi_status slrcmi_validate(const slrcmi_dataset* ds, slrcmi_validation** out) {
  return guarded([&] {
    if (!ds || !out) throw UsageError("null argument");
    auto handle = std::make_unique<slrcmi_validation>();
    handle->rep = slrcmi::validate(ds->ds);
    *out = handle.release();
  });
}

int slrcmi_validation_error_count(const slrcmi_validation* v) {
  return v ? static_cast<int>(v->rep.errors.size()) : 0;
}

int slrcmi_validation_warning_count(const slrcmi_validation* v) {
  return v ? static_cast<int>(v->rep.warnings.size()) : 0;
}

double slrcmi_validation_missing_fraction(const slrcmi_validation* v) {
  return v ? v->rep.missing_fraction : 0.0;
}

slrcmi_status slrcmi_validation_render(const slrcmi_validation* v, int as_csv,
                                       char** out_text) {
  return guarded([&] {
    if (!v || !out_text) throw UsageError("null argument");
    *out_text = dup_text(as_csv ? slrcmi::render_validation_csv(v->rep)
                                : slrcmi::render_validation_text(v->rep));
  });
}

void slrcmi_validation_free(slrcmi_validation* v) { delete v; }

slrcmi_status slrcmi_impute(const slrcmi_dataset* ds, slrcmi_strategy strategy,
                            const char* const* covariates, int n_covariates,
                            slrcmi_completed** out) {
  return guarded([&] {
    if (!ds || !out) throw UsageError("null argument");
    auto handle = std::make_unique<slrcmi_completed>();
    handle->source = ds->ds;
    const auto covs = to_names(covariates, n_covariates);
    const auto models = slrcmi::fit_slr_models(handle->source, covs);
    handle->cd = slrcmi::impute(handle->source, models, to_strategy(strategy));
    *out = handle.release();
  });
}

slrcmi_status slrcmi_completed_to_csv(const slrcmi_completed* cd, char** out_text) {
  return guarded([&] {
    if (!cd || !out_text) throw UsageError("null argument");
    *out_text = dup_text(slrcmi::completed_to_csv(cd->cd));
  });
}

slrcmi_status slrcmi_completed_write_csv(const slrcmi_completed* cd, const char* path) {
  return guarded([&] {
    if (!cd || !path) throw UsageError("null argument");
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw DataError(std::string("cannot open output file '") + path + "'");
    outf << slrcmi::completed_to_csv(cd->cd);
  });
}

double slrcmi_completed_value(const slrcmi_completed* cd, int patient, int visit) {
  if (!cd || patient < 0 || visit < 0 ||
      static_cast<std::size_t>(patient) >= cd->cd.n_rows() || visit >= cd->cd.n_visits())
    return 0.0;
  return cd->cd.values(patient, visit);
}

slrcmi_provenance slrcmi_completed_provenance(const slrcmi_completed* cd, int patient,
                                              int visit) {
  if (!cd || patient < 0 || visit < 0 ||
      static_cast<std::size_t>(patient) >= cd->cd.n_rows() || visit >= cd->cd.n_visits())
    return SLRCMI_PROV_OBSERVED;
  return static_cast<slrcmi_provenance>(
      cd->cd.prov(static_cast<std::size_t>(patient), visit));
}

void slrcmi_completed_free(slrcmi_completed* cd) { delete cd; }

void slrcmi_analysis_opts_init(slrcmi_analysis_opts* opts) {
  if (!opts) return;
  opts->strategy = SLRCMI_STRATEGY_CIR;
  opts->visit = -1;
  opts->imputation_covariates = nullptr;
  opts->n_imputation_covariates = -1;
  opts->analysis_covariates = nullptr;
  opts->n_analysis_covariates = -1;
  opts->inference = SLRCMI_INFER_NONE;
  opts->boot_samples = 1000;
  opts->seed = 12345;
  opts->alpha = 0.05;
  opts->threads = 0;
}

slrcmi_status slrcmi_analyze(const slrcmi_dataset* ds, const slrcmi_analysis_opts* opts,
                             slrcmi_estimate** out) {
  return guarded([&] {
    if (!ds || !opts || !out) throw UsageError("null argument");
    slrcmi::PipelineSpec spec;
    spec.strategy = to_strategy(opts->strategy);
    if (opts->n_imputation_covariates >= 0)
      spec.imputation_covariates =
          to_names(opts->imputation_covariates, opts->n_imputation_covariates);
    spec.analysis.visit = opts->visit;
    if (opts->n_analysis_covariates >= 0)
      spec.analysis.covariates =
          to_names(opts->analysis_covariates, opts->n_analysis_covariates);
    else if (opts->n_imputation_covariates >= 0)
      spec.analysis.covariates = spec.imputation_covariates;
    else
      spec.analysis.covariates = ds->ds.covariate_names;

    auto handle = std::make_unique<slrcmi_estimate>();
    handle->alpha = opts->alpha;
    handle->visit = opts->visit < 0 ? ds->ds.n_visits - 1 : opts->visit;
    switch (opts->inference) {
      case SLRCMI_INFER_NONE: {
        const auto models =
            slrcmi::fit_slr_models(ds->ds, spec.imputation_covariates);
        const auto cd = slrcmi::impute(ds->ds, models, spec.strategy);
        handle->est = slrcmi::estimate_effect(cd, spec.analysis);
        break;
      }
      case SLRCMI_INFER_JACKKNIFE:
        handle->est = slrcmi::jackknife(ds->ds, spec, opts->alpha, opts->threads,
                                        &handle->resamples);
        handle->has_resamples = true;
        break;
      case SLRCMI_INFER_BOOTSTRAP:
        handle->est = slrcmi::bootstrap(ds->ds, spec, opts->boot_samples, opts->seed,
                                        opts->alpha, opts->threads, &handle->resamples);
        handle->has_resamples = true;
        break;
      default:
        throw UsageError("invalid inference code");
    }
    *out = handle.release();
  });
}

double slrcmi_estimate_point(const slrcmi_estimate* est) { return est ? est->est.point : 0.0; }

double slrcmi_estimate_marginal_mean(const slrcmi_estimate* est, int arm) {
  if (!est) return 0.0;
  return arm == 1 ? est->est.marginal_mean_active : est->est.marginal_mean_control;
}

int slrcmi_estimate_has_se(const slrcmi_estimate* est) {
  return est && est->est.se ? 1 : 0;
}

double slrcmi_estimate_se(const slrcmi_estimate* est) {
  return est && est->est.se ? *est->est.se : 0.0;
}

int slrcmi_estimate_has_ci(const slrcmi_estimate* est) {
  return est && est->est.ci ? 1 : 0;
}

double slrcmi_estimate_ci_low(const slrcmi_estimate* est) {
  return est && est->est.ci ? est->est.ci->low : 0.0;
}

double slrcmi_estimate_ci_high(const slrcmi_estimate* est) {
  return est && est->est.ci ? est->est.ci->high : 0.0;
}

int slrcmi_estimate_has_normal_ci(const slrcmi_estimate* est) {
  return est && est->est.ci_normal ? 1 : 0;
}

double slrcmi_estimate_normal_ci_low(const slrcmi_estimate* est) {
  return est && est->est.ci_normal ? est->est.ci_normal->low : 0.0;
}

double slrcmi_estimate_normal_ci_high(const slrcmi_estimate* est) {
  return est && est->est.ci_normal ? est->est.ci_normal->high : 0.0;
}

long slrcmi_estimate_n_resamples(const slrcmi_estimate* est) {
  return est ? est->est.n_resamples : 0;
}

long slrcmi_estimate_n_failures(const slrcmi_estimate* est) {
  return est ? est->est.n_failures : 0;
}

slrcmi_status slrcmi_estimate_replicates(const slrcmi_estimate* est, const double** data,
                                         size_t* n) {
  return guarded([&] {
    if (!est || !data || !n) throw UsageError("null argument");
    if (!est->has_resamples) throw UsageError("estimate has no resampling distribution");
    *data = est->resamples.estimates.data();
    *n = est->resamples.estimates.size();
  });
}

slrcmi_status slrcmi_estimate_replicates_csv(const slrcmi_estimate* est, char** out_text) {
  return guarded([&] {
    if (!est || !out_text) throw UsageError("null argument");
    if (!est->has_resamples) throw UsageError("estimate has no resampling distribution");
    *out_text = dup_text(slrcmi::replicates_to_csv(est->resamples));
  });
}

slrcmi_status slrcmi_estimate_render(const slrcmi_estimate* est, int as_csv,
                                     char** out_text) {
  return guarded([&] {
    if (!est || !out_text) throw UsageError("null argument");
    const slrcmi::EffectEstimate& e = est->est;
    std::ostringstream os;
    using slrcmi::format_double;
    if (as_csv) {
      os << "method,visit,point,marginal_mean_active,marginal_mean_control,se,"
            "ci_low,ci_high,ci_level,normal_ci_low,normal_ci_high,"
            "mm_active_ci_low,mm_active_ci_high,mm_control_ci_low,mm_control_ci_high,"
            "n_resamples,n_failures\n";
      os << e.method_label() << ',' << est->visit << ',' << format_double(e.point) << ','
         << format_double(e.marginal_mean_active) << ','
         << format_double(e.marginal_mean_control) << ',';
      if (e.se) os << format_double(*e.se);
      os << ',';
      if (e.ci) os << format_ci(*e.ci) << ',' << format_double(e.ci->level);
      else os << ",,";
      os << ',';
      if (e.ci_normal) os << format_ci(*e.ci_normal);
      else os << ',';
      os << ',';
      if (e.mm_active_ci) os << format_ci(*e.mm_active_ci);
      else os << ',';
      os << ',';
      if (e.mm_control_ci) os << format_ci(*e.mm_control_ci);
      else os << ',';
      os << ',' << e.n_resamples << ',' << e.n_failures << '\n';
    } else {
      os << "method: " << e.method_label() << '\n';
      os << "visit: " << est->visit << '\n';
      os << "point: " << format_double(e.point) << '\n';
      os << "marginal_mean_active: " << format_double(e.marginal_mean_active) << '\n';
      os << "marginal_mean_control: " << format_double(e.marginal_mean_control) << '\n';
      if (e.se) os << "se: " << format_double(*e.se) << '\n';
      if (e.ci)
        os << "ci: (" << format_double(e.ci->low) << ", " << format_double(e.ci->high)
           << ") level " << format_double(e.ci->level) << '\n';
      if (e.ci_normal)
        os << "normal_ci: (" << format_double(e.ci_normal->low) << ", "
           << format_double(e.ci_normal->high) << ")\n";
      if (e.mm_active_ci)
        os << "marginal_mean_active_ci: (" << format_double(e.mm_active_ci->low) << ", "
           << format_double(e.mm_active_ci->high) << ")\n";
      if (e.mm_control_ci)
        os << "marginal_mean_control_ci: (" << format_double(e.mm_control_ci->low) << ", "
           << format_double(e.mm_control_ci->high) << ")\n";
      if (e.inference != slrcmi::Inference::None) {
        os << "n_resamples: " << e.n_resamples << '\n';
        os << "n_failures: " << e.n_failures << '\n';
      }
    }
    *out_text = dup_text(os.str());
  });
}

void slrcmi_estimate_free(slrcmi_estimate* est) { delete est; }

slrcmi_status slrcmi_scenario_read(const char* path, slrcmi_scenario** out) {
  return guarded([&] {
    if (!path || !out) throw UsageError("null argument");
    auto handle = std::make_unique<slrcmi_scenario>();
    handle->s = slrcmi::read_scenario(path);
    *out = handle.release();
  });
}

slrcmi_status slrcmi_scenario_parse(const char* text, size_t length, slrcmi_scenario** out) {
  return guarded([&] {
    if (!text || !out) throw UsageError("null argument");
    auto handle = std::make_unique<slrcmi_scenario>();
    handle->s = slrcmi::parse_scenario(std::string_view(text, length));
    *out = handle.release();
  });
}

slrcmi_status slrcmi_scenario_render(const slrcmi_scenario* s, char** out_text) {
  return guarded([&] {
    if (!s || !out_text) throw UsageError("null argument");
    *out_text = dup_text(slrcmi::render_scenario(s->s));
  });
}

void slrcmi_scenario_free(slrcmi_scenario* s) { delete s; }

slrcmi_status slrcmi_generate(const slrcmi_scenario* s, uint64_t seed,
                              slrcmi_dataset** out_complete, slrcmi_dataset** out_observed) {
  return guarded([&] {
    if (!s || (!out_complete && !out_observed)) throw UsageError("null argument");
    slrcmi::GeneratedPair pair = slrcmi::generate(s->s, seed);
    if (out_complete) {
      auto handle = std::make_unique<slrcmi_dataset>();
      handle->ds = std::move(pair.complete);
      *out_complete = handle.release();
    }
    if (out_observed) {
      auto handle = std::make_unique<slrcmi_dataset>();
      handle->ds = std::move(pair.observed);
      *out_observed = handle.release();
    }
  });
}

slrcmi_status slrcmi_true_estimands(const slrcmi_scenario* s, long n_mc_per_arm,
                                    uint64_t seed, int threads, double* out_hypothetical,
                                    double* out_policy) {
  return guarded([&] {
    if (!s) throw UsageError("null argument");
    const auto t = slrcmi::true_estimands(s->s, n_mc_per_arm, seed, threads);
    if (out_hypothetical) *out_hypothetical = t.hypothetical;
    if (out_policy) *out_policy = t.policy;
  });
}

void slrcmi_simulate_opts_init(slrcmi_simulate_opts* opts) {
  if (!opts) return;
  opts->n_sims = 200;
  opts->seed = 12345;
  opts->alpha = 0.05;
  opts->boot_samples = 500;
  opts->threads = 0;
  opts->run_complete_data = 1;
  opts->run_jackknife = 1;
  opts->run_bootstrap = 1;
  opts->strategy = -1;
  opts->has_truth_policy = 0;
  opts->truth_policy = 0.0;
  opts->truth_mc_per_arm = 10000000L;
  opts->keep_replicates = 0;
}

slrcmi_status slrcmi_simulate(const slrcmi_scenario* s, const slrcmi_simulate_opts* opts,
                              slrcmi_simreport** out) {
  return guarded([&] {
    if (!s || !opts || !out) throw UsageError("null argument");
    const slrcmi::Scenario& scn = s->s;
    const slrcmi::Strategy strategy =
        opts->strategy < 0 ? scn.truth : to_strategy(opts->strategy);

    std::vector<slrcmi::StudyMethod> methods;
    const auto defaults = slrcmi::default_study_methods(strategy, opts->boot_samples);
    if (opts->run_complete_data) methods.push_back(defaults[0]);
    if (opts->run_jackknife) methods.push_back(defaults[1]);
    if (opts->run_bootstrap) methods.push_back(defaults[2]);
    if (methods.empty()) throw UsageError("no methods selected");

    slrcmi::TrueEstimands truths;
    truths.hypothetical =
        scn.lambda_active[static_cast<std::size_t>(scn.n_outcome_visits - 1)] -
        scn.lambda_control[static_cast<std::size_t>(scn.n_outcome_visits - 1)];
    if (opts->has_truth_policy)
      truths.policy = opts->truth_policy;
    else
      truths.policy =
          slrcmi::true_estimands(scn, opts->truth_mc_per_arm, opts->seed, opts->threads)
              .policy;

    auto handle = std::make_unique<slrcmi_simreport>();
    handle->rep = slrcmi::run_study(scn, opts->n_sims, methods, opts->seed, opts->alpha,
                                    truths, opts->threads, opts->keep_replicates != 0);
    *out = handle.release();
  });
}

slrcmi_status slrcmi_simreport_render(const slrcmi_simreport* r, int as_csv,
                                      char** out_text) {
  return guarded([&] {
    if (!r || !out_text) throw UsageError("null argument");
    *out_text = dup_text(as_csv ? slrcmi::render_report_csv(r->rep)
                                : slrcmi::render_report_text(r->rep));
  });
}

slrcmi_status slrcmi_simreport_replicates_csv(const slrcmi_simreport* r, char** out_text) {
  return guarded([&] {
    if (!r || !out_text) throw UsageError("null argument");
    if (r->rep.replicates.empty())
      throw UsageError("report was produced without keep_replicates");
    *out_text = dup_text(slrcmi::render_report_replicates_csv(r->rep));
  });
}

double slrcmi_simreport_truth_policy(const slrcmi_simreport* r) {
  return r ? r->rep.truths.policy : 0.0;
}

double slrcmi_simreport_truth_hypothetical(const slrcmi_simreport* r) {
  return r ? r->rep.truths.hypothetical : 0.0;
}

int slrcmi_simreport_n_methods(const slrcmi_simreport* r) {
  return r ? static_cast<int>(r->rep.methods.size()) : 0;
}

slrcmi_status slrcmi_simreport_method_label(const slrcmi_simreport* r, int method,
                                            char** out_text) {
  return guarded([&] {
    if (!r || !out_text) throw UsageError("null argument");
    if (method < 0 || method >= static_cast<int>(r->rep.methods.size()))
      throw UsageError("method index out of range");
    *out_text = dup_text(r->rep.methods[static_cast<std::size_t>(method)].label);
  });
}

double slrcmi_simreport_stat(const slrcmi_simreport* r, int method, int stat) {
  if (!r || method < 0 || method >= static_cast<int>(r->rep.methods.size())) return 0.0;
  const slrcmi::MethodStats& m = r->rep.methods[static_cast<std::size_t>(method)];
  switch (stat) {
    case 0: return m.bias;
    case 1: return m.rmse;
    case 2: return m.coverage;
    case 3: return m.reject_rate;
    case 4: return m.mean_ci_width;
    case 5: return static_cast<double>(m.n_ok);
    case 6: return static_cast<double>(m.n_failures);
    case 7: return m.truth;
  }
  return 0.0;
}

void slrcmi_simreport_free(slrcmi_simreport* r) { delete r; }

}  // extern "C"
