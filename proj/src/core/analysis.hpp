#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/imputation.hpp"

namespace slrcmi {

// Right-hand side of the analysis model: intercept + treatment indicator +
// the named covariates. Names resolve against the dataset covariates; the
// reserved name "Y0" falls back to the completed visit-0 outcome.
struct AnalysisModel {
  int visit = -1;  // -1 = final visit
  std::vector<std::string> covariates;
};

enum class Inference { None, Jackknife, Bootstrap };
const char* to_string(Inference m);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
};

struct EffectEstimate {
  double point = 0.0;  // coefficient of Z
  double marginal_mean_active = 0.0;
  double marginal_mean_control = 0.0;
  std::optional<Strategy> strategy;  // nullopt = complete-data estimator
  Inference inference = Inference::None;
  std::optional<double> se;
  std::optional<ConfidenceInterval> ci;
  std::optional<ConfidenceInterval> ci_normal;  // bootstrap auxiliary interval
  std::optional<ConfidenceInterval> mm_active_ci;
  std::optional<ConfidenceInterval> mm_control_ci;
  long n_resamples = 0;
  long n_failures = 0;

  std::string method_label() const;
};

// OLS of the completed visit-j outcome on (1, Z, covariates); the treatment
// effect is the Z coefficient and the per-arm marginal means are
// g-computation averages (predict every patient with Z forced to z, using
// their own covariates, and average).
EffectEstimate estimate_effect(const CompletedDataset& cd, const AnalysisModel& model);

// Same point estimate plus the classical Wald standard error and CI for the
// Z coefficient (complete-data estimator path).
EffectEstimate estimate_effect_wald(const CompletedDataset& cd, const AnalysisModel& model,
                                    double alpha);

}  // namespace slrcmi
