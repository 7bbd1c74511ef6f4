#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/analysis.hpp"
#include "core/dataset.hpp"
#include "core/imputation.hpp"

namespace slrcmi {

// The whole fit -> impute -> analyze pipeline resampled as one function of
// the dataset. Deterministic: identical row selection gives identical
// estimates.
struct PipelineSpec {
  Strategy strategy = Strategy::CIR;
  std::vector<std::string> imputation_covariates;  // empty = all covariates
  AnalysisModel analysis;
};

struct PipelinePoint {
  double theta = 0.0;
  double mm_active = 0.0;
  double mm_control = 0.0;
};

PipelinePoint run_pipeline(const TrialDataset& ds, std::span<const int> rows,
                           const PipelineSpec& spec);
PipelinePoint run_pipeline(const TrialDataset& ds, const PipelineSpec& spec);

struct ResampleFailure {
  std::size_t index = 0;
  std::string message;
};

struct ResampleResult {
  std::vector<double> estimates;  // theta per successful replicate, index order
  std::vector<double> mm_active;
  std::vector<double> mm_control;
  std::vector<ResampleFailure> failures;
  std::optional<std::uint64_t> seed;
  Inference method = Inference::None;
};

// Inverse standard normal CDF (Wichura's AS 241, double precision).
double normal_quantile(double p);

// Linear interpolation between order statistics ("type 7"): position
// 1 + (N-1)p within the sorted sample.
double quantile_type7(std::span<const double> sorted_values, double p);

// Estimator evaluated on a row selection. replicate_index identifies the
// resample (the left-out patient for the jackknife, the replicate number for
// the bootstrap) and is SIZE_MAX for the full-data evaluation.
using PipelineFn =
    std::function<PipelinePoint(std::size_t replicate_index, std::span<const int> rows)>;

// Leave-one-patient-out resampling; every refit reruns the full estimator.
// Any failing refit aborts with the patient id.
EffectEstimate jackknife_fn(const TrialDataset& ds, const PipelineFn& fn, double alpha,
                            int threads = 0, ResampleResult* out_resamples = nullptr);
EffectEstimate jackknife(const TrialDataset& ds, const PipelineSpec& spec, double alpha,
                         int threads = 0, ResampleResult* out_resamples = nullptr);

// Nonparametric bootstrap resampling patients with replacement within each
// (arm x stratum) cell, preserving the original cell sizes. The returned CI
// is the percentile interval; the normal-approximation interval around the
// full-data estimate is attached as ci_normal. Failed replicates are
// tolerated up to 1% of m, then the whole call aborts. Deterministic given
// (seed, m) regardless of the thread count.
EffectEstimate bootstrap_fn(const TrialDataset& ds, const PipelineFn& fn, int m,
                            std::uint64_t seed, double alpha, int threads = 0,
                            ResampleResult* out_resamples = nullptr);
EffectEstimate bootstrap(const TrialDataset& ds, const PipelineSpec& spec, int m,
                         std::uint64_t seed, double alpha, int threads = 0,
                         ResampleResult* out_resamples = nullptr);

std::string replicates_to_csv(const ResampleResult& r);

}  // namespace slrcmi
