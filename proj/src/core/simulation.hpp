#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/inference.hpp"

namespace slrcmi {

// Data-generating mechanism for a two-arm longitudinal trial: Bernoulli
// baseline covariates, a normal baseline outcome, MVN always-treated
// trajectories over M post-baseline visits, logistic treatment
// discontinuation driven by the previous outcome and the baseline outcome,
// and two missingness sources (withdrawal at discontinuation, independent
// cell deletion). Post-discontinuation active-arm outcomes are constructed
// so that the chosen reference-based truth assumption (J2R or CIR) holds
// exactly: the conditional mean is shifted to the reference profile while
// the drawn MVN residual is kept.
struct Scenario {
  int n_per_arm = 500;
  int n_outcome_visits = 5;  // M; the dataset grid is M+1 visits incl. baseline
  std::vector<double> covariate_probs = {0.7, 0.7, 0.4};
  double baseline_mean = 3.84;
  double baseline_sd = 1.64;
  // Coefficients applied to (Y0, X1..Xk), shared across visits and arms.
  std::vector<double> outcome_coefs = {0.03, -0.02, 0.45, -0.82};
  std::vector<double> lambda_control;  // length M
  std::vector<double> lambda_active;   // length M
  Eigen::MatrixXd sigma;               // M x M, SPD
  // P(remain on treatment at visit j) = inverse-logit(intercept
  //   + coef_prev * Y_{j-1} + coef_baseline * Y_0), applied for
  // j >= disc_first_visit while still on treatment. Raising the intercept
  // raises retention.
  double disc_intercept = 2.75;
  double disc_coef_prev = -0.04;
  double disc_coef_baseline = -0.01;
  int disc_first_visit = 2;
  double withdrawal_prob = 0.75;
  double cell_missing_prob = 0.05;
  Strategy truth = Strategy::CIR;  // J2R or CIR

  const std::vector<double>& lambda(int arm) const {
    return arm == 1 ? lambda_active : lambda_control;
  }
  void check() const;  // throws UsageError on invalid settings
};

Scenario parse_scenario(std::string_view text);
Scenario read_scenario(const std::string& path);
std::string render_scenario(const Scenario& s);  // canonical echo for reports

struct GeneratedPair {
  TrialDataset complete;  // no missingness; discontinuation effects included
  TrialDataset observed;  // after withdrawal and cell deletion
};

// mean + L * (iid standard normals).
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           std::mt19937_64& eng);

GeneratedPair generate(const Scenario& s, std::uint64_t seed);

struct TrueEstimands {
  double hypothetical = 0.0;  // analytic: lambda difference at the final visit
  double policy = 0.0;        // Monte Carlo mean of final complete outcomes
};

TrueEstimands true_estimands(const Scenario& s, long n_mc_per_arm, std::uint64_t seed,
                             int threads = 0);

enum class StudyMethodKind { CompleteData, SlrJackknife, SlrBootstrap };

struct StudyMethod {
  StudyMethodKind kind = StudyMethodKind::CompleteData;
  Strategy strategy = Strategy::CIR;  // ignored for CompleteData
  int boot_samples = 500;             // SlrBootstrap only
  std::string label;
};

// complete-data estimator + SLR(strategy) with jackknife and with bootstrap.
std::vector<StudyMethod> default_study_methods(Strategy strategy, int boot_samples);

struct MethodStats {
  std::string label;
  double truth = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  double reject_rate = 0.0;  // power under a non-null truth, type-I under the null
  double mean_ci_width = 0.0;
  long n_ok = 0;
  long n_failures = 0;
};

struct ReplicateRecord {
  double theta = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool ok = false;
};

struct SimulationReport {
  int n_sims = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  TrueEstimands truths;
  std::string scenario_echo;
  std::vector<MethodStats> methods;
  // replicates[method][replicate]; kept only when requested.
  std::vector<std::vector<ReplicateRecord>> replicates;
  double wall_seconds = 0.0;  // console diagnostics only; never rendered
};

SimulationReport run_study(const Scenario& s, int n_sims, const std::vector<StudyMethod>& methods,
                           std::uint64_t seed, double alpha, const TrueEstimands& truths,
                           int threads = 0, bool keep_replicates = false);

std::string render_report_text(const SimulationReport& r);
std::string render_report_csv(const SimulationReport& r);
std::string render_report_replicates_csv(const SimulationReport& r);

}  // namespace slrcmi
