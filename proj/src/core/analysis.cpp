#include "core/analysis.hpp"

#include <sstream>

#include "core/errors.hpp"
#include "core/inference.hpp"

namespace slrcmi {

const char* to_string(Inference m) {
  switch (m) {
    case Inference::None: return "none";
    case Inference::Jackknife: return "jackknife";
    case Inference::Bootstrap: return "bootstrap";
  }
  return "?";
}

std::string EffectEstimate::method_label() const {
  std::string s = strategy ? std::string("slr-") + to_string(*strategy) : "complete-data";
  if (inference != Inference::None) s += std::string("+") + to_string(inference);
  return s;
}

namespace {

struct BuiltDesign {
  linalg::DesignMatrix V;
  Eigen::VectorXd y;
  int visit = 0;
};

BuiltDesign build_design(const CompletedDataset& cd, const AnalysisModel& model) {
  if (cd.source == nullptr) throw UsageError("estimate_effect: completed dataset has no source");
  const TrialDataset& ds = *cd.source;
  const int V = cd.n_visits();
  int j = model.visit;
  if (j < 0) j = V - 1;
  if (j >= V) throw UsageError("estimate_effect: visit " + std::to_string(j) +
                               " is outside the grid 0.." + std::to_string(V - 1));

  // Resolve rhs covariates: dataset covariates first, then the reserved
  // "Y0" name meaning the completed visit-0 outcome.
  struct Column { int cov = -1; bool baseline_outcome = false; };
  std::vector<Column> cols;
  for (const auto& name : model.covariates) {
    Column c;
    for (std::size_t t = 0; t < ds.covariate_names.size(); ++t)
      if (ds.covariate_names[t] == name) { c.cov = static_cast<int>(t); break; }
    if (c.cov < 0) {
      if (name == "Y0") c.baseline_outcome = true;
      else throw UsageError("estimate_effect: unknown analysis covariate '" + name + "'");
    }
    cols.push_back(c);
  }

  const std::size_t n = cd.n_rows();
  BuiltDesign b;
  b.visit = j;
  b.V.column_labels.emplace_back("intercept");
  b.V.column_labels.emplace_back("Z");
  for (const auto& name : model.covariates) b.V.column_labels.push_back(name);
  b.V.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 + cols.size()));
  b.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const PatientRecord& pr = ds.patients[static_cast<std::size_t>(cd.patient_rows[i])];
    auto row = b.V.rows.row(static_cast<Eigen::Index>(i));
    row[0] = 1.0;
    row[1] = static_cast<double>(pr.arm);
    for (std::size_t c = 0; c < cols.size(); ++c)
      row[static_cast<Eigen::Index>(2 + c)] =
          cols[c].baseline_outcome
              ? cd.values(static_cast<Eigen::Index>(i), 0)
              : pr.covariates[static_cast<std::size_t>(cols[c].cov)];
    b.y[static_cast<Eigen::Index>(i)] = cd.values(static_cast<Eigen::Index>(i), j);
  }
  return b;
}

EffectEstimate estimate_from_design(const CompletedDataset& cd, const BuiltDesign& b,
                                    const linalg::Coefficients& c) {
  EffectEstimate est;
  est.strategy = cd.strategy;
  est.point = c.values[1];
  // g-computation marginal means: with Z forced, the average prediction is
  // c0 + c1*z + sum_l c_l * mean(col_l).
  double base = c.values[0];
  for (Eigen::Index l = 2; l < c.values.size(); ++l)
    base += c.values[l] * b.V.rows.col(l).mean();
  est.marginal_mean_control = base;
  est.marginal_mean_active = base + c.values[1];
  return est;
}

}  // namespace

EffectEstimate estimate_effect(const CompletedDataset& cd, const AnalysisModel& model) {
  const BuiltDesign b = build_design(cd, model);
  return estimate_from_design(cd, b, linalg::fit_ols(b.V, b.y));
}

EffectEstimate estimate_effect_wald(const CompletedDataset& cd, const AnalysisModel& model,
                                    double alpha) {
  const BuiltDesign b = build_design(cd, model);
  const linalg::Coefficients c = linalg::fit_ols(b.V, b.y);
  EffectEstimate est = estimate_from_design(cd, b, c);
  est.strategy.reset();  // complete-data estimator
  const Eigen::Index n = b.V.rows.rows();
  const Eigen::Index p = b.V.rows.cols();
  if (n <= p) throw DataError("estimate_effect_wald: no residual degrees of freedom");
  const Eigen::VectorXd resid = b.y - b.V.rows * c.values;
  const double sigma2 = resid.squaredNorm() / static_cast<double>(n - p);
  const Eigen::MatrixXd xtx_inv =
      (b.V.rows.transpose() * b.V.rows).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  const double se = std::sqrt(sigma2 * xtx_inv(1, 1));
  const double z = normal_quantile(1.0 - alpha / 2.0);
  est.se = se;
  est.ci = ConfidenceInterval{est.point - z * se, est.point + z * se, 1.0 - alpha};
  return est;
}

}  // namespace slrcmi
