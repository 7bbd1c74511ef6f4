#include "core/imputation.hpp"

#include <numeric>
#include <sstream>

#include "core/errors.hpp"

namespace slrcmi {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Hypothetical: return "hypothetical";
    case Strategy::J2R: return "j2r";
    case Strategy::CIR: return "cir";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "hypothetical" || name == "h") return Strategy::Hypothetical;
  if (name == "j2r") return Strategy::J2R;
  if (name == "cir") return Strategy::CIR;
  throw UsageError("unknown strategy '" + name + "' (expected hypothetical, j2r or cir)");
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::ObservedUsed: return "observed";
    case Provenance::ImputedOnTreatment: return "imputed_on_treatment";
    case Provenance::ImputedReference: return "imputed_reference";
    case Provenance::ObservedOverwritten: return "observed_overwritten";
  }
  return "?";
}

namespace {

const char* arm_name(int z) { return z == 1 ? "active" : "control"; }

struct RowContext {
  std::vector<const PatientRecord*> patients;  // one per selected row
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X;  // n x k
};

std::vector<int> resolve_covariates(const TrialDataset& ds,
                                    const std::vector<std::string>& selection,
                                    std::vector<std::string>& names_out) {
  std::vector<int> idx;
  if (selection.empty()) {
    names_out = ds.covariate_names;
    idx.resize(ds.covariate_names.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  for (const auto& name : selection) {
    bool found = false;
    for (std::size_t c = 0; c < ds.covariate_names.size(); ++c) {
      if (ds.covariate_names[c] == name) {
        idx.push_back(static_cast<int>(c));
        names_out.push_back(name);
        found = true;
        break;
      }
    }
    if (!found) throw UsageError("unknown imputation covariate '" + name + "'");
  }
  return idx;
}

RowContext make_context(const TrialDataset& ds, std::span<const int> rows,
                        const std::vector<int>& covariate_index) {
  if (rows.empty()) throw UsageError("empty patient selection");
  RowContext ctx;
  const std::size_t n = rows.size();
  const std::size_t k = covariate_index.size();
  ctx.patients.resize(n);
  ctx.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const int r = rows[i];
    if (r < 0 || static_cast<std::size_t>(r) >= ds.patients.size())
      throw UsageError("patient index out of range");
    const PatientRecord& p = ds.patients[static_cast<std::size_t>(r)];
    if (static_cast<int>(p.outcomes.size()) != ds.n_visits)
      throw DataError("patient '" + p.id + "' has an outcome vector of the wrong length");
    ctx.patients[i] = &p;
    for (std::size_t c = 0; c < k; ++c)
      ctx.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          p.covariates[static_cast<std::size_t>(covariate_index[c])];
  }
  return ctx;
}

std::vector<std::string> conditional_labels(const std::vector<std::string>& covs, int j) {
  std::vector<std::string> labels;
  labels.reserve(1 + covs.size() + static_cast<std::size_t>(j));
  labels.emplace_back("intercept");
  labels.insert(labels.end(), covs.begin(), covs.end());
  for (int l = 0; l < j; ++l) labels.push_back("Y_" + std::to_string(l));
  return labels;
}

// eta_hat for visit j: coefficients on (1, X, Y_0..Y_{j-1}).
double predict_conditional(const linalg::Coefficients& c, const RowContext& ctx,
                           const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>& history,
                           std::size_t i, int j) {
  const Eigen::Index k = ctx.X.cols();
  double v = c.values[0];
  if (k > 0) v += c.values.segment(1, k).dot(ctx.X.row(static_cast<Eigen::Index>(i)));
  if (j > 0)
    v += c.values.segment(1 + k, j).dot(history.row(static_cast<Eigen::Index>(i)).head(j));
  return v;
}

double predict_marginal(const linalg::Coefficients& c, const RowContext& ctx, std::size_t i) {
  const Eigen::Index k = ctx.X.cols();
  double v = c.values[0];
  if (k > 0) v += c.values.segment(1, k).dot(ctx.X.row(static_cast<Eigen::Index>(i)));
  return v;
}

}  // namespace

FittedSlrModels fit_slr_models_rows(const TrialDataset& ds, std::span<const int> rows,
                                    const std::vector<std::string>& covariate_selection) {
  FittedSlrModels m;
  m.n_visits = ds.n_visits;
  m.covariate_index = resolve_covariates(ds, covariate_selection, m.covariates);
  const RowContext ctx = make_context(ds, rows, m.covariate_index);

  const int V = ds.n_visits;
  const std::size_t n = rows.size();
  const Eigen::Index k = ctx.X.cols();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> yh(
      static_cast<Eigen::Index>(n), V);
  m.fits.resize(static_cast<std::size_t>(V));

  std::vector<std::string> marginal_labels = conditional_labels(m.covariates, 0);

  for (int j = 0; j < V; ++j) {
    const Eigen::Index p = 1 + k + j;
    const std::vector<std::string> labels = conditional_labels(m.covariates, j);

    // Conditional fits on on-treatment complete cases, both arms.
    for (int z = 0; z < 2; ++z) {
      std::vector<std::size_t> sel;
      for (std::size_t i = 0; i < n; ++i) {
        const PatientRecord& pr = *ctx.patients[i];
        if (pr.arm == z && pr.observed(j) && pr.disc_visit > j) sel.push_back(i);
      }
      if (static_cast<Eigen::Index>(sel.size()) < p) {
        std::ostringstream os;
        os << "fit_slr_models: insufficient on-treatment complete cases at visit " << j
           << " in the " << arm_name(z) << " arm (need at least " << p << ", have "
           << sel.size() << ")";
        throw DataError(os.str());
      }
      linalg::DesignMatrix A;
      A.column_labels = labels;
      A.rows.resize(static_cast<Eigen::Index>(sel.size()), p);
      Eigen::VectorXd y(static_cast<Eigen::Index>(sel.size()));
      for (std::size_t t = 0; t < sel.size(); ++t) {
        const std::size_t i = sel[t];
        auto row = A.rows.row(static_cast<Eigen::Index>(t));
        row[0] = 1.0;
        if (k > 0) row.segment(1, k) = ctx.X.row(static_cast<Eigen::Index>(i));
        if (j > 0) row.segment(1 + k, j) = yh.row(static_cast<Eigen::Index>(i)).head(j);
        y[static_cast<Eigen::Index>(t)] =
            *ctx.patients[i]->outcomes[static_cast<std::size_t>(j)];
      }
      VisitArmFit& fit = m.fits[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)];
      fit.conditional = linalg::fit_ols(A, y);
      fit.n_complete_cases = static_cast<int>(sel.size());
    }

    // Complete the on-treatment outcome at visit j for every row.
    for (std::size_t i = 0; i < n; ++i) {
      const PatientRecord& pr = *ctx.patients[i];
      const int z = pr.arm;
      double v;
      if (pr.observed(j) && pr.disc_visit > j)
        v = *pr.outcomes[static_cast<std::size_t>(j)];
      else
        v = predict_conditional(
            m.fits[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].conditional, ctx,
            yh, i, j);
      yh(static_cast<Eigen::Index>(i), j) = v;
    }

    // Marginal fits on the completed outcome, all arm-z rows.
    for (int z = 0; z < 2; ++z) {
      std::vector<std::size_t> sel;
      for (std::size_t i = 0; i < n; ++i)
        if (ctx.patients[i]->arm == z) sel.push_back(i);
      if (static_cast<Eigen::Index>(sel.size()) < 1 + k) {
        std::ostringstream os;
        os << "fit_slr_models: insufficient patients for the marginal model at visit " << j
           << " in the " << arm_name(z) << " arm (need at least " << (1 + k) << ", have "
           << sel.size() << ")";
        throw DataError(os.str());
      }
      linalg::DesignMatrix A;
      A.column_labels = marginal_labels;
      A.rows.resize(static_cast<Eigen::Index>(sel.size()), 1 + k);
      Eigen::VectorXd y(static_cast<Eigen::Index>(sel.size()));
      for (std::size_t t = 0; t < sel.size(); ++t) {
        const std::size_t i = sel[t];
        auto row = A.rows.row(static_cast<Eigen::Index>(t));
        row[0] = 1.0;
        if (k > 0) row.segment(1, k) = ctx.X.row(static_cast<Eigen::Index>(i));
        y[static_cast<Eigen::Index>(t)] = yh(static_cast<Eigen::Index>(i), j);
      }
      m.fits[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].marginal =
          linalg::fit_ols(A, y);
    }
  }
  return m;
}

FittedSlrModels fit_slr_models(const TrialDataset& ds,
                               const std::vector<std::string>& covariate_selection) {
  std::vector<int> all(ds.patients.size());
  std::iota(all.begin(), all.end(), 0);
  return fit_slr_models_rows(ds, all, covariate_selection);
}

CompletedDataset impute_rows(const TrialDataset& ds, std::span<const int> rows,
                             const FittedSlrModels& m, Strategy strategy) {
  if (m.n_visits != ds.n_visits)
    throw UsageError("impute: models were fitted on a different visit grid");
  const RowContext ctx = make_context(ds, rows, m.covariate_index);
  const int V = ds.n_visits;
  const std::size_t n = rows.size();
  const Eigen::Index k = ctx.X.cols();

  CompletedDataset cd;
  cd.strategy = strategy;
  cd.source = &ds;
  cd.patient_rows.assign(rows.begin(), rows.end());
  cd.values.resize(static_cast<Eigen::Index>(n), V);
  cd.provenance.assign(n * static_cast<std::size_t>(V), Provenance::ObservedUsed);
  auto set_prov = [&](std::size_t i, int j, Provenance p) {
    cd.provenance[i * static_cast<std::size_t>(V) + static_cast<std::size_t>(j)] = p;
  };

  // Marginal means mu_hat_{i,j}(z), needed by the reference-based branches.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mu0, mu1;
  if (strategy != Strategy::Hypothetical) {
    mu0.resize(static_cast<Eigen::Index>(n), V);
    mu1.resize(static_cast<Eigen::Index>(n), V);
    for (int j = 0; j < V; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        mu0(static_cast<Eigen::Index>(i), j) =
            predict_marginal(m.at(j, 0).marginal, ctx, i);
        mu1(static_cast<Eigen::Index>(i), j) =
            predict_marginal(m.at(j, 1).marginal, ctx, i);
      }
  }

  std::vector<double> muvec(static_cast<std::size_t>(V));
  for (int j = 0; j < V; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const PatientRecord& pr = *ctx.patients[i];
      const int z = pr.arm;
      const int d = pr.disc_visit;
      const bool obs = pr.observed(j);
      double value;

      if (strategy == Strategy::Hypothetical) {
        // Keep only on-treatment observed values; everything else gets the
        // on-treatment conditional mean, observed off-treatment data
        // included (they carry the discontinuation effect).
        if (obs && d > j) {
          value = *pr.outcomes[static_cast<std::size_t>(j)];
        } else {
          value = predict_conditional(m.at(j, z).conditional, ctx, cd.values, i, j);
          set_prov(i, j, obs ? Provenance::ObservedOverwritten
                             : Provenance::ImputedOnTreatment);
        }
      } else if (obs) {
        value = *pr.outcomes[static_cast<std::size_t>(j)];
      } else if (z == 0 || d > j || j == 0) {
        // MAR branch: own-arm conditional model on the completed history.
        // (At baseline the reference recursions reduce to this as well.)
        value = predict_conditional(m.at(j, z).conditional, ctx, cd.values, i, j);
        set_prov(i, j, Provenance::ImputedOnTreatment);
      } else {
        // Active arm, off treatment, missing: reference-based conditional
        // mean built from the control-arm lag coefficients and the
        // piecewise marginal-mean history.
        double shift = 0.0;
        if (strategy == Strategy::CIR) {
          if (d == 0)
            throw DataError(
                "impute_cir: patient '" + pr.id +
                "' never received treatment (D=0) but has a missing post-baseline outcome; "
                "the CIR reference mean at visit D-1 does not exist. Recode the patient or "
                "use J2R.");
          shift = mu1(static_cast<Eigen::Index>(i), d - 1) -
                  mu0(static_cast<Eigen::Index>(i), d - 1);
        }
        for (int l = 0; l < j; ++l) {
          if (l < d)
            muvec[static_cast<std::size_t>(l)] = mu1(static_cast<Eigen::Index>(i), l);
          else
            muvec[static_cast<std::size_t>(l)] = shift + mu0(static_cast<Eigen::Index>(i), l);
        }
        const auto beta0 = m.at(j, 0).conditional.values.segment(1 + k, j);
        double v = shift + mu0(static_cast<Eigen::Index>(i), j);
        for (int l = 0; l < j; ++l)
          v += beta0[l] * (cd.values(static_cast<Eigen::Index>(i), l) -
                           muvec[static_cast<std::size_t>(l)]);
        value = v;
        set_prov(i, j, Provenance::ImputedReference);
      }
      cd.values(static_cast<Eigen::Index>(i), j) = value;
    }
  }
  return cd;
}

CompletedDataset impute(const TrialDataset& ds, const FittedSlrModels& m, Strategy strategy) {
  std::vector<int> all(ds.patients.size());
  std::iota(all.begin(), all.end(), 0);
  return impute_rows(ds, all, m, strategy);
}

std::string completed_to_csv(const CompletedDataset& cd) {
  std::ostringstream os;
  os << "patient_id,visit,arm,value,provenance\n";
  const int V = cd.n_visits();
  for (std::size_t i = 0; i < cd.n_rows(); ++i) {
    const PatientRecord& pr =
        cd.source->patients[static_cast<std::size_t>(cd.patient_rows[i])];
    for (int j = 0; j < V; ++j)
      os << pr.id << ',' << j << ',' << pr.arm << ','
         << format_double(cd.values(static_cast<Eigen::Index>(i), j)) << ','
         << to_string(cd.prov(i, j)) << '\n';
  }
  return os.str();
}

CompletedDataset completed_from_observed(const TrialDataset& ds) {
  CompletedDataset cd;
  cd.strategy = Strategy::Hypothetical;
  cd.source = &ds;
  cd.patient_rows.resize(ds.patients.size());
  std::iota(cd.patient_rows.begin(), cd.patient_rows.end(), 0);
  cd.values.resize(static_cast<Eigen::Index>(ds.patients.size()), ds.n_visits);
  cd.provenance.assign(ds.patients.size() * static_cast<std::size_t>(ds.n_visits),
                       Provenance::ObservedUsed);
  for (std::size_t i = 0; i < ds.patients.size(); ++i) {
    const PatientRecord& pr = ds.patients[i];
    for (int j = 0; j < ds.n_visits; ++j) {
      if (!pr.observed(j))
        throw DataError("complete-data analysis requires a fully observed dataset; patient '" +
                        pr.id + "' is missing visit " + std::to_string(j));
      cd.values(static_cast<Eigen::Index>(i), j) = *pr.outcomes[static_cast<std::size_t>(j)];
    }
  }
  return cd;
}

}  // namespace slrcmi
