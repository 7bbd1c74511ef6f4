#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/linalg.hpp"

namespace slrcmi {

enum class Strategy { Hypothetical, J2R, CIR };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct VisitArmFit {
  // Conditional mean of Y_j given (1, X, completed Y_0..Y_{j-1}), fitted on
  // arm-z on-treatment complete cases at visit j.
  linalg::Coefficients conditional;
  // Marginal mean of the completed on-treatment outcome given (1, X), fitted
  // on every arm-z patient.
  linalg::Coefficients marginal;
  int n_complete_cases = 0;
};

struct FittedSlrModels {
  int n_visits = 0;
  std::vector<std::string> covariates;  // imputation covariate selection
  std::vector<int> covariate_index;     // positions within ds.covariate_names
  std::vector<std::array<VisitArmFit, 2>> fits;  // [visit][arm]

  const VisitArmFit& at(int visit, int arm) const {
    return fits[static_cast<std::size_t>(visit)][static_cast<std::size_t>(arm)];
  }
};

enum class Provenance : unsigned char {
  ObservedUsed = 0,
  ImputedOnTreatment = 1,  // conditional on-treatment model (MAR branch)
  ImputedReference = 2,    // reference-based branch (active arm, off treatment)
  ObservedOverwritten = 3  // observed off-treatment value replaced (hypothetical only)
};

const char* to_string(Provenance p);

struct CompletedDataset {
  Strategy strategy = Strategy::Hypothetical;
  const TrialDataset* source = nullptr;  // non-owning; must outlive this object
  std::vector<int> patient_rows;         // source patient index per row (resampling-aware)
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;  // n x M+1
  std::vector<Provenance> provenance;    // row-major, n x M+1

  int n_visits() const { return static_cast<int>(values.cols()); }
  std::size_t n_rows() const { return patient_rows.size(); }
  Provenance prov(std::size_t row, int visit) const {
    return provenance[row * static_cast<std::size_t>(n_visits()) + static_cast<std::size_t>(visit)];
  }
};

// Fits, in visit order, the per-arm conditional models on on-treatment
// complete cases and the per-arm marginal models on the completed
// on-treatment outcomes. An empty covariate selection list means "all
// dataset covariates".
FittedSlrModels fit_slr_models(const TrialDataset& ds,
                               const std::vector<std::string>& covariate_selection = {});

// Row-set variant used by resampling; `rows` lists source patient indices and
// may repeat them (bootstrap).
FittedSlrModels fit_slr_models_rows(const TrialDataset& ds, std::span<const int> rows,
                                    const std::vector<std::string>& covariate_selection = {});

CompletedDataset impute(const TrialDataset& ds, const FittedSlrModels& m, Strategy strategy);
CompletedDataset impute_rows(const TrialDataset& ds, std::span<const int> rows,
                             const FittedSlrModels& m, Strategy strategy);

inline CompletedDataset impute_hypothetical(const TrialDataset& ds, const FittedSlrModels& m) {
  return impute(ds, m, Strategy::Hypothetical);
}
inline CompletedDataset impute_j2r(const TrialDataset& ds, const FittedSlrModels& m) {
  return impute(ds, m, Strategy::J2R);
}
inline CompletedDataset impute_cir(const TrialDataset& ds, const FittedSlrModels& m) {
  return impute(ds, m, Strategy::CIR);
}

// Long-format audit export: patient_id, visit, arm, value, provenance.
std::string completed_to_csv(const CompletedDataset& cd);

// Wraps a fully observed dataset as a CompletedDataset without fitting any
// model (complete-data estimator path).
CompletedDataset completed_from_observed(const TrialDataset& ds);

}  // namespace slrcmi
