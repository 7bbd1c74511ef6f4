#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core/dataset.hpp"

namespace fixtures {

inline slrcmi::PatientRecord patient(std::string id, int arm,
                                     std::vector<std::optional<double>> outcomes,
                                     int disc_visit, std::vector<double> covariates = {}) {
  slrcmi::PatientRecord p;
  p.id = std::move(id);
  p.arm = arm;
  p.outcomes = std::move(outcomes);
  p.disc_visit = disc_visit;
  p.covariates = std::move(covariates);
  return p;
}

// Intercept-only fixture, M = 1. Control fully observed with Y1 = Y0 on
// {0,1,2,3}; active B=(2,5), C=(4,7) on treatment, A=(4, missing) with D=1.
inline slrcmi::TrialDataset tiny_fixture_a() {
  slrcmi::TrialDataset ds;
  ds.n_visits = 2;
  ds.patients.push_back(patient("R1", 0, {0.0, 0.0}, 2));
  ds.patients.push_back(patient("R2", 0, {1.0, 1.0}, 2));
  ds.patients.push_back(patient("R3", 0, {2.0, 2.0}, 2));
  ds.patients.push_back(patient("R4", 0, {3.0, 3.0}, 2));
  ds.patients.push_back(patient("B", 1, {2.0, 5.0}, 2));
  ds.patients.push_back(patient("C", 1, {4.0, 7.0}, 2));
  ds.patients.push_back(patient("A", 1, {4.0, std::nullopt}, 1));
  return ds;
}

// Random dataset with enough complete cases for every regression; used by
// property tests. Outcomes follow an AR-style recursion so the lag fits are
// well conditioned.
inline slrcmi::TrialDataset random_dataset(std::mt19937_64& eng, int n_per_arm, int n_visits,
                                           int n_covariates, double missing_prob,
                                           double disc_prob, bool with_strata = false) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  slrcmi::TrialDataset ds;
  ds.n_visits = n_visits;
  for (int c = 0; c < n_covariates; ++c) ds.covariate_names.push_back("x" + std::to_string(c + 1));
  if (with_strata) ds.strata_name = "site";
  for (int arm = 0; arm < 2; ++arm) {
    for (int i = 0; i < n_per_arm; ++i) {
      slrcmi::PatientRecord p;
      p.id = (arm == 1 ? "a" : "c") + std::to_string(i);
      p.arm = arm;
      for (int c = 0; c < n_covariates; ++c) p.covariates.push_back(U(eng) < 0.5 ? 0.0 : 1.0);
      if (with_strata) p.stratum = U(eng) < 0.5 ? "s1" : "s2";
      p.disc_visit = n_visits;
      for (int j = 1; j < n_visits; ++j)
        if (p.disc_visit == n_visits && U(eng) < disc_prob) p.disc_visit = j;
      double prev = 0.0;
      p.outcomes.resize(static_cast<std::size_t>(n_visits));
      for (int j = 0; j < n_visits; ++j) {
        double mean = 0.3 * arm + 0.2 * j + 0.5 * prev;
        for (int c = 0; c < n_covariates; ++c) mean += 0.1 * (c + 1) * p.covariates[c];
        const double v = mean + N(eng);
        prev = v;
        if (!(U(eng) < missing_prob)) p.outcomes[static_cast<std::size_t>(j)] = v;
      }
      ds.patients.push_back(std::move(p));
    }
  }
  return ds;
}

}  // namespace fixtures
