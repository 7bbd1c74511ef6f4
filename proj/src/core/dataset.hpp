#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slrcmi {

struct PatientRecord {
  std::string id;
  int arm = 0;                                  // 1 = active, 0 = control
  std::vector<double> covariates;               // complete, ordered as covariate_names
  std::vector<std::optional<double>> outcomes;  // length M+1; nullopt = missing
  int disc_visit = 0;                           // D in 0..M+1; M+1 = never discontinued
  std::optional<std::string> stratum;

  bool on_treatment(int visit) const { return visit < disc_visit; }
  bool observed(int visit) const { return outcomes[static_cast<std::size_t>(visit)].has_value(); }
};

// Immutable after construction; safe to share read-only across resampling
// tasks.
struct TrialDataset {
  std::vector<PatientRecord> patients;  // stable insertion order
  int n_visits = 0;                     // M+1 (visit 0 = baseline)
  std::vector<std::string> covariate_names;
  std::optional<std::string> strata_name;

  int last_visit() const { return n_visits - 1; }
  std::size_t n_patients() const { return patients.size(); }
};

// Long-format CSV column mapping; one row per patient-visit. Covariate
// columns default to every column not otherwise claimed.
struct ColumnSchema {
  std::string patient_col = "patient_id";
  std::string visit_col = "visit";
  std::string arm_col = "arm";
  std::string outcome_col = "outcome";
  std::string on_treatment_col = "on_treatment";
  std::optional<std::string> stratum_col;
  std::optional<std::vector<std::string>> covariate_cols;
};

struct ValidationIssue {
  std::string patient_id;
  std::string rule;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;
  long n_patients = 0;
  std::array<long, 2> n_patients_by_arm = {0, 0};
  double missing_fraction = 0.0;
  std::vector<double> missing_fraction_by_visit;
  std::array<double, 2> missing_fraction_by_arm = {0.0, 0.0};
  // discontinued_at[j][z] = # arm-z patients with D == j, j in 0..M+1
  std::vector<std::array<long, 2>> discontinued_at;

  bool ok() const { return errors.empty(); }
};

TrialDataset parse_trial_csv(std::string_view text, const ColumnSchema& schema = {});
TrialDataset read_trial_csv(const std::string& path, const ColumnSchema& schema = {});
std::string serialize_trial_csv(const TrialDataset& ds, const ColumnSchema& schema = {});
void write_trial_csv(const TrialDataset& ds, const std::string& path,
                     const ColumnSchema& schema = {});

ValidationReport validate(const TrialDataset& ds);
std::string render_validation_text(const ValidationReport& report);
std::string render_validation_csv(const ValidationReport& report);

// Replaces post-baseline outcomes by Y_j - Y_0 and moves the baseline outcome
// into the covariate vector; the visit grid shrinks by one and D shifts
// accordingly. Patients with a missing baseline are an error.
TrialDataset change_from_baseline(const TrialDataset& ds,
                                  const std::string& baseline_name = "baseline");

// Full-precision decimal rendering that round-trips through strtod.
std::string format_double(double v);

}  // namespace slrcmi
