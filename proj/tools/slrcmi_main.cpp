// Command-line front end. Links only the C API in slrcmi.h.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slrcmi.h"

namespace {

struct SchemaFlags {
  std::string id_col = "patient_id";
  std::string visit_col = "visit";
  std::string arm_col = "arm";
  std::string outcome_col = "outcome";
  std::string on_treatment_col = "on_treatment";
  std::string stratum_col;  // empty = none
  std::vector<std::string> covariate_cols;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--id-col", id_col, "Patient id column name");
    cmd->add_option("--visit-col", visit_col, "Visit index column name");
    cmd->add_option("--arm-col", arm_col, "Arm column name (0=control, 1=active)");
    cmd->add_option("--outcome-col", outcome_col, "Outcome column name");
    cmd->add_option("--on-treatment-col", on_treatment_col, "On-treatment flag column name");
    cmd->add_option("--stratum-col", stratum_col,
                    "Randomization stratum column (enables stratified bootstrap)");
    cmd->add_option("--covariate-cols", covariate_cols,
                    "Covariate column names (default: every remaining column)")
        ->delimiter(',');
  }
};

class Schema {
 public:
  explicit Schema(const SchemaFlags& f) {
    slrcmi_csv_schema_init(&schema_);
    schema_.patient_col = f.id_col.c_str();
    schema_.visit_col = f.visit_col.c_str();
    schema_.arm_col = f.arm_col.c_str();
    schema_.outcome_col = f.outcome_col.c_str();
    schema_.on_treatment_col = f.on_treatment_col.c_str();
    if (!f.stratum_col.empty()) schema_.stratum_col = f.stratum_col.c_str();
    if (!f.covariate_cols.empty()) {
      for (const auto& c : f.covariate_cols) ptrs_.push_back(c.c_str());
      schema_.covariate_cols = ptrs_.data();
      schema_.n_covariate_cols = static_cast<int>(ptrs_.size());
    }
  }
  const slrcmi_csv_schema* get() const { return &schema_; }

 private:
  slrcmi_csv_schema schema_{};
  std::vector<const char*> ptrs_;
};

int fail(slrcmi_status st, const std::string& where) {
  std::cerr << "error: " << where << ": " << slrcmi_last_error() << "\n";
  return static_cast<int>(st);
}

std::string take_text(char* text) {
  std::string out = text ? text : "";
  slrcmi_free_text(text);
  return out;
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << content;
  return out.good();
}

// Science-relevant configuration echoed into every report for provenance.
// Execution-only knobs (thread count) are deliberately excluded so reports
// stay byte-identical across machines and thread counts.
std::string config_header(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream os;
  os << "# " << slrcmi_version() << "\n";
  for (const auto& [k, v] : kv) os << "# " << k << " = " << v << "\n";
  return os.str();
}

std::vector<const char*> to_ptrs(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

int strategy_code(const std::string& name) {
  if (name == "hypothetical") return SLRCMI_STRATEGY_HYPOTHETICAL;
  if (name == "j2r") return SLRCMI_STRATEGY_J2R;
  if (name == "cir") return SLRCMI_STRATEGY_CIR;
  return -1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-based conditional mean imputation with sequential linear "
               "regression: analysis, validation and simulation"};
  app.set_version_flag("--version", slrcmi_version());
  app.require_subcommand(1);

  // ---- analyze ----
  auto* analyze = app.add_subcommand("analyze", "Estimate a treatment effect from a CSV");
  std::string in_path, out_dir = "slrcmi-out";
  std::string strategy_name = "cir";
  int visit = -1;
  std::vector<std::string> imp_covs, ana_covs;
  std::string inference = "none";
  int boot_samples = 1000;
  std::uint64_t seed = 12345;
  double alpha = 0.05;
  int threads = 0;
  bool change_from_baseline = false, dump_replicates = false, dump_completed = false;
  SchemaFlags analyze_schema;
  analyze->add_option("--input", in_path, "Input CSV path")->required();
  analyze->add_option("--out", out_dir, "Output directory");
  analyze->add_option("--strategy", strategy_name, "hypothetical, j2r or cir")
      ->check(CLI::IsMember({"hypothetical", "j2r", "cir"}));
  analyze->add_option("--visit", visit, "Analysis visit (default: final visit)");
  analyze->add_option("--covariates", imp_covs, "Imputation covariates (default: all)")
      ->delimiter(',');
  analyze
      ->add_option("--analysis-covariates", ana_covs,
                   "Analysis model covariates; 'Y0' = completed visit-0 outcome "
                   "(default: imputation covariates)")
      ->delimiter(',');
  analyze->add_option("--inference", inference, "none, jackknife or bootstrap")
      ->check(CLI::IsMember({"none", "jackknife", "bootstrap"}));
  analyze->add_option("--boot-samples", boot_samples, "Bootstrap replicates");
  analyze->add_option("--seed", seed, "Bootstrap seed");
  analyze->add_option("--alpha", alpha, "Two-sided level");
  analyze->add_option("--threads", threads, "Worker threads (0 = all cores)");
  analyze->add_flag("--change-from-baseline", change_from_baseline,
                    "Analyze change from baseline; moves the baseline outcome into the "
                    "covariates under the name 'baseline'");
  analyze->add_flag("--dump-replicates", dump_replicates,
                    "Write the per-replicate estimates to replicates.csv");
  analyze->add_flag("--dump-completed", dump_completed,
                    "Write the completed dataset with provenance to completed.csv");
  analyze_schema.add_to(analyze);

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "Validate a trial CSV");
  std::string v_in, v_out = "slrcmi-out";
  SchemaFlags validate_schema;
  validate->add_option("--input", v_in, "Input CSV path")->required();
  validate->add_option("--out", v_out, "Output directory");
  validate_schema.add_to(validate);

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo operating-characteristics study");
  std::string scn_path, s_out = "slrcmi-out";
  int n_sims = 200;
  std::uint64_t s_seed = 12345;
  double s_alpha = 0.05;
  int s_boot = 500;
  int s_threads = 0;
  std::vector<std::string> s_methods = {"complete", "jackknife", "bootstrap"};
  std::string s_strategy;  // empty = scenario truth
  double truth_policy = 0.0;
  bool has_truth = false;
  long truth_mc = 10000000L;
  bool s_dump = false;
  simulate->add_option("--scenario", scn_path, "Scenario config path")->required();
  simulate->add_option("--out", s_out, "Output directory");
  simulate->add_option("--n-sims", n_sims, "Simulation replicates");
  simulate->add_option("--seed", s_seed, "Master seed");
  simulate->add_option("--alpha", s_alpha, "Two-sided level");
  simulate->add_option("--boot-samples", s_boot, "Bootstrap replicates per dataset");
  simulate->add_option("--threads", s_threads, "Worker threads (0 = all cores)");
  simulate
      ->add_option("--methods", s_methods,
                   "Any of: complete, jackknife, bootstrap (default: all)")
      ->delimiter(',');
  simulate->add_option("--strategy", s_strategy,
                       "SLR strategy (default: the scenario truth assumption)")
      ->check(CLI::IsMember({"hypothetical", "j2r", "cir"}));
  auto* tp = simulate->add_option("--truth-policy", truth_policy,
                                  "Known policy-estimand truth (skips the Monte Carlo "
                                  "truth computation)");
  simulate->add_option("--truth-mc", truth_mc,
                       "Monte Carlo draws per arm for the policy truth");
  simulate->add_flag("--dump-replicates", s_dump,
                     "Write per-replicate estimates to replicates.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message or help text
    return code == 0 ? 0 : 2;
  }

  try {
    namespace fs = std::filesystem;

    if (*analyze) {
      const auto t0 = std::chrono::steady_clock::now();
      Schema schema(analyze_schema);
      slrcmi_dataset* ds = nullptr;
      slrcmi_status st = slrcmi_dataset_read_csv(in_path.c_str(), schema.get(), &ds);
      if (st != SLRCMI_OK) return fail(st, "reading '" + in_path + "'");

      if (change_from_baseline) {
        slrcmi_dataset* cfb = nullptr;
        st = slrcmi_dataset_change_from_baseline(ds, &cfb);
        slrcmi_dataset_free(ds);
        if (st != SLRCMI_OK) return fail(st, "change from baseline");
        ds = cfb;
      }

      slrcmi_analysis_opts opts;
      slrcmi_analysis_opts_init(&opts);
      opts.strategy = static_cast<slrcmi_strategy>(strategy_code(strategy_name));
      opts.visit = visit;
      auto imp_ptrs = to_ptrs(imp_covs);
      if (!imp_covs.empty()) {
        opts.imputation_covariates = imp_ptrs.data();
        opts.n_imputation_covariates = static_cast<int>(imp_ptrs.size());
      }
      auto ana_ptrs = to_ptrs(ana_covs);
      if (!ana_covs.empty()) {
        opts.analysis_covariates = ana_ptrs.data();
        opts.n_analysis_covariates = static_cast<int>(ana_ptrs.size());
      }
      opts.inference = inference == "jackknife"   ? SLRCMI_INFER_JACKKNIFE
                       : inference == "bootstrap" ? SLRCMI_INFER_BOOTSTRAP
                                                  : SLRCMI_INFER_NONE;
      opts.boot_samples = boot_samples;
      opts.seed = seed;
      opts.alpha = alpha;
      opts.threads = threads;

      slrcmi_estimate* est = nullptr;
      st = slrcmi_analyze(ds, &opts, &est);
      if (st != SLRCMI_OK) {
        slrcmi_dataset_free(ds);
        return fail(st, "analyze");
      }

      std::vector<std::pair<std::string, std::string>> cfg = {
          {"subcommand", "analyze"},
          {"input", in_path},
          {"strategy", strategy_name},
          {"visit", std::to_string(visit)},
          {"covariates", join(imp_covs)},
          {"analysis_covariates", join(ana_covs)},
          {"inference", inference},
          {"boot_samples", std::to_string(boot_samples)},
          {"seed", std::to_string(seed)},
          {"alpha", std::to_string(alpha)},
          {"change_from_baseline", change_from_baseline ? "1" : "0"},
      };
      const std::string header = config_header(cfg);

      fs::create_directories(out_dir);
      char* text = nullptr;
      slrcmi_estimate_render(est, 0, &text);
      const std::string report = take_text(text);
      slrcmi_estimate_render(est, 1, &text);
      const std::string csv = take_text(text);
      if (!write_file(out_dir + "/estimate.txt", header + report) ||
          !write_file(out_dir + "/estimate.csv", header + csv)) {
        std::cerr << "error: cannot write to '" << out_dir << "'\n";
        return 3;
      }
      if (dump_replicates && opts.inference != SLRCMI_INFER_NONE) {
        slrcmi_estimate_replicates_csv(est, &text);
        write_file(out_dir + "/replicates.csv", take_text(text));
      }
      if (dump_completed) {
        slrcmi_completed* cd = nullptr;
        st = slrcmi_impute(ds, opts.strategy, opts.imputation_covariates,
                           opts.n_imputation_covariates, &cd);
        if (st != SLRCMI_OK) return fail(st, "impute");
        slrcmi_completed_write_csv(cd, (out_dir + "/completed.csv").c_str());
        slrcmi_completed_free(cd);
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << report;
      std::fprintf(stdout, "elapsed_seconds: %.3f\n", secs);
      std::cout << "report written to " << out_dir << "/estimate.txt\n";
      slrcmi_estimate_free(est);
      slrcmi_dataset_free(ds);
      return 0;
    }

    if (*validate) {
      Schema schema(validate_schema);
      slrcmi_dataset* ds = nullptr;
      slrcmi_status st = slrcmi_dataset_read_csv(v_in.c_str(), schema.get(), &ds);
      if (st != SLRCMI_OK) return fail(st, "reading '" + v_in + "'");
      slrcmi_validation* rep = nullptr;
      st = slrcmi_validate(ds, &rep);
      if (st != SLRCMI_OK) {
        slrcmi_dataset_free(ds);
        return fail(st, "validate");
      }
      const std::string header =
          config_header({{"subcommand", "validate"}, {"input", v_in}});
      char* text = nullptr;
      slrcmi_validation_render(rep, 0, &text);
      const std::string report = take_text(text);
      slrcmi_validation_render(rep, 1, &text);
      const std::string csv = take_text(text);
      fs::create_directories(v_out);
      write_file(v_out + "/validation.txt", header + report);
      write_file(v_out + "/validation.csv", header + csv);
      std::cout << report;
      const int errors = slrcmi_validation_error_count(rep);
      slrcmi_validation_free(rep);
      slrcmi_dataset_free(ds);
      return errors > 0 ? 3 : 0;
    }

    if (*simulate) {
      const auto t0 = std::chrono::steady_clock::now();
      has_truth = tp->count() > 0;
      slrcmi_scenario* scn = nullptr;
      slrcmi_status st = slrcmi_scenario_read(scn_path.c_str(), &scn);
      if (st != SLRCMI_OK) return fail(st, "reading scenario '" + scn_path + "'");

      slrcmi_simulate_opts opts;
      slrcmi_simulate_opts_init(&opts);
      opts.n_sims = n_sims;
      opts.seed = s_seed;
      opts.alpha = s_alpha;
      opts.boot_samples = s_boot;
      opts.threads = s_threads;
      opts.run_complete_data = 0;
      opts.run_jackknife = 0;
      opts.run_bootstrap = 0;
      for (const auto& m : s_methods) {
        if (m == "complete") opts.run_complete_data = 1;
        else if (m == "jackknife") opts.run_jackknife = 1;
        else if (m == "bootstrap") opts.run_bootstrap = 1;
        else {
          std::cerr << "error: unknown method '" << m << "'\n";
          return 2;
        }
      }
      if (!s_strategy.empty()) opts.strategy = strategy_code(s_strategy);
      opts.has_truth_policy = has_truth ? 1 : 0;
      opts.truth_policy = truth_policy;
      opts.truth_mc_per_arm = truth_mc;
      opts.keep_replicates = s_dump ? 1 : 0;

      slrcmi_simreport* rep = nullptr;
      st = slrcmi_simulate(scn, &opts, &rep);
      if (st != SLRCMI_OK) {
        slrcmi_scenario_free(scn);
        return fail(st, "simulate");
      }

      char* text = nullptr;
      slrcmi_scenario_render(scn, &text);
      std::string scenario_echo = take_text(text);
      {
        std::istringstream is(scenario_echo);
        std::ostringstream os;
        std::string line;
        while (std::getline(is, line)) os << "# " << line << "\n";
        scenario_echo = os.str();
      }
      std::vector<std::pair<std::string, std::string>> cfg = {
          {"subcommand", "simulate"},
          {"scenario", scn_path},
          {"n_sims", std::to_string(n_sims)},
          {"seed", std::to_string(s_seed)},
          {"alpha", std::to_string(s_alpha)},
          {"boot_samples", std::to_string(s_boot)},
          {"methods", join(s_methods)},
          {"strategy", s_strategy.empty() ? "scenario-truth" : s_strategy},
          {"truth_policy", has_truth ? std::to_string(truth_policy) : "monte-carlo"},
          {"truth_mc", std::to_string(truth_mc)},
      };
      const std::string header = config_header(cfg) + scenario_echo;

      slrcmi_simreport_render(rep, 0, &text);
      const std::string report = take_text(text);
      slrcmi_simreport_render(rep, 1, &text);
      const std::string csv = take_text(text);
      fs::create_directories(s_out);
      if (!write_file(s_out + "/simulation_report.txt", header + report) ||
          !write_file(s_out + "/simulation_report.csv", header + csv)) {
        std::cerr << "error: cannot write to '" << s_out << "'\n";
        return 3;
      }
      if (s_dump) {
        slrcmi_simreport_replicates_csv(rep, &text);
        write_file(s_out + "/replicates.csv", take_text(text));
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << report;
      std::fprintf(stdout, "elapsed_seconds: %.3f\n", secs);
      std::cout << "report written to " << s_out << "/simulation_report.txt\n";
      slrcmi_simreport_free(rep);
      slrcmi_scenario_free(scn);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
