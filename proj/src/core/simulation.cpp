#include "core/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "core/errors.hpp"
#include "core/linalg.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace slrcmi {

void Scenario::check() const {
  if (n_per_arm < 1) throw UsageError("scenario: n_per_arm must be >= 1");
  if (n_outcome_visits < 1) throw UsageError("scenario: n_visits must be >= 1");
  for (double p : covariate_probs)
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("scenario: covariate_probs must be in [0,1]");
  if (outcome_coefs.size() != 1 + covariate_probs.size())
    throw UsageError("scenario: outcome_coefs must have one entry for Y0 plus one per covariate");
  if (static_cast<int>(lambda_control.size()) != n_outcome_visits ||
      static_cast<int>(lambda_active.size()) != n_outcome_visits)
    throw UsageError("scenario: lambda vectors must have n_visits entries");
  if (sigma.rows() != n_outcome_visits || sigma.cols() != n_outcome_visits)
    throw UsageError("scenario: sigma must be n_visits x n_visits");
  if (!(baseline_sd >= 0.0)) throw UsageError("scenario: baseline_sd must be >= 0");
  if (!(withdrawal_prob >= 0.0 && withdrawal_prob <= 1.0))
    throw UsageError("scenario: withdrawal_prob must be in [0,1]");
  if (!(cell_missing_prob >= 0.0 && cell_missing_prob <= 1.0))
    throw UsageError("scenario: cell_missing_prob must be in [0,1]");
  if (disc_first_visit < 1) throw UsageError("scenario: disc_first_visit must be >= 1");
  if (truth == Strategy::Hypothetical)
    throw UsageError("scenario: truth must be cir or j2r");
}

namespace {

std::vector<double> parse_double_list(const std::string& value, const std::string& key) {
  std::vector<double> out;
  std::istringstream is(value);
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
      throw UsageError("scenario: malformed number '" + tok + "' for key '" + key + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("scenario: empty value for key '" + key + "'");
  return out;
}

double parse_double_one(const std::string& value, const std::string& key) {
  auto v = parse_double_list(value, key);
  if (v.size() != 1) throw UsageError("scenario: key '" + key + "' expects a single number");
  return v[0];
}

int parse_int_one(const std::string& value, const std::string& key) {
  double v = parse_double_one(value, key);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw UsageError("scenario: key '" + key + "' expects an integer");
  return i;
}

std::string trim_copy(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, e - b + 1);
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  s.lambda_control.clear();
  s.lambda_active.clear();
  bool have_n_visits = false, have_sigma = false;
  int sigma_rows_read = 0, sigma_rows_expected = 0;

  std::istringstream in{std::string(text)};
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim_copy(raw);
    if (line.empty()) continue;

    if (sigma_rows_read < sigma_rows_expected) {
      const auto row = parse_double_list(line, "sigma");
      if (static_cast<int>(row.size()) != s.n_outcome_visits)
        throw UsageError("scenario: sigma row " + std::to_string(sigma_rows_read + 1) +
                         " has " + std::to_string(row.size()) + " entries, expected " +
                         std::to_string(s.n_outcome_visits));
      for (int c = 0; c < s.n_outcome_visits; ++c) s.sigma(sigma_rows_read, c) = row[c];
      ++sigma_rows_read;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("scenario: expected 'key = value' at line " + std::to_string(line_no));
    const std::string key = trim_copy(line.substr(0, eq));
    const std::string value = trim_copy(line.substr(eq + 1));

    if (key == "n_per_arm") s.n_per_arm = parse_int_one(value, key);
    else if (key == "n_visits") {
      s.n_outcome_visits = parse_int_one(value, key);
      have_n_visits = true;
    } else if (key == "covariate_probs") s.covariate_probs = parse_double_list(value, key);
    else if (key == "baseline_mean") s.baseline_mean = parse_double_one(value, key);
    else if (key == "baseline_sd") s.baseline_sd = parse_double_one(value, key);
    else if (key == "outcome_coefs") s.outcome_coefs = parse_double_list(value, key);
    else if (key == "lambda_control") s.lambda_control = parse_double_list(value, key);
    else if (key == "lambda_active") s.lambda_active = parse_double_list(value, key);
    else if (key == "sigma") {
      if (!value.empty())
        throw UsageError("scenario: sigma starts a matrix block; put the rows on the "
                         "following lines");
      if (!have_n_visits) throw UsageError("scenario: n_visits must be set before sigma");
      sigma_rows_expected = s.n_outcome_visits;
      sigma_rows_read = 0;
      s.sigma.resize(s.n_outcome_visits, s.n_outcome_visits);
      have_sigma = true;
    } else if (key == "disc_intercept") s.disc_intercept = parse_double_one(value, key);
    else if (key == "disc_coef_prev") s.disc_coef_prev = parse_double_one(value, key);
    else if (key == "disc_coef_baseline") s.disc_coef_baseline = parse_double_one(value, key);
    else if (key == "disc_first_visit") s.disc_first_visit = parse_int_one(value, key);
    else if (key == "withdrawal_prob") s.withdrawal_prob = parse_double_one(value, key);
    else if (key == "cell_missing_prob") s.cell_missing_prob = parse_double_one(value, key);
    else if (key == "truth") s.truth = strategy_from_string(value);
    else throw UsageError("scenario: unknown key '" + key + "'");
  }
  if (!have_sigma) throw UsageError("scenario: missing sigma matrix");
  if (sigma_rows_read != sigma_rows_expected)
    throw UsageError("scenario: sigma block has " + std::to_string(sigma_rows_read) +
                     " rows, expected " + std::to_string(sigma_rows_expected));
  if (s.lambda_control.empty() || s.lambda_active.empty())
    throw UsageError("scenario: lambda_control and lambda_active are required");
  s.check();
  return s;
}

Scenario read_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string render_scenario(const Scenario& s) {
  std::ostringstream os;
  auto list = [&](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ' ';
      out += format_double(v[i]);
    }
    return out;
  };
  os << "n_per_arm = " << s.n_per_arm << '\n';
  os << "n_visits = " << s.n_outcome_visits << '\n';
  os << "covariate_probs = " << list(s.covariate_probs) << '\n';
  os << "baseline_mean = " << format_double(s.baseline_mean) << '\n';
  os << "baseline_sd = " << format_double(s.baseline_sd) << '\n';
  os << "outcome_coefs = " << list(s.outcome_coefs) << '\n';
  os << "lambda_control = " << list(s.lambda_control) << '\n';
  os << "lambda_active = " << list(s.lambda_active) << '\n';
  os << "sigma =\n";
  for (int r = 0; r < s.n_outcome_visits; ++r) {
    os << "  ";
    for (int c = 0; c < s.n_outcome_visits; ++c) {
      if (c) os << ' ';
      os << format_double(s.sigma(r, c));
    }
    os << '\n';
  }
  os << "disc_intercept = " << format_double(s.disc_intercept) << '\n';
  os << "disc_coef_prev = " << format_double(s.disc_coef_prev) << '\n';
  os << "disc_coef_baseline = " << format_double(s.disc_coef_baseline) << '\n';
  os << "disc_first_visit = " << s.disc_first_visit << '\n';
  os << "withdrawal_prob = " << format_double(s.withdrawal_prob) << '\n';
  os << "cell_missing_prob = " << format_double(s.cell_missing_prob) << '\n';
  os << "truth = " << to_string(s.truth) << '\n';
  return os.str();
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           std::mt19937_64& eng) {
  if (chol_lower.rows() != mean.size() || chol_lower.cols() != mean.size())
    throw UsageError("sample_mvn: dimension mismatch");
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd xi(mean.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = N(eng);
  return mean + chol_lower.template triangularView<Eigen::Lower>() * xi;
}

namespace {

// One patient's draw from the DGM; buffers are reused across patients.
struct PatientSim {
  const Scenario& s;
  const Eigen::MatrixXd& L;
  std::vector<double> x;         // covariates
  double y0 = 0.0;
  Eigen::VectorXd xi, eps;       // MVN innovations / residuals
  std::vector<double> w;         // always-treated outcomes, visits 1..M
  std::vector<double> y;         // truth-consistent outcomes, visits 1..M
  int disc = 0;                  // D in disc_first_visit..M, or M+1

  PatientSim(const Scenario& scn, const Eigen::MatrixXd& chol)
      : s(scn), L(chol), x(scn.covariate_probs.size()),
        xi(scn.n_outcome_visits), eps(scn.n_outcome_visits),
        w(static_cast<std::size_t>(scn.n_outcome_visits)),
        y(static_cast<std::size_t>(scn.n_outcome_visits)) {}

  void draw(int arm, std::mt19937_64& eng) {
    const int M = s.n_outcome_visits;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N(0.0, 1.0);

    for (std::size_t c = 0; c < x.size(); ++c)
      x[c] = U(eng) < s.covariate_probs[c] ? 1.0 : 0.0;
    y0 = s.baseline_mean + s.baseline_sd * N(eng);

    double g = s.outcome_coefs[0] * y0;
    for (std::size_t c = 0; c < x.size(); ++c) g += s.outcome_coefs[c + 1] * x[c];

    for (int j = 0; j < M; ++j) xi[j] = N(eng);
    eps.noalias() = L.template triangularView<Eigen::Lower>() * xi;
    const auto& lam = s.lambda(arm);
    for (int j = 0; j < M; ++j) w[static_cast<std::size_t>(j)] = lam[static_cast<std::size_t>(j)] + g + eps[j];

    // Sequential retention; D is the first visit off assigned treatment.
    disc = M + 1;
    for (int j = s.disc_first_visit; j <= M; ++j) {
      const double prev = (j - 1 == 0) ? y0 : w[static_cast<std::size_t>(j - 2)];
      const double eta = s.disc_intercept + s.disc_coef_prev * prev +
                         s.disc_coef_baseline * y0;
      const double p_remain = 1.0 / (1.0 + std::exp(-eta));
      if (!(U(eng) < p_remain)) {
        disc = j;
        break;
      }
    }

    // Truth-consistent post-discontinuation outcomes: shift the conditional
    // mean to the reference profile, keep the drawn residual. Control-arm
    // discontinuation leaves the outcomes untouched.
    const double delta =
        (disc - 1 >= 1 && disc <= M)
            ? s.lambda_active[static_cast<std::size_t>(disc - 2)] -
                  s.lambda_control[static_cast<std::size_t>(disc - 2)]
            : 0.0;
    for (int j = 1; j <= M; ++j) {
      if (arm == 0 || j < disc) {
        y[static_cast<std::size_t>(j - 1)] = w[static_cast<std::size_t>(j - 1)];
      } else {
        double v = s.lambda_control[static_cast<std::size_t>(j - 1)] + g + eps[j - 1];
        if (s.truth == Strategy::CIR) v += delta;
        y[static_cast<std::size_t>(j - 1)] = v;
      }
    }
  }
};

}  // namespace

GeneratedPair generate(const Scenario& s, std::uint64_t seed) {
  s.check();
  const Eigen::MatrixXd L = linalg::cholesky(s.sigma);
  std::mt19937_64 eng(rng::derive_seed(seed, 0xD6E47A7Eull));
  std::uniform_real_distribution<double> U(0.0, 1.0);

  const int M = s.n_outcome_visits;
  GeneratedPair out;
  for (TrialDataset* ds : {&out.complete, &out.observed}) {
    ds->n_visits = M + 1;
    for (std::size_t c = 0; c < s.covariate_probs.size(); ++c)
      ds->covariate_names.push_back("X" + std::to_string(c + 1));
    ds->patients.reserve(static_cast<std::size_t>(2 * s.n_per_arm));
  }

  PatientSim sim(s, L);
  char idbuf[24];
  for (int arm = 0; arm < 2; ++arm) {
    for (int i = 0; i < s.n_per_arm; ++i) {
      sim.draw(arm, eng);
      std::snprintf(idbuf, sizeof(idbuf), "%c%06d", arm == 1 ? 'A' : 'C', i + 1);

      PatientRecord pc;
      pc.id = idbuf;
      pc.arm = arm;
      pc.covariates = sim.x;
      pc.disc_visit = sim.disc;
      pc.outcomes.resize(static_cast<std::size_t>(M + 1));
      pc.outcomes[0] = sim.y0;
      for (int j = 1; j <= M; ++j)
        pc.outcomes[static_cast<std::size_t>(j)] = sim.y[static_cast<std::size_t>(j - 1)];

      PatientRecord po = pc;
      const bool withdrawn = sim.disc <= M && U(eng) < s.withdrawal_prob;
      if (withdrawn)
        for (int j = sim.disc; j <= M; ++j)
          po.outcomes[static_cast<std::size_t>(j)].reset();
      for (int j = 0; j <= M; ++j)
        if (U(eng) < s.cell_missing_prob) po.outcomes[static_cast<std::size_t>(j)].reset();

      out.complete.patients.push_back(std::move(pc));
      out.observed.patients.push_back(std::move(po));
    }
  }
  return out;
}

TrueEstimands true_estimands(const Scenario& s, long n_mc_per_arm, std::uint64_t seed,
                             int threads) {
  s.check();
  if (n_mc_per_arm < 1) throw UsageError("true_estimands: n_mc must be >= 1");
  TrueEstimands t;
  const int M = s.n_outcome_visits;
  t.hypothetical = s.lambda_active[static_cast<std::size_t>(M - 1)] -
                   s.lambda_control[static_cast<std::size_t>(M - 1)];

  const Eigen::MatrixXd L = linalg::cholesky(s.sigma);
  constexpr long kChunk = 1 << 16;
  const long n_chunks = (n_mc_per_arm + kChunk - 1) / kChunk;
  // Fixed chunking makes the result independent of the thread count.
  std::vector<double> sums(static_cast<std::size_t>(2 * n_chunks), 0.0);
  parallel_for(static_cast<std::size_t>(2 * n_chunks), threads, [&](std::size_t task) {
    const int arm = static_cast<int>(task % 2);
    const long chunk = static_cast<long>(task / 2);
    const long begin = chunk * kChunk;
    const long count = std::min(kChunk, n_mc_per_arm - begin);
    std::mt19937_64 eng = rng::make_engine(seed, 0x7104E5ull + task);
    PatientSim sim(s, L);
    double acc = 0.0;
    for (long i = 0; i < count; ++i) {
      sim.draw(arm, eng);
      acc += sim.y[static_cast<std::size_t>(M - 1)];
    }
    sums[task] = acc;
  });
  double mean_arm[2] = {0.0, 0.0};
  for (std::size_t task = 0; task < sums.size(); ++task) mean_arm[task % 2] += sums[task];
  mean_arm[0] /= static_cast<double>(n_mc_per_arm);
  mean_arm[1] /= static_cast<double>(n_mc_per_arm);
  t.policy = mean_arm[1] - mean_arm[0];
  return t;
}

std::vector<StudyMethod> default_study_methods(Strategy strategy, int boot_samples) {
  std::vector<StudyMethod> m(3);
  m[0] = {StudyMethodKind::CompleteData, strategy, 0, "complete-data"};
  m[1] = {StudyMethodKind::SlrJackknife, strategy, 0,
          std::string("slr-") + to_string(strategy) + "+jackknife"};
  m[2] = {StudyMethodKind::SlrBootstrap, strategy, boot_samples,
          std::string("slr-") + to_string(strategy) + "+bootstrap(" +
              std::to_string(boot_samples) + ")"};
  return m;
}

SimulationReport run_study(const Scenario& s, int n_sims, const std::vector<StudyMethod>& methods,
                           std::uint64_t seed, double alpha, const TrueEstimands& truths,
                           int threads, bool keep_replicates) {
  s.check();
  if (n_sims < 1) throw UsageError("run_study: n_sims must be >= 1");
  if (methods.empty()) throw UsageError("run_study: no methods requested");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("run_study: alpha must be in (0,1)");

  SimulationReport rep;
  rep.n_sims = n_sims;
  rep.alpha = alpha;
  rep.seed = seed;
  rep.truths = truths;
  rep.scenario_echo = render_scenario(s);

  const std::size_t n_methods = methods.size();
  std::vector<std::vector<ReplicateRecord>> recs(
      n_methods, std::vector<ReplicateRecord>(static_cast<std::size_t>(n_sims)));
  std::vector<std::vector<std::string>> errors(
      n_methods, std::vector<std::string>(static_cast<std::size_t>(n_sims)));

  // Analysis model mirrors the complete-data estimator: intercept, Z, all
  // baseline covariates and the (completed) baseline outcome.
  AnalysisModel analysis;
  analysis.visit = -1;
  for (std::size_t c = 0; c < s.covariate_probs.size(); ++c)
    analysis.covariates.push_back("X" + std::to_string(c + 1));
  analysis.covariates.push_back("Y0");

  parallel_for(static_cast<std::size_t>(n_sims), threads, [&](std::size_t r) {
    const GeneratedPair pair = generate(s, rng::derive_seed(seed, 0xDA7A00ull + r));
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      const StudyMethod& method = methods[mi];
      ReplicateRecord& rec = recs[mi][r];
      try {
        EffectEstimate est;
        if (method.kind == StudyMethodKind::CompleteData) {
          const CompletedDataset cd = completed_from_observed(pair.complete);
          est = estimate_effect_wald(cd, analysis, alpha);
        } else {
          PipelineSpec spec;
          spec.strategy = method.strategy;
          spec.analysis = analysis;
          if (method.kind == StudyMethodKind::SlrJackknife) {
            est = jackknife(pair.observed, spec, alpha, /*threads=*/1);
          } else {
            est = bootstrap(pair.observed, spec, method.boot_samples,
                            rng::derive_seed(seed, 0xB007ull + mi, r), alpha, /*threads=*/1);
          }
        }
        rec.theta = est.point;
        rec.ci_low = est.ci->low;
        rec.ci_high = est.ci->high;
        rec.ok = true;
      } catch (const std::exception& e) {
        errors[mi][r] = e.what();
      }
    }
  });

  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    const StudyMethod& method = methods[mi];
    MethodStats st;
    st.label = method.label.empty() ? std::string("method-") + std::to_string(mi) : method.label;
    st.truth = (method.kind != StudyMethodKind::CompleteData &&
                method.strategy == Strategy::Hypothetical)
                   ? truths.hypothetical
                   : truths.policy;
    double sum = 0.0, sumsq = 0.0, width = 0.0;
    long covered = 0, rejected = 0;
    for (int r = 0; r < n_sims; ++r) {
      const ReplicateRecord& rec = recs[mi][static_cast<std::size_t>(r)];
      if (!rec.ok) {
        ++st.n_failures;
        continue;
      }
      ++st.n_ok;
      sum += rec.theta - st.truth;
      sumsq += (rec.theta - st.truth) * (rec.theta - st.truth);
      width += rec.ci_high - rec.ci_low;
      if (rec.ci_low <= st.truth && st.truth <= rec.ci_high) ++covered;
      if (rec.ci_low > 0.0 || rec.ci_high < 0.0) ++rejected;
    }
    if (static_cast<double>(st.n_failures) > 0.01 * static_cast<double>(n_sims)) {
      std::string first;
      for (int r = 0; r < n_sims; ++r)
        if (!errors[mi][static_cast<std::size_t>(r)].empty()) {
          first = errors[mi][static_cast<std::size_t>(r)];
          break;
        }
      throw DataError("run_study: method '" + st.label + "' failed in " +
                      std::to_string(st.n_failures) + " of " + std::to_string(n_sims) +
                      " replicates (more than 1%); first failure: " + first);
    }
    if (st.n_ok > 0) {
      st.bias = sum / static_cast<double>(st.n_ok);
      st.rmse = std::sqrt(sumsq / static_cast<double>(st.n_ok));
      st.coverage = static_cast<double>(covered) / static_cast<double>(st.n_ok);
      st.reject_rate = static_cast<double>(rejected) / static_cast<double>(st.n_ok);
      st.mean_ci_width = width / static_cast<double>(st.n_ok);
    }
    rep.methods.push_back(std::move(st));
  }
  if (keep_replicates) rep.replicates = std::move(recs);
  return rep;
}

std::string render_report_text(const SimulationReport& r) {
  std::ostringstream os;
  char buf[256];
  os << "replicates: " << r.n_sims << "\n";
  std::snprintf(buf, sizeof(buf), "alpha: %.4f\n", r.alpha);
  os << buf;
  os << "seed: " << r.seed << "\n";
  std::snprintf(buf, sizeof(buf), "truth_policy: %.6f\ntruth_hypothetical: %.6f\n",
                r.truths.policy, r.truths.hypothetical);
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-32s %10s %8s %8s %9s %12s %14s %6s %9s\n", "method",
                "truth", "bias", "rmse", "coverage", "reject_rate", "mean_ci_width", "n_ok",
                "failures");
  os << buf;
  for (const auto& m : r.methods) {
    std::snprintf(buf, sizeof(buf), "%-32s %10.4f %8.4f %8.4f %8.1f%% %11.1f%% %14.4f %6ld %9ld\n",
                  m.label.c_str(), m.truth, m.bias, m.rmse, 100.0 * m.coverage,
                  100.0 * m.reject_rate, m.mean_ci_width, m.n_ok, m.n_failures);
    os << buf;
  }
  return os.str();
}

std::string render_report_csv(const SimulationReport& r) {
  std::ostringstream os;
  os << "method,truth,bias,rmse,coverage,reject_rate,mean_ci_width,n_ok,n_failures\n";
  char buf[256];
  for (const auto& m : r.methods) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%ld,%ld\n",
                  m.label.c_str(), m.truth, m.bias, m.rmse, m.coverage, m.reject_rate,
                  m.mean_ci_width, m.n_ok, m.n_failures);
    os << buf;
  }
  return os.str();
}

std::string render_report_replicates_csv(const SimulationReport& r) {
  std::ostringstream os;
  os << "method,replicate,theta,ci_low,ci_high,status\n";
  for (std::size_t mi = 0; mi < r.replicates.size(); ++mi) {
    const std::string& label = r.methods[mi].label;
    for (std::size_t i = 0; i < r.replicates[mi].size(); ++i) {
      const ReplicateRecord& rec = r.replicates[mi][i];
      if (rec.ok)
        os << label << ',' << i << ',' << format_double(rec.theta) << ','
           << format_double(rec.ci_low) << ',' << format_double(rec.ci_high) << ",ok\n";
      else
        os << label << ',' << i << ",,,,failed\n";
    }
  }
  return os.str();
}

}  // namespace slrcmi
