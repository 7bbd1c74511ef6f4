#include <doctest.h>

#include <fstream>
#include <sstream>

#include "core/errors.hpp"
#include "core/simulation.hpp"

using slrcmi::Scenario;
using slrcmi::Strategy;

namespace {

Scenario load_scenario(const std::string& name) {
  return slrcmi::read_scenario(std::string(SLRCMI_DATA_DIR) + "/" + name);
}

Scenario tiny_scenario() {
  Scenario s;
  s.n_per_arm = 60;
  s.n_outcome_visits = 2;
  s.covariate_probs = {0.5};
  s.outcome_coefs = {0.1, 0.3};
  s.baseline_mean = 1.0;
  s.baseline_sd = 1.0;
  s.lambda_control = {0.5, 1.0};
  s.lambda_active = {0.2, 0.4};
  s.sigma.resize(2, 2);
  s.sigma << 1.0, 0.5, 0.5, 1.5;
  s.disc_intercept = 2.0;
  s.disc_coef_prev = -0.1;
  s.disc_coef_baseline = -0.05;
  s.disc_first_visit = 2;
  s.withdrawal_prob = 0.6;
  s.cell_missing_prob = 0.04;
  s.truth = Strategy::J2R;
  return s;
}

}  // namespace

TEST_CASE("scenario files parse and render round-trips") {
  const Scenario s = load_scenario("scenario_cir_nonnull.cfg");
  CHECK(s.n_per_arm == 500);
  CHECK(s.n_outcome_visits == 5);
  CHECK(s.covariate_probs == std::vector<double>{0.7, 0.7, 0.4});
  CHECK(s.lambda_active[4] == doctest::Approx(3.10));
  CHECK(s.sigma(4, 4) == doctest::Approx(24.70));
  CHECK(s.truth == Strategy::CIR);

  const Scenario back = slrcmi::parse_scenario(slrcmi::render_scenario(s));
  CHECK(back.lambda_control == s.lambda_control);
  CHECK(back.sigma.isApprox(s.sigma));
  CHECK(back.disc_intercept == s.disc_intercept);
  CHECK(back.truth == s.truth);
}

TEST_CASE("scenario parse errors") {
  CHECK_THROWS_WITH_AS(slrcmi::parse_scenario("bogus_key = 1\n"),
                       doctest::Contains("unknown key"), slrcmi::UsageError);
  CHECK_THROWS_AS(slrcmi::parse_scenario("sigma =\n1 2\n"), slrcmi::UsageError);
  const char* no_lambda =
      "n_per_arm = 10\nn_visits = 1\ncovariate_probs = 0.5\noutcome_coefs = 0 0\n"
      "sigma =\n1\n";
  CHECK_THROWS_WITH_AS(slrcmi::parse_scenario(no_lambda), doctest::Contains("lambda"),
                       slrcmi::UsageError);
}

TEST_CASE("sample_mvn") {
  std::mt19937_64 eng(1);
  Eigen::VectorXd mean(3);
  mean << 1.0, -2.0, 3.0;
  SUBCASE("zero factor returns the mean exactly") {
    const Eigen::MatrixXd L = Eigen::MatrixXd::Zero(3, 3);
    const Eigen::VectorXd d = slrcmi::sample_mvn(mean, L, eng);
    CHECK(d.isApprox(mean));
  }
  SUBCASE("identity factor recovers the identity covariance") {
    const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(3, 3);
    const long n = 1000000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
    Eigen::VectorXd macc = Eigen::VectorXd::Zero(3);
    for (long i = 0; i < n; ++i) {
      const Eigen::VectorXd d = slrcmi::sample_mvn(mean, L, eng) - mean;
      acc += d * d.transpose();
      macc += d;
    }
    const Eigen::MatrixXd cov = acc / static_cast<double>(n);
    CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.01);
    CHECK(macc.cwiseAbs().maxCoeff() / static_cast<double>(n) < 0.01);
  }
}

TEST_CASE("sample_mvn recovers the longitudinal covariance") {
  const Scenario s = load_scenario("scenario_cir_nonnull.cfg");
  const Eigen::MatrixXd L = slrcmi::linalg::cholesky(s.sigma);
  std::mt19937_64 eng(77);
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  const long n = 1000000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(5, 5);
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd d = slrcmi::sample_mvn(mean, L, eng);
    acc += d * d.transpose();
  }
  const Eigen::MatrixXd cov = acc / static_cast<double>(n);
  CHECK((cov - s.sigma).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("generate is deterministic and consistent between complete and observed") {
  const Scenario s = tiny_scenario();
  const auto p1 = slrcmi::generate(s, 2024);
  const auto p2 = slrcmi::generate(s, 2024);
  CHECK(slrcmi::serialize_trial_csv(p1.observed) == slrcmi::serialize_trial_csv(p2.observed));
  CHECK(slrcmi::serialize_trial_csv(p1.complete) != slrcmi::serialize_trial_csv(
                                                        slrcmi::generate(s, 2025).complete));

  CHECK(p1.complete.n_visits == 3);
  CHECK(p1.complete.patients.size() == 120);
  for (std::size_t i = 0; i < p1.complete.patients.size(); ++i) {
    const auto& pc = p1.complete.patients[i];
    const auto& po = p1.observed.patients[i];
    CHECK(pc.id == po.id);
    CHECK(pc.disc_visit == po.disc_visit);
    // D in {2, ..., M, M+1} under the first-applicable-visit rule.
    CHECK(pc.disc_visit >= 2);
    for (int j = 0; j < p1.complete.n_visits; ++j) {
      CHECK(pc.observed(j));
      if (po.observed(j)) CHECK(*po.outcomes[static_cast<std::size_t>(j)] ==
                                *pc.outcomes[static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("no missingness sources means observed equals complete") {
  Scenario s = tiny_scenario();
  s.withdrawal_prob = 0.0;
  s.cell_missing_prob = 0.0;
  const auto pair = slrcmi::generate(s, 99);
  CHECK(slrcmi::serialize_trial_csv(pair.observed) ==
        slrcmi::serialize_trial_csv(pair.complete));
}

TEST_CASE("retention intercept extremes control discontinuation") {
  Scenario s = tiny_scenario();
  s.disc_intercept = 1000.0;  // certain retention
  const auto none = slrcmi::generate(s, 3);
  for (const auto& p : none.complete.patients) CHECK(p.disc_visit == s.n_outcome_visits + 1);
  s.disc_intercept = -1000.0;  // certain discontinuation at the first applicable visit
  const auto all = slrcmi::generate(s, 3);
  for (const auto& p : all.complete.patients) CHECK(p.disc_visit == s.disc_first_visit);
}

TEST_CASE("true estimands: hypothetical is analytic, null policy is near zero") {
  Scenario s = tiny_scenario();
  const auto t = slrcmi::true_estimands(s, 50000, 11, 2);
  CHECK(t.hypothetical == doctest::Approx(0.4 - 1.0).epsilon(1e-15));

  Scenario null = s;
  null.lambda_active = null.lambda_control;
  const auto t0 = slrcmi::true_estimands(null, 200000, 12, 2);
  CHECK(t0.hypothetical == 0.0);
  CHECK(std::abs(t0.policy) < 0.05);

  // Chunked accumulation is thread-count independent.
  const auto t1 = slrcmi::true_estimands(s, 70000, 5, 1);
  const auto t2 = slrcmi::true_estimands(s, 70000, 5, 2);
  CHECK(t1.policy == t2.policy);
}

TEST_CASE("generated missingness rate is near the scenario target") {
  const Scenario s = load_scenario("scenario_cir_nonnull.cfg");
  long missing = 0, total = 0;
  for (int rep = 0; rep < 15; ++rep) {
    const auto pair = slrcmi::generate(s, 1000 + static_cast<std::uint64_t>(rep));
    for (const auto& p : pair.observed.patients)
      for (int j = 0; j < pair.observed.n_visits; ++j) {
        ++total;
        if (!p.observed(j)) ++missing;
      }
  }
  const double frac = static_cast<double>(missing) / static_cast<double>(total);
  CHECK(frac == doctest::Approx(0.123).epsilon(0.2));  // +-20% band for a quick check
}

TEST_CASE("run_study aggregates and stays deterministic across thread counts") {
  Scenario s = tiny_scenario();
  s.n_per_arm = 50;
  const auto methods = slrcmi::default_study_methods(s.truth, 40);
  slrcmi::TrueEstimands truths;
  truths.hypothetical = -0.6;
  truths.policy = -0.5;
  const auto r1 = slrcmi::run_study(s, 6, methods, 321, 0.05, truths, 1, true);
  const auto r2 = slrcmi::run_study(s, 6, methods, 321, 0.05, truths, 2, true);
  CHECK(slrcmi::render_report_csv(r1) == slrcmi::render_report_csv(r2));
  CHECK(slrcmi::render_report_replicates_csv(r1) == slrcmi::render_report_replicates_csv(r2));

  REQUIRE(r1.methods.size() == 3);
  for (const auto& m : r1.methods) {
    CHECK(m.n_ok == 6);
    CHECK(m.rmse >= std::abs(m.bias));  // algebraic identity
    CHECK(m.coverage >= 0.0);
    CHECK(m.coverage <= 1.0);
    CHECK(m.reject_rate >= 0.0);
    CHECK(m.reject_rate <= 1.0);
    CHECK(m.mean_ci_width > 0.0);
  }

  // Recompute one method's stats from the replicate dump.
  const auto& recs = r1.replicates[0];
  double bias = 0.0;
  for (const auto& rec : recs) bias += rec.theta - truths.policy;
  bias /= static_cast<double>(recs.size());
  CHECK(r1.methods[0].bias == doctest::Approx(bias).epsilon(1e-12));
}

TEST_CASE("report renders contain the method rows") {
  Scenario s = tiny_scenario();
  s.n_per_arm = 40;
  const auto methods = slrcmi::default_study_methods(Strategy::J2R, 25);
  slrcmi::TrueEstimands truths{-0.6, -0.5};
  const auto rep = slrcmi::run_study(s, 3, methods, 9, 0.05, truths, 2, false);
  const std::string text = slrcmi::render_report_text(rep);
  CHECK(text.find("complete-data") != std::string::npos);
  CHECK(text.find("slr-j2r+jackknife") != std::string::npos);
  CHECK(text.find("slr-j2r+bootstrap(25)") != std::string::npos);
  const std::string csv = slrcmi::render_report_csv(rep);
  CHECK(csv.find("method,truth,bias,rmse,coverage") == 0);
}
