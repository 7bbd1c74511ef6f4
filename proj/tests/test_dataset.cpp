#include <doctest.h>

#include <random>

#include "core/dataset.hpp"
#include "core/errors.hpp"
#include "fixtures.hpp"

using slrcmi::ColumnSchema;
using slrcmi::DataError;
using slrcmi::TrialDataset;

namespace {

const char* kSimpleCsv =
    "patient_id,visit,arm,outcome,on_treatment\n"
    "p1,0,0,1.5,1\np1,1,0,2.5,1\n"
    "p2,0,0,0.5,1\np2,1,0,1.0,1\n"
    "p3,0,1,2.0,1\np3,1,1,3.0,1\n"
    "p4,0,1,1.0,1\np4,1,1,2.0,1\n";

bool datasets_equal(const TrialDataset& a, const TrialDataset& b) {
  if (a.n_visits != b.n_visits || a.covariate_names != b.covariate_names ||
      a.strata_name != b.strata_name || a.patients.size() != b.patients.size())
    return false;
  for (std::size_t i = 0; i < a.patients.size(); ++i) {
    const auto& x = a.patients[i];
    const auto& y = b.patients[i];
    if (x.id != y.id || x.arm != y.arm || x.disc_visit != y.disc_visit ||
        x.stratum != y.stratum || x.covariates != y.covariates || x.outcomes != y.outcomes)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("parse derives D from the on_treatment flags") {
  const TrialDataset ds = slrcmi::parse_trial_csv(kSimpleCsv);
  REQUIRE(ds.patients.size() == 4);
  CHECK(ds.n_visits == 2);
  for (const auto& p : ds.patients) CHECK(p.disc_visit == 2);  // all-ones => M+1

  const TrialDataset d2 = slrcmi::parse_trial_csv(
      "patient_id,visit,arm,outcome,on_treatment\n"
      "p1,0,1,1.0,1\np1,1,1,2.0,0\n");
  CHECK(d2.patients[0].disc_visit == 1);
}

TEST_CASE("parse rejects a non-absorbing treatment sequence") {
  const char* csv =
      "patient_id,visit,arm,outcome,on_treatment\n"
      "p1,0,1,1.0,1\np1,1,1,2.0,0\np1,2,1,3.0,1\n";
  CHECK_THROWS_WITH_AS(slrcmi::parse_trial_csv(csv),
                       doctest::Contains("non-absorbing"), DataError);
}

TEST_CASE("parse error paths") {
  SUBCASE("duplicate (patient, visit)") {
    const char* csv =
        "patient_id,visit,arm,outcome,on_treatment\n"
        "p1,0,0,1,1\np1,0,0,2,1\n";
    CHECK_THROWS_WITH_AS(slrcmi::parse_trial_csv(csv), doctest::Contains("duplicate"),
                         DataError);
  }
  SUBCASE("missing visit row") {
    const char* csv =
        "patient_id,visit,arm,outcome,on_treatment\n"
        "p1,0,0,1,1\np1,1,0,1,1\np2,0,0,1,1\n";
    CHECK_THROWS_WITH_AS(slrcmi::parse_trial_csv(csv),
                         doctest::Contains("missing the row for visit 1"), DataError);
  }
  SUBCASE("covariate varying within patient") {
    const char* csv =
        "patient_id,visit,arm,outcome,on_treatment,age\n"
        "p1,0,0,1,1,30\np1,1,0,1,1,31\n";
    CHECK_THROWS_WITH_AS(slrcmi::parse_trial_csv(csv), doctest::Contains("covariate varies"),
                         DataError);
  }
  SUBCASE("malformed numeric cell") {
    const char* csv =
        "patient_id,visit,arm,outcome,on_treatment\n"
        "p1,0,0,oops,1\np1,1,0,1,1\n";
    CHECK_THROWS_WITH_AS(slrcmi::parse_trial_csv(csv),
                         doctest::Contains("malformed numeric cell"), DataError);
  }
  SUBCASE("missing required column") {
    CHECK_THROWS_WITH_AS(slrcmi::parse_trial_csv("patient_id,visit,arm,outcome\np,0,0,1\n"),
                         doctest::Contains("on_treatment"), DataError);
  }
}

TEST_CASE("empty and NA cells are missing; anything else numeric is strict") {
  const char* csv =
      "patient_id,visit,arm,outcome,on_treatment\n"
      "p1,0,0,,1\np1,1,0,NA,1\np2,0,0,1,1\np2,1,0,2,1\n";
  const TrialDataset ds = slrcmi::parse_trial_csv(csv);
  CHECK(!ds.patients[0].observed(0));
  CHECK(!ds.patients[0].observed(1));
  CHECK(ds.patients[1].observed(0));
}

TEST_CASE("schema mapping renames every column") {
  ColumnSchema schema;
  schema.patient_col = "subj";
  schema.visit_col = "t";
  schema.arm_col = "grp";
  schema.outcome_col = "y";
  schema.on_treatment_col = "trt";
  schema.stratum_col = "site";
  const char* csv =
      "subj,t,grp,y,trt,site,bmi\n"
      "s1,0,0,1.0,1,east,22\ns1,1,0,2.0,1,east,22\n"
      "s2,0,1,1.5,1,west,25\ns2,1,1,2.5,1,west,25\n";
  const TrialDataset ds = slrcmi::parse_trial_csv(csv, schema);
  CHECK(ds.covariate_names == std::vector<std::string>{"bmi"});
  CHECK(ds.strata_name == std::optional<std::string>("site"));
  CHECK(ds.patients[0].stratum == std::optional<std::string>("east"));
  CHECK(ds.patients[1].covariates[0] == doctest::Approx(25.0));
}

TEST_CASE("validation summary counts") {
  SUBCASE("complete dataset") {
    const auto rep = slrcmi::validate(slrcmi::parse_trial_csv(kSimpleCsv));
    CHECK(rep.ok());
    CHECK(rep.missing_fraction == doctest::Approx(0.0));
  }
  SUBCASE("one absent cell in a 4x2 grid is 1/8") {
    std::string csv(kSimpleCsv);
    const auto pos = csv.find("2.5");
    csv.replace(pos, 3, "");
    const auto rep = slrcmi::validate(slrcmi::parse_trial_csv(csv));
    CHECK(rep.missing_fraction == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(rep.ok());
  }
  SUBCASE("missingness fraction equals a direct count over cells") {
    std::mt19937_64 eng(5150);
    const auto ds = fixtures::random_dataset(eng, 25, 4, 2, 0.2, 0.1);
    long missing = 0, total = 0;
    for (const auto& p : ds.patients)
      for (int j = 0; j < ds.n_visits; ++j) {
        ++total;
        if (!p.observed(j)) ++missing;
      }
    const auto rep = slrcmi::validate(ds);
    CHECK(rep.missing_fraction ==
          doctest::Approx(static_cast<double>(missing) / static_cast<double>(total))
              .epsilon(1e-12));
  }
  SUBCASE("duplicate ids are a hard error") {
    auto ds = slrcmi::parse_trial_csv(kSimpleCsv);
    ds.patients[1].id = ds.patients[0].id;
    const auto rep = slrcmi::validate(ds);
    CHECK(!rep.ok());
    CHECK(rep.errors[0].rule == "unique-id");
  }
}

TEST_CASE("serialize round-trips exactly") {
  std::mt19937_64 eng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    const auto ds = fixtures::random_dataset(eng, 8, 3, 2, 0.25, 0.2, trial % 2 == 1);
    const std::string text = slrcmi::serialize_trial_csv(ds);
    const TrialDataset back = slrcmi::parse_trial_csv(
        text, [&] {
          ColumnSchema s;
          if (ds.strata_name) s.stratum_col = *ds.strata_name;
          s.covariate_cols = ds.covariate_names;
          return s;
        }());
    CHECK(datasets_equal(ds, back));
    CHECK(slrcmi::serialize_trial_csv(back) == text);
  }
}

TEST_CASE("change_from_baseline") {
  slrcmi::TrialDataset ds;
  ds.n_visits = 3;
  ds.patients.push_back(fixtures::patient("p1", 1, {10.0, 12.0, 9.0}, 3));
  ds.patients.push_back(fixtures::patient("p2", 0, {10.0, std::nullopt, 9.0}, 1));

  const auto out = slrcmi::change_from_baseline(ds);
  CHECK(out.n_visits == 2);
  CHECK(out.covariate_names == std::vector<std::string>{"baseline"});
  CHECK(out.patients[0].covariates[0] == doctest::Approx(10.0));
  CHECK(*out.patients[0].outcomes[0] == doctest::Approx(2.0));
  CHECK(*out.patients[0].outcomes[1] == doctest::Approx(-1.0));
  CHECK(!out.patients[1].outcomes[0].has_value());
  CHECK(*out.patients[1].outcomes[1] == doctest::Approx(-1.0));
  // D shifts with the dropped baseline visit.
  CHECK(out.patients[0].disc_visit == 2);
  CHECK(out.patients[1].disc_visit == 0);

  SUBCASE("missing baseline names the patient") {
    ds.patients[0].outcomes[0].reset();
    CHECK_THROWS_WITH_AS(slrcmi::change_from_baseline(ds), doctest::Contains("p1"),
                         DataError);
  }
}

TEST_CASE("shipped fixture file parses to the canonical fixture") {
  const auto ds = slrcmi::read_trial_csv(std::string(SLRCMI_DATA_DIR) + "/tiny_fixture_a.csv");
  CHECK(datasets_equal(ds, fixtures::tiny_fixture_a()));
}
