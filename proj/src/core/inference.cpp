#include "core/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "core/errors.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace slrcmi {

PipelinePoint run_pipeline(const TrialDataset& ds, std::span<const int> rows,
                           const PipelineSpec& spec) {
  const FittedSlrModels m = fit_slr_models_rows(ds, rows, spec.imputation_covariates);
  const CompletedDataset cd = impute_rows(ds, rows, m, spec.strategy);
  const EffectEstimate est = estimate_effect(cd, spec.analysis);
  return {est.point, est.marginal_mean_active, est.marginal_mean_control};
}

PipelinePoint run_pipeline(const TrialDataset& ds, const PipelineSpec& spec) {
  std::vector<int> all(ds.patients.size());
  std::iota(all.begin(), all.end(), 0);
  return run_pipeline(ds, all, spec);
}

double normal_quantile(double p) {
  // Wichura (1988), algorithm AS 241, PPND16.
  if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double quantile_type7(std::span<const double> sorted_values, double p) {
  if (sorted_values.empty()) throw UsageError("quantile: empty sample");
  if (p <= 0.0) return sorted_values.front();
  if (p >= 1.0) return sorted_values.back();
  const double h = static_cast<double>(sorted_values.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted_values.size()) return sorted_values.back();
  return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

namespace {

constexpr std::size_t kFullData = std::numeric_limits<std::size_t>::max();

struct ComponentSummary {
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator
};

ComponentSummary summarize(const std::vector<double>& v) {
  ComponentSummary s;
  const std::size_t n = v.size();
  if (n == 0) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

double jackknife_se(const std::vector<double>& theta) {
  const std::size_t n = theta.size();
  const double mean = std::accumulate(theta.begin(), theta.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double t : theta) ss += (t - mean) * (t - mean);
  return std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
}

ConfidenceInterval percentile_ci(std::vector<double> values, double alpha) {
  std::sort(values.begin(), values.end());
  return {quantile_type7(values, alpha / 2.0), quantile_type7(values, 1.0 - alpha / 2.0),
          1.0 - alpha};
}

PipelineFn make_pipeline_fn(const TrialDataset& ds, const PipelineSpec& spec) {
  return [&ds, spec](std::size_t, std::span<const int> rows) {
    return run_pipeline(ds, rows, spec);
  };
}

}  // namespace

EffectEstimate jackknife_fn(const TrialDataset& ds, const PipelineFn& fn, double alpha,
                            int threads, ResampleResult* out_resamples) {
  const std::size_t n = ds.patients.size();
  if (n < 2) throw UsageError("jackknife: need at least 2 patients");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("jackknife: alpha must be in (0,1)");

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const PipelinePoint full = fn(kFullData, all);

  std::vector<PipelinePoint> points(n);
  std::vector<std::string> errors(n);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<int> rows;
    rows.reserve(n - 1);
    for (std::size_t t = 0; t < n; ++t)
      if (t != i) rows.push_back(static_cast<int>(t));
    try {
      points[i] = fn(i, rows);
    } catch (const std::exception& e) {
      errors[i] = e.what();
      if (errors[i].empty()) errors[i] = "unknown error";
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty())
      throw DataError("jackknife: leave-one-out refit failed for patient '" +
                      ds.patients[i].id + "': " + errors[i]);

  std::vector<double> theta(n), mma(n), mmc(n);
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = points[i].theta;
    mma[i] = points[i].mm_active;
    mmc[i] = points[i].mm_control;
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double se = jackknife_se(theta);
  const double se_a = jackknife_se(mma);
  const double se_c = jackknife_se(mmc);

  EffectEstimate est;
  est.inference = Inference::Jackknife;
  est.point = full.theta;
  est.marginal_mean_active = full.mm_active;
  est.marginal_mean_control = full.mm_control;
  est.se = se;
  est.ci = ConfidenceInterval{full.theta - z * se, full.theta + z * se, 1.0 - alpha};
  est.mm_active_ci =
      ConfidenceInterval{full.mm_active - z * se_a, full.mm_active + z * se_a, 1.0 - alpha};
  est.mm_control_ci =
      ConfidenceInterval{full.mm_control - z * se_c, full.mm_control + z * se_c, 1.0 - alpha};
  est.n_resamples = static_cast<long>(n);
  if (out_resamples) {
    out_resamples->estimates = std::move(theta);
    out_resamples->mm_active = std::move(mma);
    out_resamples->mm_control = std::move(mmc);
    out_resamples->failures.clear();
    out_resamples->seed.reset();
    out_resamples->method = Inference::Jackknife;
  }
  return est;
}

EffectEstimate jackknife(const TrialDataset& ds, const PipelineSpec& spec, double alpha,
                         int threads, ResampleResult* out_resamples) {
  EffectEstimate est = jackknife_fn(ds, make_pipeline_fn(ds, spec), alpha, threads,
                                    out_resamples);
  est.strategy = spec.strategy;
  return est;
}

EffectEstimate bootstrap_fn(const TrialDataset& ds, const PipelineFn& fn, int m,
                            std::uint64_t seed, double alpha, int threads,
                            ResampleResult* out_resamples) {
  if (m < 1) throw UsageError("bootstrap: m must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("bootstrap: alpha must be in (0,1)");

  // Resampling cells: (arm, stratum), in deterministic order. Without a
  // stratification variable each arm is one cell.
  std::map<std::pair<int, std::string>, std::vector<int>> cell_map;
  const bool use_strata = ds.strata_name.has_value();
  for (std::size_t i = 0; i < ds.patients.size(); ++i) {
    const PatientRecord& p = ds.patients[i];
    std::string label = use_strata && p.stratum ? *p.stratum : std::string();
    cell_map[{p.arm, label}].push_back(static_cast<int>(i));
  }
  bool has_arm[2] = {false, false};
  for (const auto& [key, members] : cell_map) {
    if (members.empty())
      throw DataError("bootstrap: empty resampling cell");
    has_arm[key.first == 1 ? 1 : 0] = true;
  }
  if (!has_arm[0] || !has_arm[1])
    throw DataError("bootstrap: both treatment arms must be nonempty");
  std::vector<const std::vector<int>*> cells;
  cells.reserve(cell_map.size());
  for (const auto& [key, members] : cell_map) cells.push_back(&members);

  std::vector<int> all(ds.patients.size());
  std::iota(all.begin(), all.end(), 0);
  const PipelinePoint full = fn(kFullData, all);
  const std::size_t n = ds.patients.size();

  struct Slot {
    PipelinePoint point;
    bool ok = false;
    std::string error;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t r) {
    std::mt19937_64 eng = rng::make_engine(seed, r);
    std::vector<int> rows;
    rows.reserve(n);
    for (const auto* cell : cells) {
      const std::size_t cn = cell->size();
      for (std::size_t t = 0; t < cn; ++t)
        rows.push_back((*cell)[rng::uniform_index(eng, cn)]);
    }
    try {
      slots[r].point = fn(r, rows);
      slots[r].ok = true;
    } catch (const std::exception& e) {
      slots[r].error = e.what();
    }
  });

  ResampleResult rr;
  rr.seed = seed;
  rr.method = Inference::Bootstrap;
  for (std::size_t r = 0; r < slots.size(); ++r) {
    if (slots[r].ok) {
      rr.estimates.push_back(slots[r].point.theta);
      rr.mm_active.push_back(slots[r].point.mm_active);
      rr.mm_control.push_back(slots[r].point.mm_control);
    } else {
      rr.failures.push_back({r, slots[r].error});
    }
  }
  if (static_cast<double>(rr.failures.size()) > 0.01 * static_cast<double>(m)) {
    std::ostringstream os;
    os << "bootstrap: " << rr.failures.size() << " of " << m
       << " replicates failed (more than 1%); first failure (replicate "
       << rr.failures.front().index << "): " << rr.failures.front().message;
    throw DataError(os.str());
  }
  if (rr.estimates.empty()) throw DataError("bootstrap: no successful replicates");

  const double z = normal_quantile(1.0 - alpha / 2.0);
  const ComponentSummary st = summarize(rr.estimates);

  EffectEstimate est;
  est.inference = Inference::Bootstrap;
  est.point = full.theta;
  est.marginal_mean_active = full.mm_active;
  est.marginal_mean_control = full.mm_control;
  est.se = st.sd;  // bootstrap-normal SE
  est.ci = percentile_ci(rr.estimates, alpha);
  est.ci_normal =
      ConfidenceInterval{full.theta - z * st.sd, full.theta + z * st.sd, 1.0 - alpha};
  est.mm_active_ci = percentile_ci(rr.mm_active, alpha);
  est.mm_control_ci = percentile_ci(rr.mm_control, alpha);
  est.n_resamples = m;
  est.n_failures = static_cast<long>(rr.failures.size());
  if (out_resamples) *out_resamples = std::move(rr);
  return est;
}

EffectEstimate bootstrap(const TrialDataset& ds, const PipelineSpec& spec, int m,
                         std::uint64_t seed, double alpha, int threads,
                         ResampleResult* out_resamples) {
  EffectEstimate est =
      bootstrap_fn(ds, make_pipeline_fn(ds, spec), m, seed, alpha, threads, out_resamples);
  est.strategy = spec.strategy;
  return est;
}

std::string replicates_to_csv(const ResampleResult& r) {
  std::ostringstream os;
  os << "replicate,theta,marginal_mean_active,marginal_mean_control,status\n";
  std::size_t next_failure = 0;
  std::size_t ok_idx = 0;
  const std::size_t total = r.estimates.size() + r.failures.size();
  for (std::size_t i = 0; i < total; ++i) {
    if (next_failure < r.failures.size() && r.failures[next_failure].index == i) {
      std::string msg = r.failures[next_failure].message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      os << i << ",,,,failed: " << msg << '\n';
      ++next_failure;
    } else {
      os << i << ',' << format_double(r.estimates[ok_idx]) << ','
         << format_double(r.mm_active[ok_idx]) << ',' << format_double(r.mm_control[ok_idx])
         << ",ok\n";
      ++ok_idx;
    }
  }
  return os.str();
}

}  // namespace slrcmi
