#include "core/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "core/errors.hpp"

namespace slrcmi {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

double parse_double_strict(const std::string& cell, const std::string& what,
                           const std::string& patient, long line_no) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (cell.empty() || end != begin + cell.size()) {
    std::ostringstream os;
    os << "malformed numeric cell for " << what << " (patient '" << patient << "', line "
       << line_no << "): '" << cell << "'";
    throw DataError(os.str());
  }
  return v;
}

long parse_int_strict(const std::string& cell, const std::string& what,
                      const std::string& patient, long line_no) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (cell.empty() || end != begin + cell.size()) {
    std::ostringstream os;
    os << "malformed integer cell for " << what << " (patient '" << patient << "', line "
       << line_no << "): '" << cell << "'";
    throw DataError(os.str());
  }
  return v;
}

bool is_missing_cell(const std::string& cell) { return cell.empty() || cell == "NA"; }

struct RawRow {
  long line_no;
  int visit;
  int arm;
  std::optional<double> outcome;
  int on_treatment;
  std::vector<double> covariates;
  std::optional<std::string> stratum;
};

}  // namespace

TrialDataset parse_trial_csv(std::string_view text, const ColumnSchema& schema) {
  // Header.
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) -> bool {
    if (pos >= text.size()) return false;
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    line = text.substr(pos, nl - pos);
    pos = nl + 1;
    return true;
  };
  std::string_view header_line;
  if (!next_line(header_line)) throw DataError("CSV is empty");
  const std::vector<std::string> header = split_csv_line(header_line);

  auto col_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  auto require_col = [&](const std::string& name) -> int {
    int i = col_index(name);
    if (i < 0) throw DataError("CSV is missing required column '" + name + "'");
    return i;
  };

  const int c_id = require_col(schema.patient_col);
  const int c_visit = require_col(schema.visit_col);
  const int c_arm = require_col(schema.arm_col);
  const int c_outcome = require_col(schema.outcome_col);
  const int c_on = require_col(schema.on_treatment_col);
  int c_stratum = -1;
  if (schema.stratum_col) c_stratum = require_col(*schema.stratum_col);

  std::vector<std::string> covariate_names;
  std::vector<int> covariate_idx;
  if (schema.covariate_cols) {
    for (const auto& name : *schema.covariate_cols) {
      covariate_names.push_back(name);
      covariate_idx.push_back(require_col(name));
    }
  } else {
    std::set<int> taken = {c_id, c_visit, c_arm, c_outcome, c_on};
    if (c_stratum >= 0) taken.insert(c_stratum);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (!taken.count(static_cast<int>(i))) {
        covariate_names.push_back(header[i]);
        covariate_idx.push_back(static_cast<int>(i));
      }
    }
  }

  // Rows, grouped by patient in first-appearance order.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<RawRow>> rows;
  std::string_view line;
  long line_no = 1;
  int max_visit = -1;
  while (next_line(line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream os;
      os << "line " << line_no << " has " << cells.size() << " cells, expected "
         << header.size();
      throw DataError(os.str());
    }
    const std::string id = cells[static_cast<std::size_t>(c_id)];
    if (id.empty()) throw DataError("empty patient id at line " + std::to_string(line_no));

    RawRow r;
    r.line_no = line_no;
    r.visit = static_cast<int>(
        parse_int_strict(cells[static_cast<std::size_t>(c_visit)], "visit", id, line_no));
    if (r.visit < 0)
      throw DataError("negative visit index for patient '" + id + "' at line " +
                      std::to_string(line_no));
    const long arm = parse_int_strict(cells[static_cast<std::size_t>(c_arm)], "arm", id, line_no);
    if (arm != 0 && arm != 1)
      throw DataError("arm must be 0 or 1 for patient '" + id + "' at line " +
                      std::to_string(line_no));
    r.arm = static_cast<int>(arm);
    const std::string& oc = cells[static_cast<std::size_t>(c_outcome)];
    if (!is_missing_cell(oc)) r.outcome = parse_double_strict(oc, "outcome", id, line_no);
    const long on =
        parse_int_strict(cells[static_cast<std::size_t>(c_on)], "on_treatment", id, line_no);
    if (on != 0 && on != 1)
      throw DataError("on_treatment must be 0 or 1 for patient '" + id + "' at line " +
                      std::to_string(line_no));
    r.on_treatment = static_cast<int>(on);
    for (std::size_t k = 0; k < covariate_idx.size(); ++k)
      r.covariates.push_back(parse_double_strict(
          cells[static_cast<std::size_t>(covariate_idx[k])], covariate_names[k], id, line_no));
    if (c_stratum >= 0) r.stratum = cells[static_cast<std::size_t>(c_stratum)];

    if (!rows.count(id)) order.push_back(id);
    rows[id].push_back(std::move(r));
    max_visit = std::max(max_visit, rows[id].back().visit);
  }
  if (order.empty()) throw DataError("CSV contains no data rows");
  const int n_visits = max_visit + 1;

  TrialDataset ds;
  ds.n_visits = n_visits;
  ds.covariate_names = covariate_names;
  if (schema.stratum_col) ds.strata_name = *schema.stratum_col;
  ds.patients.reserve(order.size());

  for (const auto& id : order) {
    auto& rs = rows[id];
    std::vector<const RawRow*> by_visit(static_cast<std::size_t>(n_visits), nullptr);
    for (const auto& r : rs) {
      if (r.visit >= n_visits) throw DataError("internal: visit out of range");
      auto& slot = by_visit[static_cast<std::size_t>(r.visit)];
      if (slot != nullptr)
        throw DataError("duplicate (patient, visit) row: patient '" + id + "', visit " +
                        std::to_string(r.visit));
      slot = &r;
    }
    for (int j = 0; j < n_visits; ++j)
      if (by_visit[static_cast<std::size_t>(j)] == nullptr)
        throw DataError("patient '" + id + "' is missing the row for visit " +
                        std::to_string(j));

    PatientRecord p;
    p.id = id;
    p.arm = by_visit[0]->arm;
    p.covariates = by_visit[0]->covariates;
    p.stratum = by_visit[0]->stratum;
    p.outcomes.resize(static_cast<std::size_t>(n_visits));

    int disc = n_visits;  // M+1 when on_treatment is all ones
    bool seen_off = false;
    for (int j = 0; j < n_visits; ++j) {
      const RawRow& r = *by_visit[static_cast<std::size_t>(j)];
      if (r.arm != p.arm)
        throw DataError("arm varies within patient '" + id + "'");
      if (r.covariates != p.covariates)
        throw DataError("covariate varies within patient '" + id + "' (visit " +
                        std::to_string(j) + ")");
      if (r.stratum != p.stratum)
        throw DataError("stratum varies within patient '" + id + "'");
      p.outcomes[static_cast<std::size_t>(j)] = r.outcome;
      if (r.on_treatment == 0) {
        if (!seen_off) {
          seen_off = true;
          disc = j;
        }
      } else if (seen_off) {
        throw DataError("non-absorbing treatment status for patient '" + id +
                        "' (on_treatment returns to 1 at visit " + std::to_string(j) + ")");
      }
    }
    p.disc_visit = disc;
    ds.patients.push_back(std::move(p));
  }
  return ds;
}

TrialDataset read_trial_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trial_csv(buf.str(), schema);
}

std::string serialize_trial_csv(const TrialDataset& ds, const ColumnSchema& schema) {
  std::ostringstream os;
  os << schema.patient_col << ',' << schema.visit_col << ',' << schema.arm_col << ','
     << schema.outcome_col << ',' << schema.on_treatment_col;
  for (const auto& c : ds.covariate_names) os << ',' << c;
  const bool strata = ds.strata_name.has_value();
  if (strata) os << ',' << (schema.stratum_col ? *schema.stratum_col : *ds.strata_name);
  os << '\n';
  for (const auto& p : ds.patients) {
    for (int j = 0; j < ds.n_visits; ++j) {
      os << p.id << ',' << j << ',' << p.arm << ',';
      if (p.observed(j)) os << format_double(*p.outcomes[static_cast<std::size_t>(j)]);
      os << ',' << (p.on_treatment(j) ? 1 : 0);
      for (double c : p.covariates) os << ',' << format_double(c);
      if (strata) os << ',' << (p.stratum ? *p.stratum : std::string());
      os << '\n';
    }
  }
  return os.str();
}

void write_trial_csv(const TrialDataset& ds, const std::string& path,
                     const ColumnSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << serialize_trial_csv(ds, schema);
}

ValidationReport validate(const TrialDataset& ds) {
  ValidationReport rep;
  const int V = ds.n_visits;
  rep.n_patients = static_cast<long>(ds.patients.size());
  rep.missing_fraction_by_visit.assign(static_cast<std::size_t>(V), 0.0);
  rep.discontinued_at.assign(static_cast<std::size_t>(V + 1), {0, 0});

  std::set<std::string> ids;
  std::array<long, 2> cells_by_arm = {0, 0};
  std::array<long, 2> missing_by_arm = {0, 0};
  std::vector<long> missing_by_visit(static_cast<std::size_t>(V), 0);

  for (const auto& p : ds.patients) {
    if (!ids.insert(p.id).second)
      rep.errors.push_back({p.id, "unique-id", "duplicate patient id"});
    if (p.arm != 0 && p.arm != 1)
      rep.errors.push_back({p.id, "arm", "arm is not 0/1"});
    else
      ++rep.n_patients_by_arm[static_cast<std::size_t>(p.arm)];
    if (static_cast<int>(p.outcomes.size()) != V)
      rep.errors.push_back({p.id, "visit-grid", "outcome vector length differs from the visit grid"});
    if (p.covariates.size() != ds.covariate_names.size())
      rep.errors.push_back({p.id, "covariates", "covariate vector length differs from covariate_names"});
    if (p.disc_visit < 0 || p.disc_visit > V)
      rep.errors.push_back({p.id, "disc-visit", "discontinuation visit outside 0..M+1"});
    if (ds.strata_name && !p.stratum)
      rep.warnings.push_back({p.id, "stratum", "stratification variable is set but this patient has no stratum"});

    const int arm = (p.arm == 1) ? 1 : 0;
    bool any_observed = false;
    const int upto = std::min<int>(V, static_cast<int>(p.outcomes.size()));
    for (int j = 0; j < upto; ++j) {
      ++cells_by_arm[static_cast<std::size_t>(arm)];
      if (!p.observed(j)) {
        ++missing_by_arm[static_cast<std::size_t>(arm)];
        ++missing_by_visit[static_cast<std::size_t>(j)];
      } else {
        any_observed = true;
      }
    }
    if (!any_observed)
      rep.warnings.push_back({p.id, "all-missing", "patient has no observed outcomes"});
    if (p.disc_visit >= 0 && p.disc_visit <= V)
      ++rep.discontinued_at[static_cast<std::size_t>(p.disc_visit)][static_cast<std::size_t>(arm)];
  }

  const long total_cells = cells_by_arm[0] + cells_by_arm[1];
  const long total_missing = missing_by_arm[0] + missing_by_arm[1];
  rep.missing_fraction =
      total_cells > 0 ? static_cast<double>(total_missing) / static_cast<double>(total_cells) : 0.0;
  for (int j = 0; j < V; ++j)
    rep.missing_fraction_by_visit[static_cast<std::size_t>(j)] =
        rep.n_patients > 0 ? static_cast<double>(missing_by_visit[static_cast<std::size_t>(j)]) /
                                 static_cast<double>(rep.n_patients)
                           : 0.0;
  for (int z = 0; z < 2; ++z)
    rep.missing_fraction_by_arm[static_cast<std::size_t>(z)] =
        cells_by_arm[static_cast<std::size_t>(z)] > 0
            ? static_cast<double>(missing_by_arm[static_cast<std::size_t>(z)]) /
                  static_cast<double>(cells_by_arm[static_cast<std::size_t>(z)])
            : 0.0;

  if (rep.n_patients_by_arm[0] == 0)
    rep.warnings.push_back({"", "arm-empty", "no control-arm patients"});
  if (rep.n_patients_by_arm[1] == 0)
    rep.warnings.push_back({"", "arm-empty", "no active-arm patients"});
  return rep;
}

std::string render_validation_text(const ValidationReport& r) {
  std::ostringstream os;
  os << "patients: " << r.n_patients << " (control " << r.n_patients_by_arm[0] << ", active "
     << r.n_patients_by_arm[1] << ")\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", r.missing_fraction);
  os << "missing_fraction: " << buf << "\n";
  for (std::size_t j = 0; j < r.missing_fraction_by_visit.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.missing_fraction_by_visit[j]);
    os << "missing_fraction_visit_" << j << ": " << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf), "%.6f", r.missing_fraction_by_arm[0]);
  os << "missing_fraction_control: " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", r.missing_fraction_by_arm[1]);
  os << "missing_fraction_active: " << buf << "\n";
  for (std::size_t j = 0; j < r.discontinued_at.size(); ++j)
    os << "discontinued_at_" << j << ": control " << r.discontinued_at[j][0] << ", active "
       << r.discontinued_at[j][1] << "\n";
  os << "errors: " << r.errors.size() << "\n";
  for (const auto& e : r.errors)
    os << "error [" << e.rule << "] patient '" << e.patient_id << "': " << e.message << "\n";
  os << "warnings: " << r.warnings.size() << "\n";
  for (const auto& w : r.warnings)
    os << "warning [" << w.rule << "] patient '" << w.patient_id << "': " << w.message << "\n";
  return os.str();
}

std::string render_validation_csv(const ValidationReport& r) {
  std::ostringstream os;
  os << "kind,patient_id,rule,message\n";
  for (const auto& e : r.errors)
    os << "error," << e.patient_id << ',' << e.rule << ',' << e.message << '\n';
  for (const auto& w : r.warnings)
    os << "warning," << w.patient_id << ',' << w.rule << ',' << w.message << '\n';
  return os.str();
}

TrialDataset change_from_baseline(const TrialDataset& ds, const std::string& baseline_name) {
  if (ds.n_visits < 2)
    throw UsageError("change_from_baseline: need at least one post-baseline visit");
  for (const auto& c : ds.covariate_names)
    if (c == baseline_name)
      throw UsageError("change_from_baseline: covariate '" + baseline_name + "' already exists");
  for (const auto& p : ds.patients)
    if (!p.observed(0))
      throw DataError("change_from_baseline: missing baseline outcome for patient '" + p.id +
                      "'");

  TrialDataset out;
  out.n_visits = ds.n_visits - 1;
  out.covariate_names = ds.covariate_names;
  out.covariate_names.push_back(baseline_name);
  out.strata_name = ds.strata_name;
  out.patients.reserve(ds.patients.size());
  for (const auto& p : ds.patients) {
    PatientRecord q;
    q.id = p.id;
    q.arm = p.arm;
    q.stratum = p.stratum;
    q.covariates = p.covariates;
    const double y0 = *p.outcomes[0];
    q.covariates.push_back(y0);
    q.outcomes.resize(static_cast<std::size_t>(out.n_visits));
    for (int j = 1; j < ds.n_visits; ++j)
      if (p.observed(j))
        q.outcomes[static_cast<std::size_t>(j - 1)] = *p.outcomes[static_cast<std::size_t>(j)] - y0;
    q.disc_visit = std::max(p.disc_visit - 1, 0);
    out.patients.push_back(std::move(q));
  }
  return out;
}

}  // namespace slrcmi
