#include "jointrait/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "jointrait/error.hpp"

namespace jointrait {

namespace {

namespace fs = std::filesystem;

struct Table {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // 1-based source line for each row

  int column(const std::string& name, bool required = true) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw DataError(file + ".header", "missing column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  }
  std::string where(std::size_t r, const std::string& col) const {
    return file + ":" + std::to_string(lines[r]) + "." + col;
  }
};

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(trim(cell));
  return out;
}

Table read_table(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError(path.filename().string(), "cannot open '" + path.string() + "'");
  Table t;
  t.file = path.filename().string();
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError(t.file + ":" + std::to_string(n), "expected " + std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(cells));
    t.lines.push_back(n);
  }
  if (t.header.empty()) throw DataError(t.file, "file is empty");
  return t;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

double parse_double(const std::string& s, const std::string& field) {
  double x = 0.0;
  const char* end = s.data() + s.size();
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, x);
  if (ec != std::errc() || ptr != end) throw DataError(field, "'" + s + "' is not a number");
  return x;
}

int parse_indicator(const std::string& s, const std::string& field) {
  const double x = parse_double(s, field);
  if (x != 0.0 && x != 1.0) throw DataError(field, "must be 0 or 1");
  return static_cast<int>(x);
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

Dataset read_dataset(const std::string& dir, const ModelSpec& spec) {
  const fs::path root(dir);
  const Table surv = read_table(root / "survival.csv");
  const int c_id = surv.column("id"), c_time = surv.column("time"), c_event = surv.column("event");

  Dataset data;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < surv.rows.size(); ++r) {
    const auto& row = surv.rows[r];
    SubjectRecord s;
    s.id = row[c_id];
    if (s.id.empty()) throw DataError(surv.where(r, "id"), "empty id");
    if (!index.emplace(s.id, data.subjects.size()).second) throw DataError(surv.where(r, "id"), "duplicate id '" + s.id + "'");
    s.observed_time = parse_double(row[c_time], surv.where(r, "time"));
    s.event = parse_indicator(row[c_event], surv.where(r, "event"));
    data.subjects.push_back(std::move(s));
  }
  auto subject_of = [&](const Table& t, std::size_t r, int col) -> SubjectRecord& {
    const auto it = index.find(t.rows[r][col]);
    if (it == index.end()) throw DataError(t.where(r, "id"), "id '" + t.rows[r][col] + "' is not in survival.csv");
    return data.subjects[it->second];
  };

  if (fs::exists(root / "covariates.csv")) {
    const Table cov = read_table(root / "covariates.csv");
    const int cid = cov.column("id");
    std::set<std::string> seen;
    for (std::size_t r = 0; r < cov.rows.size(); ++r) {
      auto& s = subject_of(cov, r, cid);
      if (!seen.insert(s.id).second) throw DataError(cov.where(r, "id"), "duplicate covariate row for '" + s.id + "'");
      for (std::size_t c = 0; c < cov.header.size(); ++c) {
        if (static_cast<int>(c) == cid || is_missing(cov.rows[r][c])) continue;
        s.covariates[cov.header[c]] = parse_double(cov.rows[r][c], cov.where(r, cov.header[c]));
      }
    }
  } else if (!spec.covariate_names().empty()) {
    throw DataError("covariates.csv", "missing, but the design uses covariates");
  }

  const Table lon = read_table(root / "longitudinal.csv");
  const int l_id = lon.column("id"), l_time = lon.column("time"), l_out = lon.column("outcome"),
            l_val = lon.column("value");
  const int K = spec.n_outcomes();
  // (subject, time) -> visit; kept ordered by time
  std::vector<std::map<double, Visit>> visits(data.subjects.size());
  for (std::size_t r = 0; r < lon.rows.size(); ++r) {
    const auto& row = lon.rows[r];
    const std::size_t i = &subject_of(lon, r, l_id) - data.subjects.data();
    const double t = parse_double(row[l_time], lon.where(r, "time"));
    const int k = spec.outcome_index(row[l_out]);
    if (k < 0) throw DataError(lon.where(r, "outcome"), "unknown outcome '" + row[l_out] + "'");
    auto [it, fresh] = visits[i].try_emplace(t);
    if (fresh) {
      it->second.time = t;
      it->second.values.assign(K, std::nullopt);
    }
    auto& slot = it->second.values[k];
    if (slot) throw DataError(lon.where(r, "value"), "duplicate value for this subject, time and outcome");
    if (!is_missing(row[l_val])) slot = parse_double(row[l_val], lon.where(r, "value"));
  }
  for (std::size_t i = 0; i < data.subjects.size(); ++i)
    for (auto& [t, v] : visits[i]) data.subjects[i].visits.push_back(std::move(v));

  validate_dataset(data, spec);
  return data;
}

void write_dataset(const std::string& dir, const Dataset& data, const ModelSpec& spec) {
  const fs::path root(dir);
  fs::create_directories(root);
  std::set<std::string> names;
  for (const auto& s : data.subjects)
    for (const auto& [name, value] : s.covariates) names.insert(name);

  std::ostringstream surv, cov, lon;
  surv << "id,time,event\n";
  cov << "id";
  for (const auto& n : names) cov << ',' << csv_cell(n);
  cov << '\n';
  lon << "id,time,outcome,value\n";
  for (const auto& s : data.subjects) {
    const auto id = csv_cell(s.id);
    surv << id << ',' << format_double(s.observed_time) << ',' << s.event << '\n';
    cov << id;
    for (const auto& n : names) {
      cov << ',';
      if (const auto it = s.covariates.find(n); it != s.covariates.end()) cov << format_double(it->second);
    }
    cov << '\n';
    for (const auto& v : s.visits)
      for (int k = 0; k < spec.n_outcomes(); ++k) {
        lon << id << ',' << format_double(v.time) << ',' << csv_cell(spec.outcomes[k].name) << ',';
        if (k < static_cast<int>(v.values.size()) && v.values[k]) lon << format_double(*v.values[k]);
        lon << '\n';
      }
  }
  write_text_file((root / "survival.csv").string(), surv.str());
  write_text_file((root / "covariates.csv").string(), cov.str());
  write_text_file((root / "longitudinal.csv").string(), lon.str());
}

std::vector<EvalRecord> read_predictions(const std::string& path) {
  const Table t = read_table(path);
  const int c_id = t.column("id"), c_risk = t.column("risk"), c_time = t.column("time"), c_event = t.column("event");
  std::vector<EvalRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    EvalRecord e;
    e.id = row[c_id];
    e.risk = parse_double(row[c_risk], t.where(r, "risk"));
    e.time = parse_double(row[c_time], t.where(r, "time"));
    e.event = parse_indicator(row[c_event], t.where(r, "event"));
    out.push_back(std::move(e));
  }
  return out;
}

void write_predictions(const std::string& path, const std::vector<EvalRecord>& records) {
  std::ostringstream out;
  out << "id,risk,time,event\n";
  for (const auto& r : records)
    out << csv_cell(r.id) << ',' << format_double(r.risk) << ',' << format_double(r.time) << ',' << r.event << '\n';
  write_text_file(path, out.str());
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << text;
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace jointrait
