#include "ecoinf/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ecoinf {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream s(line);
  while (std::getline(s, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t k = 0;
  while (k < s.size() && s[k] == ' ') ++k;
  return s.substr(k);
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

Count parse_count(const std::string& field, std::size_t line) {
  Count v = 0;
  const std::string f = strip(field);
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) fail(line, "expected an integer, got '" + f + "'");
  if (v < 0) fail(line, "negative count " + f);
  return v;
}

double parse_double(const std::string& field, std::size_t line) {
  const std::string f = strip(field);
  if (f == "nan" || f == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) fail(line, "expected a number, got '" + f + "'");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Reads the next nonempty line; returns false at end of input.
bool next_line(std::istream& in, std::string& line, std::size_t& number) {
  while (std::getline(in, line)) {
    ++number;
    line = strip(line);
    if (!line.empty()) return true;
  }
  return false;
}

}  // namespace

void write_aggregated_csv(std::ostream& out, std::span<const UnitAggregate> units, const DatasetMeta& meta) {
  out << "unit,seat";
  for (const std::string& r : meta.row_labels) out << ",x_" << r;
  for (const std::string& c : meta.col_labels) out << ",y_" << c;
  out << '\n';
  for (const UnitAggregate& u : units) {
    const auto seat = meta.seat_of_unit.find(u.id);
    out << u.id << ',' << (seat == meta.seat_of_unit.end() ? std::string() : seat->second);
    for (Index i = 0; i < u.x.size(); ++i) out << ',' << u.x(i);
    for (Index j = 0; j < u.y.size(); ++j) out << ',' << u.y(j);
    out << '\n';
  }
}

AggregatedData read_aggregated_csv(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  if (!next_line(in, line, number)) throw ValidationError("line 1: missing header");
  const std::vector<std::string> header = split(line);
  if (header.size() < 4 || strip(header[0]) != "unit" || strip(header[1]) != "seat") {
    fail(number, "header must start with unit,seat");
  }
  AggregatedData data;
  for (std::size_t k = 2; k < header.size(); ++k) {
    const std::string h = strip(header[k]);
    if (h.rfind("x_", 0) == 0 && data.meta.col_labels.empty()) {
      data.meta.row_labels.push_back(h.substr(2));
    } else if (h.rfind("y_", 0) == 0 && !data.meta.row_labels.empty()) {
      data.meta.col_labels.push_back(h.substr(2));
    } else {
      fail(number, "unexpected column '" + h + "'");
    }
  }
  const Index R = data.meta.rows();
  const Index C = data.meta.cols();
  if (R < 1 || C < 1) fail(number, "need at least one x_ and one y_ column");
  while (next_line(in, line, number)) {
    const std::vector<std::string> f = split(line);
    if (static_cast<Index>(f.size()) != 2 + R + C) {
      fail(number, "expected " + std::to_string(2 + R + C) + " fields, got " + std::to_string(f.size()));
    }
    const std::string id = strip(f[0]);
    if (id.empty()) fail(number, "empty unit id");
    CountVector x(R);
    CountVector y(C);
    for (Index i = 0; i < R; ++i) x(i) = parse_count(f[static_cast<std::size_t>(2 + i)], number);
    for (Index j = 0; j < C; ++j) y(j) = parse_count(f[static_cast<std::size_t>(2 + R + j)], number);
    try {
      data.units.push_back(make_unit(id, x, y));
    } catch (const ValidationError& e) {
      fail(number, e.what());
    }
    if (!data.meta.seat_of_unit.emplace(id, strip(f[1])).second) fail(number, "duplicate unit '" + id + "'");
  }
  return data;
}

void write_individual_csv(std::ostream& out, std::span<const IndividualTable> tables) {
  out << "unit,row,col,count\n";
  for (const IndividualTable& t : tables) {
    for (Index i = 0; i < t.counts.rows(); ++i) {
      for (Index j = 0; j < t.counts.cols(); ++j) {
        out << t.id << ',' << i + 1 << ',' << j + 1 << ',' << t.counts(i, j) << '\n';
      }
    }
  }
}

std::vector<IndividualTable> read_individual_csv(std::istream& in, Index rows, Index cols) {
  std::string line;
  std::size_t number = 0;
  if (!next_line(in, line, number)) throw ValidationError("line 1: missing header");
  const std::vector<std::string> header = split(line);
  if (header.size() != 4 || strip(header[0]) != "unit" || strip(header[1]) != "row" || strip(header[2]) != "col" ||
      strip(header[3]) != "count") {
    fail(number, "header must be unit,row,col,count");
  }
  std::vector<IndividualTable> tables;
  std::map<std::string, std::size_t> where;
  std::map<std::string, Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> seen;
  while (next_line(in, line, number)) {
    const std::vector<std::string> f = split(line);
    if (f.size() != 4) fail(number, "expected 4 fields, got " + std::to_string(f.size()));
    const std::string id = strip(f[0]);
    if (id.empty()) fail(number, "empty unit id");
    const Count i = parse_count(f[1], number);
    const Count j = parse_count(f[2], number);
    if (i < 1 || i > rows) fail(number, "row index " + std::to_string(i) + " outside 1.." + std::to_string(rows));
    if (j < 1 || j > cols) fail(number, "column index " + std::to_string(j) + " outside 1.." + std::to_string(cols));
    const Count count = parse_count(f[3], number);
    auto [it, inserted] = where.try_emplace(id, tables.size());
    if (inserted) {
      tables.push_back({id, CountMatrix::Zero(rows, cols)});
      seen[id] = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
    }
    auto& mark = seen[id](i - 1, j - 1);
    if (mark) fail(number, "duplicate cell (" + std::to_string(i) + "," + std::to_string(j) + ") for unit '" + id + "'");
    mark = true;
    tables[it->second].counts(i - 1, j - 1) = count;
  }
  return tables;
}

void write_covariates_csv(std::ostream& out, const CovariateTable& table) {
  out << "unit";
  for (const std::string& n : table.names) out << ',' << n;
  out << '\n';
  for (std::size_t u = 0; u < table.unit_ids.size(); ++u) {
    out << table.unit_ids[u];
    for (Index l = 0; l < table.size(); ++l) out << ',' << format_double(table.values(static_cast<Index>(u), l));
    out << '\n';
  }
}

CovariateTable read_covariates_csv(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  if (!next_line(in, line, number)) throw ValidationError("line 1: missing header");
  const std::vector<std::string> header = split(line);
  if (header.empty() || strip(header[0]) != "unit") fail(number, "header must start with unit");
  CovariateTable table;
  for (std::size_t k = 1; k < header.size(); ++k) table.names.push_back(strip(header[k]));
  std::vector<Eigen::RowVectorXd> rows;
  while (next_line(in, line, number)) {
    const std::vector<std::string> f = split(line);
    if (f.size() != header.size()) {
      fail(number, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    Eigen::RowVectorXd v(table.size());
    for (Index l = 0; l < table.size(); ++l) v(l) = parse_double(f[static_cast<std::size_t>(l + 1)], number);
    const std::string id = strip(f[0]);
    if (std::find(table.unit_ids.begin(), table.unit_ids.end(), id) != table.unit_ids.end()) {
      fail(number, "duplicate unit '" + id + "'");
    }
    table.unit_ids.push_back(id);
    rows.push_back(v);
  }
  table.values.resize(static_cast<Index>(rows.size()), table.size());
  for (std::size_t u = 0; u < rows.size(); ++u) table.values.row(static_cast<Index>(u)) = rows[u];
  return table;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      if (std::isfinite(m(i, j))) {
        row.push_back(m(i, j));
      } else {
        row.push_back(nullptr);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("matrix must be an array of rows");
  const Index R = static_cast<Index>(j.size());
  const Index C = R > 0 ? static_cast<Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(R, C);
  for (Index i = 0; i < R; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != C) throw ValidationError("matrix rows differ in length");
    for (Index c = 0; c < C; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      m(i, c) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    }
  }
  return m;
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

nlohmann::json config_to_json(const GeneratorConfig& c) {
  nlohmann::json j;
  j["num_units"] = c.num_units;
  j["num_seats"] = c.num_seats;
  j["row_labels"] = c.row_labels;
  j["col_labels"] = c.col_labels;
  j["base_pi"] = matrix_to_json(c.base_pi);
  j["concentration"] = vector_to_json(c.concentration);
  j["size_mean"] = c.size_mean;
  j["size_sd"] = c.size_sd;
  j["bias"] = nlohmann::json::array();
  for (const Eigen::MatrixXd& b : c.bias) j["bias"].push_back(matrix_to_json(b));
  j["covariates"] = nlohmann::json::array();
  for (const CovariateLaw& law : c.covariates) {
    j["covariates"].push_back(
        {{"name", law.name}, {"mean", law.mean}, {"sd", law.sd}, {"slopes", matrix_to_json(law.slopes)}});
  }
  j["sigma_station"] = c.sigma_station;
  j["sigma_seat"] = c.sigma_seat;
  j["per_group_effects"] = c.per_group_effects;
  j["seed"] = c.seed;
  return j;
}

GeneratorConfig config_from_json(const nlohmann::json& j) {
  try {
    if (j.is_string() && j.get<std::string>() == "palermo_like") return palermo_like_config();
    GeneratorConfig c;
    if (j.contains("preset")) {
      const std::string preset = j.at("preset").get<std::string>();
      if (preset != "palermo_like") throw ValidationError("unknown preset '" + preset + "'");
      c = palermo_like_config();
    }
    if (j.contains("num_units")) c.num_units = j.at("num_units").get<Index>();
    if (j.contains("num_seats")) c.num_seats = j.at("num_seats").get<Index>();
    if (j.contains("row_labels")) c.row_labels = j.at("row_labels").get<std::vector<std::string>>();
    if (j.contains("col_labels")) c.col_labels = j.at("col_labels").get<std::vector<std::string>>();
    if (j.contains("base_pi")) c.base_pi = matrix_from_json(j.at("base_pi"));
    if (j.contains("concentration")) c.concentration = vector_from_json(j.at("concentration"));
    if (j.contains("size_mean")) c.size_mean = j.at("size_mean").get<double>();
    if (j.contains("size_sd")) c.size_sd = j.at("size_sd").get<double>();
    if (j.contains("bias")) {
      c.bias.clear();
      for (const auto& b : j.at("bias")) c.bias.push_back(matrix_from_json(b));
    }
    if (j.contains("covariates")) {
      c.covariates.clear();
      for (const auto& law : j.at("covariates")) {
        c.covariates.push_back({law.at("name").get<std::string>(), law.at("mean").get<double>(),
                                law.at("sd").get<double>(), matrix_from_json(law.at("slopes"))});
      }
    }
    if (j.contains("sigma_station")) c.sigma_station = j.at("sigma_station").get<double>();
    if (j.contains("sigma_seat")) c.sigma_seat = j.at("sigma_seat").get<double>();
    if (j.contains("per_group_effects")) c.per_group_effects = j.at("per_group_effects").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (c.row_labels.empty()) {
      for (Index i = 0; i < c.rows(); ++i) c.row_labels.push_back("r" + std::to_string(i + 1));
    }
    if (c.col_labels.empty()) {
      for (Index k = 0; k < c.cols(); ++k) c.col_labels.push_back("c" + std::to_string(k + 1));
    }
    validate_config(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("generator config: ") + e.what());
  }
}

nlohmann::json truth_to_json(const GeneratorTruth& truth, const DatasetMeta& meta) {
  nlohmann::json j;
  j["row_labels"] = meta.row_labels;
  j["col_labels"] = meta.col_labels;
  j["base_pi"] = matrix_to_json(truth.base_pi);
  j["expected_pooled"] = matrix_to_json(truth.expected_pooled);
  j["sigma_station"] = truth.sigma_station;
  j["sigma_seat"] = truth.sigma_seat;
  j["bias"] = nlohmann::json::array();
  for (const Eigen::MatrixXd& b : truth.bias) j["bias"].push_back(matrix_to_json(b));
  j["unit_pi"] = nlohmann::json::array();
  for (const Eigen::MatrixXd& p : truth.unit_pi) j["unit_pi"].push_back(matrix_to_json(p));
  return j;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << contents;
}

void write_population(const std::filesystem::path& dir, const SyntheticPopulation& pop) {
  std::filesystem::create_directories(dir);
  std::ostringstream agg;
  write_aggregated_csv(agg, pop.units, pop.meta);
  write_file(dir / "aggregated.csv", agg.str());
  std::ostringstream ind;
  write_individual_csv(ind, pop.tables);
  write_file(dir / "individual.csv", ind.str());
  if (pop.covariates.size() > 0) {
    std::ostringstream cov;
    write_covariates_csv(cov, pop.covariates);
    write_file(dir / "covariates.csv", cov.str());
  }
  write_file(dir / "truth.json", truth_to_json(pop.truth, pop.meta).dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& aggregated, const std::filesystem::path& individual,
                     const std::filesystem::path& covariates) {
  Dataset d;
  {
    std::istringstream in(read_file(aggregated));
    AggregatedData agg = read_aggregated_csv(in);
    d.meta = std::move(agg.meta);
    d.units = std::move(agg.units);
  }
  if (!individual.empty()) {
    std::istringstream in(read_file(individual));
    d.tables = read_individual_csv(in, d.meta.rows(), d.meta.cols());
  }
  if (!covariates.empty()) {
    std::istringstream in(read_file(covariates));
    d.covariates = read_covariates_csv(in);
  }
  return d;
}

}  // namespace ecoinf
