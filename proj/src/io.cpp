#include "scorematch/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace scorematch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) fail(ErrorCode::parse, "column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      fail(ErrorCode::parse, source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                 " fields, expected " + std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) fail(ErrorCode::parse, source + ": empty CSV");
  return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

double parse_cell(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::string& s = table.rows[row][col];
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    fail(ErrorCode::parse, "row " + std::to_string(row + 1) + ", column '" + table.header[col] +
                               "': cannot parse '" + s + "' as a finite number");
  return v;
}

Dataset dataset_from_table(const CsvTable& table, const std::vector<std::string>& response_cols,
                           const std::vector<std::string>& covariate_cols, bool intercept, bool counts) {
  if (response_cols.empty()) fail(ErrorCode::invalid_argument, "at least one response column is required");
  if (covariate_cols.empty() && !intercept) fail(ErrorCode::invalid_argument, "no covariates and no intercept");
  if (table.rows.empty()) fail(ErrorCode::parse, "CSV has no data rows");
  std::vector<std::size_t> rc, cc;
  for (const auto& c : response_cols) rc.push_back(table.column(c));
  for (const auto& c : covariate_cols) cc.push_back(table.column(c));

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index off = intercept ? 1 : 0;
  RowMatrix x(n, off + static_cast<Eigen::Index>(cc.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (intercept) x(i, 0) = 1.0;
    for (std::size_t k = 0; k < cc.size(); ++k)
      x(i, off + static_cast<Eigen::Index>(k)) = parse_cell(table, static_cast<std::size_t>(i), cc[k]);
  }
  if (counts) {
    RowMatrixI y(n, static_cast<Eigen::Index>(rc.size()));
    for (Eigen::Index i = 0; i < n; ++i)
      for (std::size_t k = 0; k < rc.size(); ++k) {
        const double v = parse_cell(table, static_cast<std::size_t>(i), rc[k]);
        if (v != std::floor(v) || v < 0.0 || v > 2e9)
          fail(ErrorCode::parse, "row " + std::to_string(i + 1) + ", column '" + table.header[rc[k]] +
                                     "': count must be a non-negative integer, got '" +
                                     table.rows[static_cast<std::size_t>(i)][rc[k]] + "'");
        y(i, static_cast<Eigen::Index>(k)) = static_cast<int>(v);
      }
    return Dataset::counts(std::move(x), std::move(y));
  }
  RowMatrix y(n, static_cast<Eigen::Index>(rc.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t k = 0; k < rc.size(); ++k)
      y(i, static_cast<Eigen::Index>(k)) = parse_cell(table, static_cast<std::size_t>(i), rc[k]);
  return Dataset::continuous(std::move(x), std::move(y));
}

Dataset load_csv(const std::string& path, const std::vector<std::string>& response_cols,
                 const std::vector<std::string>& covariate_cols, bool intercept, bool counts) {
  const CsvTable table = read_csv(path);
  try {
    return dataset_from_table(table, response_cols, covariate_cols, intercept, counts);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) fail(ErrorCode::io, "write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec || !std::filesystem::is_directory(path)) fail(ErrorCode::io, "cannot create directory '" + path + "'");
}

std::string coefficients_csv(const CiTable& table) {
  std::string s = "parameter,estimate,se,t_abs,ci_lo,ci_hi\n";
  for (const CiRow& r : table)
    s += r.parameter + "," + format_double(r.estimate) + "," + format_double(r.se) + "," + format_double(r.t_abs) +
         "," + format_double(r.lo) + "," + format_double(r.hi) + "\n";
  return s;
}

std::string mc_report_csv(const McReport& report) {
  std::string s = "setting,estimator,variant,n,parameter,truth,bias,sd,asd,rmse,coverage,replicates,failed\n";
  for (const McRow& r : report.rows)
    s += r.setting + "," + r.estimator + "," + r.variant + "," + std::to_string(r.n) + "," + r.parameter + "," +
         format_double(r.truth) + "," + format_double(r.bias) + "," + format_double(r.sd) + "," +
         format_double(r.asd) + "," + format_double(r.rmse) + "," + format_double(r.coverage) + "," +
         std::to_string(r.replicates) + "," + std::to_string(r.failed) + "\n";
  return s;
}

std::string pit_csv(const Eigen::VectorXd& u) {
  std::vector<double> s(u.data(), u.data() + u.size());
  std::sort(s.begin(), s.end());
  std::string out = "sorted_pit,uniform_quantile\n";
  const double n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    out += format_double(s[i]) + "," + format_double((static_cast<double>(i) + 0.5) / n) + "\n";
  return out;
}

std::string dataset_csv(const Dataset& data, const std::vector<std::string>& response_names,
                        const std::vector<std::string>& covariate_names, bool skip_intercept) {
  const std::size_t first = skip_intercept ? 1 : 0;
  if (response_names.size() != data.response_dim() || covariate_names.size() + first != data.covariates())
    fail(ErrorCode::dimension_mismatch, "column names do not match the dataset");
  std::string s;
  std::vector<std::string> header = response_names;
  header.insert(header.end(), covariate_names.begin(), covariate_names.end());
  for (std::size_t k = 0; k < header.size(); ++k) s += (k ? "," : "") + header[k];
  s += "\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::string line;
    for (std::size_t j = 0; j < data.response_dim(); ++j) {
      if (j) line += ",";
      line += data.is_count() ? std::to_string(data.y_count_row(i)[j]) : format_double(data.y_cont_row(i)[j]);
    }
    const auto x = data.x_row(i);
    for (std::size_t k = first; k < x.size(); ++k) line += "," + format_double(x[k]);
    s += line + "\n";
  }
  return s;
}

}  // namespace scorematch
