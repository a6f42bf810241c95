#pragma once

#include "scorematch/core.hpp"
#include "scorematch/experiments.hpp"
#include "scorematch/inference.hpp"

#include <string>
#include <vector>

namespace scorematch {

/// Header plus raw string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header entry; fails with a parse error naming the column.
  std::size_t column(const std::string& name) const;
};

/// Comma-separated, header row first. Surrounding whitespace is trimmed;
/// quoting is not supported.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");

/// Parses a whole cell as a double; fails naming row (1-based, data rows)
/// and column.
double parse_cell(const CsvTable& table, std::size_t row, std::size_t col);

/// Builds a dataset from named columns. With `intercept`, a leading column of
/// ones is prepended to the covariates. Count responses must be
/// non-negative integers.
Dataset load_csv(const std::string& path, const std::vector<std::string>& response_cols,
                 const std::vector<std::string>& covariate_cols, bool intercept, bool counts);
Dataset dataset_from_table(const CsvTable& table, const std::vector<std::string>& response_cols,
                           const std::vector<std::string>& covariate_cols, bool intercept, bool counts);

/// %.17g, so every double reloads to the same bits.
std::string format_double(double v);

void write_text(const std::string& path, const std::string& contents);
std::string read_text(const std::string& path);

/// parameter, estimate, se, t_abs, ci_lo, ci_hi
std::string coefficients_csv(const CiTable& table);
std::string mc_report_csv(const McReport& report);
/// sorted_pit, uniform_quantile with uniform_quantile = (i - 0.5) / n.
std::string pit_csv(const Eigen::VectorXd& u);
/// Responses then covariates, with the given column names.
std::string dataset_csv(const Dataset& data, const std::vector<std::string>& response_names,
                        const std::vector<std::string>& covariate_names, bool skip_intercept);

/// Creates the directory (and parents) when missing.
void ensure_directory(const std::string& path);

}  // namespace scorematch
