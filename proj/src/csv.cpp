#include "paraopt/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace paraopt::experiments {

void CsvTable::add_row(std::vector<double> row) {
  require(row.size() == columns.size(), ErrorCode::DimensionMismatch, "CSV row does not match the header");
  rows.push_back(std::move(row));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string CsvTable::to_csv() const {
  std::ostringstream out;
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_number(row[j]);
    out << '\n';
  }
  return out.str();
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  require(it != columns.end(), ErrorCode::InvalidParameter, "no column named " + name);
  const auto j = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[j]);
  return out;
}

GoldenCheck make_check(std::string name, double value, double expected, double tolerance) {
  GoldenCheck c{std::move(name), value, expected, tolerance, false};
  c.pass = std::isfinite(value) && std::abs(value - expected) <= tolerance;
  return c;
}

GoldenCheck zero_check(std::string name, long long violations) {
  return make_check(std::move(name), static_cast<double>(violations), 0.0, 0.0);
}

bool ExperimentResult::checks_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const GoldenCheck& c) { return c.pass; });
}

const CsvTable* ExperimentResult::artifact(const std::string& key) const {
  for (const auto& [k, t] : artifacts) {
    if (k == key) return &t;
  }
  return nullptr;
}

std::optional<double> ExperimentResult::parameter(const std::string& key) const {
  for (const auto& [k, v] : parameters) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const GoldenCheck* ExperimentResult::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void ExperimentResult::set(const std::string& key, double value) {
  for (auto& [k, v] : parameters) {
    if (k == key) {
      v = value;
      return;
    }
  }
  parameters.emplace_back(key, value);
}

double convergence_exponent(const std::vector<double>& errors, double floor) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (errors[k] > floor && errors[k + 1] > floor) {
      x.push_back(std::log(errors[k]));
      y.push_back(std::log(errors[k + 1]));
    }
  }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

double late_contraction(const std::vector<double>& errors, double floor, int count) {
  std::vector<double> ratios;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (errors[k] > floor && errors[k + 1] > floor) ratios.push_back(errors[k + 1] / errors[k]);
  }
  if (ratios.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(std::max(count, 1)), ratios.size());
  double logsum = 0;
  for (std::size_t i = ratios.size() - m; i < ratios.size(); ++i) logsum += std::log(ratios[i]);
  return std::exp(logsum / static_cast<double>(m));
}

}  // namespace paraopt::experiments
