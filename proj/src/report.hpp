#pragma once

#include "paraopt/experiments.hpp"

namespace paraopt::experiments::detail {

CsvTable history_table(const ConvergenceReport<double>& rep);

/// History artifact, iteration count and convergence flags.
void record_report(ExperimentResult& res, const ConvergenceReport<double>& rep, const std::string& prefix = "");

}  // namespace paraopt::experiments::detail
