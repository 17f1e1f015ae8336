// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "glyco/experiment.hpp"
#include "glyco/metrics.hpp"

namespace glyco::render {

/// Aligned text table, one line per summary row, `mean ± std` cells.
std::string format_table(const std::vector<experiment::SummaryRow>& rows);

struct NamedTrace {
  std::string name;
  metrics::PredictionTrace trace;
};

/// Line plot of the reference glucose (taken from the first trace) and every
/// prediction, restricted to points whose timestamp falls in day `day`.
std::string trace_svg(const std::vector<NamedTrace>& traces, std::int64_t day, const std::string& title);

/// P-EGA (left) and R-EGA (right) scatter, one circle per point per panel,
/// colored by AP/BE/EP.
std::string ega_svg(const std::vector<metrics::ScoredPoint>& points, const std::string& title);

struct RenderOutput {
  std::string table;
  std::vector<std::filesystem::path> files;  // written, in creation order
};

/// Reads report.csv and traces/ under `dir`; writes summary.txt and
/// figures/<patient>__day<N>.svg (raw predictions of every model) and
/// figures/<patient>__<model>__<raw|smoothed>__ega.svg.
/// Throws FileNotFoundError when report.csv or traces/ is missing.
RenderOutput report_render(const std::filesystem::path& dir);

}  // namespace glyco::render
