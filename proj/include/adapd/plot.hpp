// Log-log SVG line charts of metrics CSVs against communications.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adapd/metrics.hpp"

namespace adapd {

struct Series {
  std::string label;
  std::vector<MetricsRow> rows;
};

/// One chart: x = communications, y = the chosen metric, both log10.
/// Points with non-positive or non-finite values are left out.
std::string render_svg(const std::vector<Series>& series, Metric metric, const std::string& title);

/// Reads every CSV (label = file stem), then writes subopt.svg, infeas.svg and
/// consensus.svg into `out_dir`. Nothing is written if any input is rejected.
std::vector<std::filesystem::path> cmd_plot(const std::vector<std::filesystem::path>& csv_paths,
                                            const std::filesystem::path& out_dir);

}  // namespace adapd
