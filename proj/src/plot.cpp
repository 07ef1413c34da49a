#include "adapd/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>

#include "adapd/io_util.hpp"

namespace adapd {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 50;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Point {
  double lx;
  double ly;
};

}  // namespace

std::string render_svg(const std::vector<Series>& series, Metric metric, const std::string& title) {
  std::vector<std::vector<Point>> lines;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    std::vector<Point> pts;
    for (const auto& row : s.rows) {
      const double v = metric_value(row, metric);
      if (row.comms <= 0 || !(v > 0.0) || !std::isfinite(v)) continue;
      const Point p{std::log10(static_cast<double>(row.comms)), std::log10(v)};
      xmin = std::min(xmin, p.lx);
      xmax = std::max(xmax, p.lx);
      ymin = std::min(ymin, p.ly);
      ymax = std::max(ymax, p.ly);
      pts.push_back(p);
    }
    lines.push_back(std::move(pts));
  }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  xmin = std::floor(xmin);
  xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin);
  ymax = std::max(std::ceil(ymax), ymin + 1);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto sx = [&](double lx) { return kLeft + (lx - xmin) / (xmax - xmin) * pw; };
  const auto sy = [&](double ly) { return kTop + (ymax - ly) / (ymax - ymin) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth) + "\" height=\"" +
         fixed(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fixed(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  svg += "<rect x=\"" + fixed(kLeft) + "\" y=\"" + fixed(kTop) + "\" width=\"" + fixed(pw) +
         "\" height=\"" + fixed(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(xmin); e <= static_cast<int>(xmax); ++e) {
    const double x = sx(e);
    svg += "<line x1=\"" + fixed(x) + "\" y1=\"" + fixed(kTop) + "\" x2=\"" + fixed(x) + "\" y2=\"" +
           fixed(kTop + ph) + "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + fixed(x) + "\" y=\"" + fixed(kTop + ph + 16) +
           "\" text-anchor=\"middle\">1e" + std::to_string(e) + "</text>\n";
  }
  for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
    const double y = sy(e);
    svg += "<line x1=\"" + fixed(kLeft) + "\" y1=\"" + fixed(y) + "\" x2=\"" + fixed(kLeft + pw) +
           "\" y2=\"" + fixed(y) + "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + fixed(kLeft - 6) + "\" y=\"" + fixed(y + 4) +
           "\" text-anchor=\"end\">1e" + std::to_string(e) + "</text>\n";
  }
  svg += "<text x=\"" + fixed(kLeft + pw / 2) + "\" y=\"" + fixed(kHeight - 12) +
         "\" text-anchor=\"middle\">communications</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % (sizeof kColors / sizeof kColors[0])];
    std::string pts;
    for (const auto& p : lines[s]) {
      if (!pts.empty()) pts += ' ';
      pts += fixed(sx(p.lx)) + "," + fixed(sy(p.ly));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(s);
    svg += "<line x1=\"" + fixed(kLeft + pw + 12) + "\" y1=\"" + fixed(ly - 4) + "\" x2=\"" +
           fixed(kLeft + pw + 32) + "\" y2=\"" + fixed(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fixed(kLeft + pw + 38) + "\" y=\"" + fixed(ly) + "\">" +
           escape(series[s].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> cmd_plot(const std::vector<std::filesystem::path>& csv_paths,
                                            const std::filesystem::path& out_dir) {
  if (csv_paths.empty()) throw std::invalid_argument("plot needs at least one CSV file");
  std::vector<Series> series;
  std::set<std::string> stems;
  for (const auto& p : csv_paths) stems.insert(p.stem().string());
  const bool ambiguous = stems.size() != csv_paths.size();
  for (const auto& p : csv_paths) {
    Series s;
    s.label = ambiguous ? (p.parent_path().filename() / p.stem()).string() : p.stem().string();
    try {
      s.rows = parse_metrics_csv(read_file(p));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(p.string() + ": " + e.what());
    }
    if (s.rows.empty()) throw std::invalid_argument(p.string() + ": CSV has no data rows");
    series.push_back(std::move(s));
  }
  struct Chart {
    Metric metric;
    const char* file;
    const char* title;
  };
  const Chart charts[] = {{Metric::kSubopt, "subopt.svg", "suboptimality |phi(x_bar) - phi*|"},
                          {Metric::kInfeas, "infeas.svg", "infeasibility sum ||[g_i]_+||"},
                          {Metric::kConsensus, "consensus.svg", "consensus violation ||V x_bar||"}};
  std::vector<std::string> rendered;
  for (const auto& c : charts) rendered.push_back(render_svg(series, c.metric, c.title));
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < rendered.size(); ++k) {
    written.push_back(out_dir / charts[k].file);
    write_file(written.back(), rendered[k]);
  }
  return written;
}

}  // namespace adapd
