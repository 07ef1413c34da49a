#include "adapd/metrics.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "adapd/io_util.hpp"

namespace adapd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> repeated(std::size_t count, std::size_t size) {
  return std::vector<std::size_t>(count, size);
}

std::vector<std::size_t> constraint_blocks(const ProblemInstance& instance) {
  std::vector<std::size_t> sizes;
  for (const auto& agent : instance.agents()) sizes.push_back(agent.constraint.output_dim());
  return sizes;
}

void check_shapes(const ProblemInstance& instance, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& y, const Eigen::VectorXd& lambda) {
  const auto nn = static_cast<Eigen::Index>(instance.dim() * instance.num_agents());
  if (x.size() != nn || lambda.size() != nn ||
      y.size() != static_cast<Eigen::Index>(instance.constraint_dim())) {
    throw std::invalid_argument("primal-dual point has wrong shape for this instance");
  }
}

}  // namespace

double lagrangian(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                  const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& lambda) {
  check_shapes(instance, x, y, lambda);
  if (y.size() > 0 && y.minCoeff() < 0.0) {
    throw std::invalid_argument("lagrangian: constraint multipliers must be nonnegative");
  }
  const StackedEvaluation eval = eval_stacked(instance, x);
  if (!eval.in_domain) return std::numeric_limits<double>::infinity();
  return eval.phi + eval.g.dot(y) + lambda.dot(consensus.apply(x, instance.dim()));
}

double lagrangian(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                  const PrimalDualPoint& point) {
  return lagrangian(instance, consensus, point.x, point.y, point.lambda);
}

double infeasibility(const ProblemInstance& instance, const Eigen::VectorXd& x) {
  const std::size_t n = instance.dim();
  double total = 0.0;
  for (std::size_t i = 0; i < instance.num_agents(); ++i) {
    const Eigen::VectorXd g = instance.agent(i).constraint.value(block(x, i, n));
    total += g.cwiseMax(0.0).norm();
  }
  return total;
}

double consensus_violation(const ConsensusMatrix& consensus, const Eigen::VectorXd& x,
                           std::size_t block_dim) {
  return consensus.apply(x, block_dim).norm();
}

MetricsRow reference_free_metrics(const ProblemInstance& instance,
                                  const ConsensusMatrix& consensus, const ErgodicPoint& ergodic) {
  MetricsRow row;
  row.k = ergodic.horizon;
  row.subopt = kNaN;
  row.gap = kNaN;
  row.infeas = infeasibility(instance, ergodic.point.x);
  row.consensus = consensus_violation(consensus, ergodic.point.x, instance.dim());
  return row;
}

MetricsRow ergodic_metrics(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                             const ErgodicPoint& ergodic, const ReferenceSolution& reference) {
  MetricsRow row = reference_free_metrics(instance, consensus, ergodic);
  const StackedEvaluation eval = eval_stacked(instance, ergodic.point.x);
  row.subopt = std::abs(eval.phi - reference.phi_star);
  row.gap = lagrangian_gap(instance, consensus, ergodic.point, reference.saddle_point());
  return row;
}

double lagrangian_gap(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                      const PrimalDualPoint& bar, const PrimalDualPoint& cmp) {
  return lagrangian(instance, consensus, bar.x, cmp.y, cmp.lambda) -
         lagrangian(instance, consensus, cmp.x, bar.y, bar.lambda);
}

double weighted_sq_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& weights,
                        std::span<const std::size_t> block_sizes) {
  if (static_cast<std::size_t>(weights.size()) != block_sizes.size()) {
    throw std::invalid_argument("weighted_sq_norm: one weight per block required");
  }
  double total = 0.0;
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < block_sizes.size(); ++i) {
    const auto len = static_cast<Eigen::Index>(block_sizes[i]);
    if (offset + len > v.size()) throw std::invalid_argument("weighted_sq_norm: vector too short");
    total += weights(static_cast<Eigen::Index>(i)) * v.segment(offset, len).squaredNorm();
    offset += len;
  }
  if (offset != v.size()) throw std::invalid_argument("weighted_sq_norm: vector too long");
  return total;
}

GapBoundInputs GapBoundInputs::from(const StepSizes& steps, PrimalDualPoint initial,
                                            PrimalDualPoint comparison, std::int64_t horizon) {
  const StepConstants& c = steps.constants();
  GapBoundInputs in;
  in.inv_tau = steps.tau().cwiseInverse();
  in.inv_sigma = steps.sigma().cwiseInverse();
  in.inv_gamma = steps.gamma().cwiseInverse();
  in.c = c.lipschitz_value;
  in.d = c.lipschitz_value + c.delta;
  in.delta = c.delta;
  in.initial = std::move(initial);
  in.comparison = std::move(comparison);
  in.num_agents = steps.size();
  in.horizon = horizon;
  return in;
}

double expected_gap_bound(const GapBoundInputs& in, const ProblemInstance& instance,
                    const ConsensusMatrix& consensus) {
  if (in.horizon < 1) throw std::invalid_argument("expected_gap_bound: horizon must be >= 1");
  const std::size_t big_n = instance.num_agents();
  if (in.num_agents != big_n) throw std::invalid_argument("expected_gap_bound: agent count mismatch");
  const auto x_blocks = repeated(big_n, instance.dim());
  const auto y_blocks = constraint_blocks(instance);

  const double nf = static_cast<double>(big_n);
  const double dx = weighted_sq_norm(in.initial.x - in.comparison.x, in.inv_tau + in.d, x_blocks);
  const double dy = weighted_sq_norm(in.initial.y - in.comparison.y, in.inv_sigma + in.c, y_blocks);
  const double dl = weighted_sq_norm(in.initial.lambda - in.comparison.lambda,
                                     in.inv_gamma + in.delta, x_blocks);
  double lag = 0.0;
  if (big_n > 1) {
    lag = (nf - 1.0) / nf * lagrangian_gap(instance, consensus, in.initial, in.comparison);
  }
  const double scale = nf / (2.0 * (static_cast<double>(in.horizon) + nf - 1.0));
  return scale * (dx + dy + dl + lag);
}

double metric_value(const MetricsRow& row, Metric metric) {
  switch (metric) {
    case Metric::kSubopt:
      return row.subopt;
    case Metric::kInfeas:
      return row.infeas;
    case Metric::kConsensus:
      return row.consensus;
    case Metric::kGap:
      return row.gap;
  }
  return kNaN;
}

double rate_fit(std::span<const double> ks, std::span<const double> values) {
  if (ks.size() != values.size()) throw std::invalid_argument("rate_fit: length mismatch");
  if (ks.size() < 5) throw std::invalid_argument("rate_fit: need at least 5 points");
  const auto count = static_cast<double>(ks.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(ks[i] > 0.0) || !(values[i] > 0.0)) {
      throw std::invalid_argument("rate_fit: iterations and metric values must be positive");
    }
    mx += std::log(ks[i]);
    my += std::log(values[i]);
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double dx = std::log(ks[i]) - mx;
    const double dy = std::log(values[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("rate_fit: all iteration counts are equal");
  if (syy == 0.0) throw std::invalid_argument("rate_fit: metric values are all equal");
  return sxy / sxx;
}

double rate_fit(std::span<const MetricsRow> rows, std::int64_t k_lo, std::int64_t k_hi,
                Metric metric) {
  std::vector<double> ks;
  std::vector<double> values;
  for (const auto& row : rows) {
    if (row.k >= k_lo && row.k <= k_hi && metric_value(row, metric) > 0.0) {
      ks.push_back(static_cast<double>(row.k));
      values.push_back(metric_value(row, metric));
    }
  }
  return rate_fit(ks, values);
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.k);
    out += ',';
    out += std::to_string(r.comms);
    for (double v : {r.subopt, r.infeas, r.consensus, r.gap, r.wallclock_s}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& message) {
    throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": " + message);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    fail("missing header");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) fail("expected header '" + std::string(kCsvHeader) + "'");

  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 7) fail("expected 7 fields, found " + std::to_string(fields.size()));
    MetricsRow row;
    const auto parse_int = [&](const std::string& s) {
      std::int64_t v = 0;
      const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || end != s.data() + s.size()) fail("bad integer '" + s + "'");
      return v;
    };
    const auto parse_real = [&](const std::string& s) {
      try {
        return parse_double(s);
      } catch (const std::invalid_argument&) {
        fail("bad number '" + s + "'");
      }
      return 0.0;
    };
    row.k = parse_int(fields[0]);
    row.comms = parse_int(fields[1]);
    row.subopt = parse_real(fields[2]);
    row.infeas = parse_real(fields[3]);
    row.consensus = parse_real(fields[4]);
    row.gap = parse_real(fields[5]);
    row.wallclock_s = parse_real(fields[6]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace adapd
