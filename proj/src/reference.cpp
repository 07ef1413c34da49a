#include "adapd/reference.hpp"

#include <istream>
#include <sstream>

#include "adapd/io_util.hpp"

namespace adapd {

PrimalDualPoint ReferenceSolution::saddle_point() const {
  const std::size_t big_n = num_agents();
  PrimalDualPoint p;
  p.x = x_star.replicate(static_cast<Eigen::Index>(big_n), 1);
  p.y = y_star;
  p.lambda = lambda_star;
  return p;
}

std::string ReferenceSolution::serialize() const {
  std::ostringstream out;
  out << "ADAPD-REF v1\n";
  out << "key " << hex64(key) << '\n';
  out << "method " << method << '\n';
  out << "iterations " << iterations << '\n';
  out << "tolerance " << format_double(tolerance) << '\n';
  out << "primal_feasibility " << format_double(primal_feasibility) << '\n';
  out << "stationarity " << format_double(stationarity) << '\n';
  out << "complementarity " << format_double(complementarity) << '\n';
  out << "consensus_residual " << format_double(consensus_residual) << '\n';
  out << "phi_star " << format_double(phi_star) << '\n';
  out << "x_star " << x_star.size() << ' ' << format_vector(x_star) << '\n';
  out << "y_star " << y_star.size() << ' ' << format_vector(y_star) << '\n';
  out << "lambda_star " << lambda_star.size() << ' ' << format_vector(lambda_star) << '\n';
  out << "end\n";
  return out.str();
}

ReferenceSolution ReferenceSolution::deserialize(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != "ADAPD-REF v1") {
    throw std::invalid_argument("reference file: missing 'ADAPD-REF v1' header");
  }
  TokenReader r(in, "reference file");
  ReferenceSolution ref;
  r.expect("key");
  const std::string key = r.next();
  try {
    ref.key = std::stoull(key, nullptr, 16);
  } catch (const std::exception&) {
    r.fail("bad key '" + key + "'");
  }
  r.expect("method");
  ref.method = r.next();
  r.expect("iterations");
  ref.iterations = static_cast<std::int64_t>(r.next_uint());
  r.expect("tolerance");
  ref.tolerance = r.next_double();
  r.expect("primal_feasibility");
  ref.primal_feasibility = r.next_double();
  r.expect("stationarity");
  ref.stationarity = r.next_double();
  r.expect("complementarity");
  ref.complementarity = r.next_double();
  r.expect("consensus_residual");
  ref.consensus_residual = r.next_double();
  r.expect("phi_star");
  ref.phi_star = r.next_double();
  r.expect("x_star");
  ref.x_star = r.next_vector(r.next_uint());
  r.expect("y_star");
  ref.y_star = r.next_vector(r.next_uint());
  r.expect("lambda_star");
  ref.lambda_star = r.next_vector(r.next_uint());
  r.expect("end");
  return ref;
}

}  // namespace adapd
