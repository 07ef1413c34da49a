// Small text-format helpers shared by the file containers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace adapd {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Space-separated shortest round-trip decimals.
std::string format_vector(const Eigen::VectorXd& v);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Whitespace tokenizer over a stream with keyword checks.
class TokenReader {
 public:
  TokenReader(std::istream& in, std::string context);

  std::string next();
  void expect(std::string_view keyword);
  double next_double();
  std::uint64_t next_uint();
  Eigen::VectorXd next_vector(std::size_t size);
  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::istream& in_;
  std::string context_;
  std::size_t count_ = 0;
};

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace adapd
