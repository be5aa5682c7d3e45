#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fkt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Shortest decimal form that parses back to the same bits. All text
/// serialization in the project goes through this, which is what makes
/// write/read round-trips and byte-identical reruns possible.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

inline bool parse_int(std::string_view text, long& out) {
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

/// Runtime failure inside the pipeline. `stage()` names the component that
/// raised it so the CLI can report which part of a run failed.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace fkt
