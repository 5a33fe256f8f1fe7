#ifndef DTUQ_ERROR_HPP
#define DTUQ_ERROR_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace dtuq {

/// Bad user input: malformed config, missing file, invalid combination of
/// settings. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a trustworthy answer (divergent
/// MLE, zero-likelihood proposal, quadrature failure, ...). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-fatal messages collected along a computation.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  bool empty() const noexcept { return warnings.empty(); }
};

}  // namespace dtuq

#endif  // DTUQ_ERROR_HPP
