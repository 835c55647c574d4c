#pragma once

#include <stdexcept>
#include <string>

namespace mixcs {

// Invalid user-supplied configuration: bad prior parameters, malformed JSON,
// out-of-range alpha, unsupported method/prior combination.  CLI exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: non-convergent quadrature or root find, invalid bracket,
// loss of a required invariant during iteration.  CLI exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mixcs
