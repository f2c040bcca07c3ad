#pragma once

#include <stdexcept>
#include <string>

namespace wpc {

// Raised when an average over the fading distribution is requested with a
// fading order m <= 2: the delay integrands have a non-integrable endpoint
// singularity there and no finite answer exists.
class convergence_guard_error : public std::runtime_error {
 public:
  explicit convergence_guard_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Requested quadrature tolerance could not be met within the panel budget.
class accuracy_error : public std::runtime_error {
 public:
  explicit accuracy_error(const std::string& what) : std::runtime_error(what) {}
};

// A bracketing search (multiplier calibration, P5 outer solve) found no sign
// change within its expansion limits.
class bracket_error : public std::runtime_error {
 public:
  explicit bracket_error(const std::string& what) : std::runtime_error(what) {}
};

// The P4 power-coefficient equation had no root in the scanned range.
class root_not_found_error : public std::runtime_error {
 public:
  explicit root_not_found_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Damped Newton on the multiuser stationarity system failed to converge.
class newton_divergence_error : public std::runtime_error {
 public:
  explicit newton_divergence_error(const std::string& what)
      : std::runtime_error(what) {}
};

// The sub-gradient calibration loop exhausted its iteration budget.
class nonconvergence_error : public std::runtime_error {
 public:
  explicit nonconvergence_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Too many per-sample solver failures inside a Monte-Carlo run.
class simulation_error : public std::runtime_error {
 public:
  explicit simulation_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace wpc
