#pragma once

#include <stdexcept>
#include <string>

namespace qcorr {

// Out-of-range or inconsistent input parameter.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// A quantum state that cannot be realised (e.g. non-PSD covariance).
class StateError : public std::domain_error {
 public:
  explicit StateError(const std::string& what) : std::domain_error(what) {}
};

// Least-squares fit failed to converge or the data cannot constrain it.
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qcorr
