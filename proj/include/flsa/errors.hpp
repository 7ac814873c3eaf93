#pragma once

#include <stdexcept>
#include <string>

namespace flsa {

// Error taxonomy mirrored by the CLI exit codes:
//   InputError -> 1, CertificateError/ConvergenceError -> 2, ConfigError -> 3.

class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

class DegenerateVarianceError : public InputError {
 public:
  DegenerateVarianceError(const std::string& what, int segment)
      : InputError(what), segment_index(segment) {}
  int segment_index;
};

class CertificateError : public std::runtime_error {
 public:
  explicit CertificateError(const std::string& what) : std::runtime_error(what) {}
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual(residual) {}
  double residual;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flsa
