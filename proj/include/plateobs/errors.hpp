#pragma once

#include <stdexcept>
#include <string>

namespace plateobs {

// Each error class maps onto one C API status code (see plateobs.h).

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IterationLimitError : public std::runtime_error {
 public:
  IterationLimitError(const std::string& what, double last_residual, int iterations)
      : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const noexcept { return last_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

}  // namespace plateobs
