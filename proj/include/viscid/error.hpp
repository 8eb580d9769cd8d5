#ifndef VISCID_ERROR_HPP
#define VISCID_ERROR_HPP

#include <stdexcept>
#include <string>

namespace viscid {

/// Argument outside the mathematical domain of an operation (r < 0, t <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent or malformed configuration (bad grid, mollifier too narrow, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an analysis step does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation is not defined for the given flux kind.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Tabulated flux queried outside its sampled range.
class ExtrapolationError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Kernel tail or boundary leakage exceeds tolerance.
class DomainTooSmallError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time integrator produced NaN or a negative value beyond tolerance.
class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(const std::string& what, double time, std::size_t step, std::size_t cell)
      : std::runtime_error(what), time_(time), step_(step), cell_(cell) {}

  double time() const noexcept { return time_; }
  std::size_t step() const noexcept { return step_; }
  std::size_t cell() const noexcept { return cell_; }

 private:
  double time_;
  std::size_t step_;
  std::size_t cell_;
};

/// Picard iteration of the Duhamel solver failed to contract on a block.
class BlockSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output path cannot be created or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace viscid

#endif  // VISCID_ERROR_HPP
