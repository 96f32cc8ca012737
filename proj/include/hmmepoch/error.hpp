#pragma once

#include <stdexcept>
#include <string>

namespace hmmepoch {

/// Broad failure classes; the CLI maps each to its own exit code.
enum class ErrorCategory { usage, data, numerical };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, std::string kind, const std::string &message)
      : std::runtime_error(message), category_(category), kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  /// Short machine-readable tag, e.g. "invalid_input".
  const std::string &kind() const noexcept { return kind_; }

private:
  ErrorCategory category_;
  std::string kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string &msg) : Error(ErrorCategory::usage, "usage", msg) {}
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string &msg)
      : Error(ErrorCategory::data, "invalid_input", msg) {}
};

struct InsufficientData : Error {
  explicit InsufficientData(const std::string &msg)
      : Error(ErrorCategory::data, "insufficient_data", msg) {}
};

struct DecodeFailure : Error {
  DecodeFailure(const std::string &msg, std::size_t position)
      : Error(ErrorCategory::numerical, "decode_failure", msg), position_(position) {}
  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

struct DomainError : Error {
  explicit DomainError(const std::string &msg)
      : Error(ErrorCategory::numerical, "domain_error", msg) {}
};

struct DegenerateSplit : Error {
  explicit DegenerateSplit(const std::string &msg)
      : Error(ErrorCategory::numerical, "degenerate_split", msg) {}
};

struct FitError : Error {
  FitError(ErrorCategory category, const std::string &msg, std::size_t n_states)
      : Error(category, "fit_error", msg), n_states_(n_states) {}
  std::size_t n_states() const noexcept { return n_states_; }

private:
  std::size_t n_states_;
};

} // namespace hmmepoch
