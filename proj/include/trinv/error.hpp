#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace trinv {

enum class ErrorKind {
  Input,
  UndefinedMetric,
  BackendUnavailable,
  Transient,  // retryable transport / 5xx failure; never escapes with_retries
  FixtureMiss,
  Protocol,
  DegenerateInput,
  Configuration,
  Capability,
  Calibration,
  Schema,
  DegenerateTrace,
  DegenerateReconstruction,
  Decision,
  EmptyTable,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised once retries are exhausted; remembers how many attempts were made.
class BackendUnavailable : public Error {
 public:
  BackendUnavailable(const std::string& last_cause, int attempts)
      : Error(ErrorKind::BackendUnavailable,
              "backend unavailable after " + std::to_string(attempts) +
                  " attempt(s): " + last_cause),
        attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// A pipeline stage failed hard; `stage()` names it (e.g. "generate_trace").
class DecisionError : public Error {
 public:
  DecisionError(std::string stage, ErrorKind cause, const std::string& what)
      : Error(ErrorKind::Decision, stage + ": " + what),
        stage_(std::move(stage)),
        cause_(cause) {}

  const std::string& stage() const noexcept { return stage_; }
  ErrorKind cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  ErrorKind cause_;
};

}  // namespace trinv
