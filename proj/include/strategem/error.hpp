#ifndef STRATEGEM_ERROR_HPP
#define STRATEGEM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace strategem {

/// Process exit codes used by the CLI.
enum class ExitCode : int {
  Success = 0,
  Validation = 2,
  Respondent = 3,
  Acceptance = 4,
};

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::Validation; }
};

/// Malformed input, schema violation, or broken precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The respondent could not produce an answer (transport, auth, rate limit).
class RespondentError : public Error {
 public:
  enum class Kind { Transport, RateLimited, Auth, Parse };

  RespondentError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }
  bool retryable() const noexcept {
    return kind_ == Kind::Transport || kind_ == Kind::RateLimited;
  }
  ExitCode exit_code() const noexcept override { return ExitCode::Respondent; }

 private:
  Kind kind_;
};

inline const char* to_string(RespondentError::Kind kind) {
  switch (kind) {
    case RespondentError::Kind::Transport: return "transport";
    case RespondentError::Kind::RateLimited: return "rate_limited";
    case RespondentError::Kind::Auth: return "auth";
    case RespondentError::Kind::Parse: return "parse";
  }
  return "unknown";
}

}  // namespace strategem

#endif  // STRATEGEM_ERROR_HPP
