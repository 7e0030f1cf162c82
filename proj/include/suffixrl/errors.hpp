#pragma once

#include <stdexcept>
#include <string>

namespace suffixrl {

// Transport-level oracle failure (connection refused, timeout). Retryable.
class OracleUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or non-finite oracle output. Not retryable.
class OracleProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value reached the training path; the offending update is dropped
// and counted, never applied.
class NanGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataLoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training stopped mid-run (oracle unavailable after retries). Carries the
// last iteration that completed so a caller can resume.
class TrainAbortedError : public std::runtime_error {
 public:
  TrainAbortedError(const std::string& msg, int last_completed)
      : std::runtime_error(msg), last_completed_iteration(last_completed) {}
  int last_completed_iteration;
};

}  // namespace suffixrl
