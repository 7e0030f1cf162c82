#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "suffixrl/oracle.hpp"

namespace suffixrl {

struct RemoteOracleConfig {
  std::string base_url;        // e.g. "http://127.0.0.1:8080"
  int timeout_ms = 5000;
  int retries = 2;             // additional attempts after the first
  bool deterministic = true;   // trusted declaration about the endpoint
};

// HTTP client for the minimal scoring endpoint:
//
//   POST /v1/score
//   request  {"prompt": string, "continuation": string}
//   response {"tokens": [string], "token_logprobs": [float]}
//
// Response tokens must concatenate back to the continuation. Transport
// failures and 5xx responses are retried up to config.retries extra attempts
// and then raise OracleUnavailableError; 4xx responses, malformed bodies,
// token/logprob mismatches, and non-finite values raise OracleProtocolError
// without producing a partial result.
class RemoteOracle : public ScoringOracle {
 public:
  explicit RemoteOracle(RemoteOracleConfig config);
  ~RemoteOracle() override;

  const OracleInfo& info() const override { return info_; }
  std::vector<TokenScore> score_continuation(const std::string& prompt,
                                             const std::string& continuation) const override;

  const RemoteOracleConfig& config() const { return config_; }

 private:
  struct Impl;
  RemoteOracleConfig config_;
  OracleInfo info_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace suffixrl
