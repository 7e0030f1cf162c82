#include "suffixrl/remote_oracle.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"
#include "suffixrl/errors.hpp"

namespace suffixrl {

using nlohmann::json;

struct RemoteOracle::Impl {
  explicit Impl(const RemoteOracleConfig& cfg) : client(cfg.base_url) {
    client.set_connection_timeout(0, cfg.timeout_ms * 1000LL);
    client.set_read_timeout(0, cfg.timeout_ms * 1000LL);
    client.set_write_timeout(0, cfg.timeout_ms * 1000LL);
    client.set_keep_alive(true);
  }
  // One connection; concurrent callers take turns.
  mutable std::mutex mutex;
  mutable httplib::Client client;
};

RemoteOracle::RemoteOracle(RemoteOracleConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty())
    throw std::invalid_argument("RemoteOracle: base_url must be non-empty");
  if (config_.timeout_ms <= 0) throw std::invalid_argument("RemoteOracle: timeout_ms must be > 0");
  if (config_.retries < 0) throw std::invalid_argument("RemoteOracle: retries must be >= 0");
  info_.name = "remote(" + config_.base_url + ")";
  info_.deterministic = config_.deterministic;
  impl_ = std::make_unique<Impl>(config_);
}

RemoteOracle::~RemoteOracle() = default;

std::vector<TokenScore> RemoteOracle::score_continuation(const std::string& prompt,
                                                         const std::string& continuation) const {
  if (prompt.empty()) throw std::invalid_argument("score_continuation: empty prompt");
  if (continuation.empty()) throw std::invalid_argument("score_continuation: empty continuation");

  json request;
  request["prompt"] = prompt;
  request["continuation"] = continuation;
  const std::string body = request.dump();

  std::string last_error;
  httplib::Result result;
  {
    std::lock_guard lock(impl_->mutex);
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      result = impl_->client.Post("/v1/score", body, "application/json");
      if (!result) {
        last_error = "transport error: " + httplib::to_string(result.error());
        continue;
      }
      if (result->status >= 500) {
        last_error = "server error: HTTP " + std::to_string(result->status);
        continue;
      }
      break;
    }
  }
  if (!result || result->status >= 500)
    throw OracleUnavailableError("remote oracle unavailable after " +
                                 std::to_string(config_.retries + 1) + " attempts (" + last_error +
                                 ")");
  if (result->status < 200 || result->status >= 300)
    throw OracleProtocolError("remote oracle: HTTP " + std::to_string(result->status));

  json response;
  try {
    response = json::parse(result->body);
  } catch (const json::exception& e) {
    throw OracleProtocolError(std::string("remote oracle: malformed JSON response: ") + e.what());
  }
  if (!response.is_object() || !response.contains("tokens") ||
      !response.contains("token_logprobs") || !response["tokens"].is_array() ||
      !response["token_logprobs"].is_array())
    throw OracleProtocolError("remote oracle: response missing tokens/token_logprobs arrays");

  const auto& tokens = response["tokens"];
  const auto& logprobs = response["token_logprobs"];
  if (tokens.size() != logprobs.size())
    throw OracleProtocolError("remote oracle: tokens and token_logprobs differ in length");
  if (tokens.empty()) throw OracleProtocolError("remote oracle: empty token list");

  std::vector<TokenScore> out;
  out.reserve(tokens.size());
  std::string concat;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].is_string())
      throw OracleProtocolError("remote oracle: non-string token in response");
    if (!logprobs[i].is_number())
      throw OracleProtocolError("remote oracle: non-numeric logprob in response");
    const double lp = logprobs[i].get<double>();
    if (!std::isfinite(lp))
      throw OracleProtocolError("remote oracle: non-finite logprob in response");
    out.push_back(TokenScore{tokens[i].get<std::string>(), lp});
    concat += out.back().token;
  }
  if (concat != continuation)
    throw OracleProtocolError("remote oracle: tokens do not concatenate to the continuation");
  return out;
}

}  // namespace suffixrl
