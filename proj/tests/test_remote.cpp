#include <atomic>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/oracle.hpp"
#include "suffixrl/remote_oracle.hpp"

using namespace suffixrl;

namespace {

// Minimal in-process scoring endpoint. Each test swaps in a handler; the
// request counter observes retry behavior.
struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};
  std::function<void(const httplib::Request&, httplib::Response&)> handler;

  StubServer() {
    server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      requests.fetch_add(1);
      handler(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) throw std::runtime_error("stub server: could not bind a port");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  void respond_with(std::vector<std::string> tokens, std::vector<double> logprobs) {
    handler = [tokens = std::move(tokens), logprobs = std::move(logprobs)](
                  const httplib::Request&, httplib::Response& res) {
      nlohmann::json j{{"tokens", tokens}, {"token_logprobs", logprobs}};
      res.set_content(j.dump(), "application/json");
    };
  }

  void respond_raw(int status, std::string body) {
    handler = [status, body = std::move(body)](const httplib::Request&,
                                               httplib::Response& res) {
      res.status = status;
      res.set_content(body, "application/json");
    };
  }
};

RemoteOracle make_client(const StubServer& stub, int retries = 0) {
  RemoteOracleConfig cfg;
  cfg.base_url = stub.url();
  cfg.timeout_ms = 2000;
  cfg.retries = retries;
  return RemoteOracle(cfg);
}

}  // namespace

TEST_SUITE("remote_oracle") {

TEST_CASE("happy path parses tokens and logprobs") {
  StubServer stub;
  nlohmann::json seen;
  stub.handler = [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    nlohmann::json j{{"tokens", {" y", "es"}}, {"token_logprobs", {-0.1, -0.2}}};
    res.set_content(j.dump(), "application/json");
  };
  RemoteOracle oracle = make_client(stub);
  CHECK(oracle.info().name == "remote(" + stub.url() + ")");
  CHECK(oracle.info().deterministic);

  auto scores = oracle.score_continuation("Some prompt: ", " yes");
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].token == " y");
  CHECK(scores[1].token == "es");
  CHECK(scores[0].logprob == doctest::Approx(-0.1));
  CHECK(scores[1].logprob == doctest::Approx(-0.2));
  CHECK(stub.requests.load() == 1);
  // The wire request carries exactly the two documented fields.
  CHECK(seen.at("prompt") == "Some prompt: ");
  CHECK(seen.at("continuation") == " yes");
  CHECK(seen.size() == 2);
}

TEST_CASE("malformed responses raise protocol errors") {
  StubServer stub;
  RemoteOracle oracle = make_client(stub);

  stub.respond_raw(200, "this is not json");
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);

  stub.respond_raw(200, R"({"tokens": ["yes"]})");
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);

  stub.respond_raw(200, R"({"tokens": "yes", "token_logprobs": [-1.0]})");
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);

  stub.respond_with({"y", "es"}, {-0.1});
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);

  stub.respond_with({}, {});
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);

  stub.respond_raw(200, R"({"tokens": [7], "token_logprobs": [-1.0]})");
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);

  stub.respond_raw(200, R"({"tokens": ["yes"], "token_logprobs": [null]})");
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);
}

TEST_CASE("non-finite logprobs are rejected without partial results") {
  StubServer stub;
  stub.respond_raw(200, R"({"tokens": ["yes"], "token_logprobs": [1e999]})");
  RemoteOracle oracle = make_client(stub);
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);
}

TEST_CASE("tokens must concatenate to the continuation") {
  StubServer stub;
  stub.respond_with({"y", "e"}, {-0.1, -0.1});
  RemoteOracle oracle = make_client(stub);
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);
}

TEST_CASE("4xx statuses fail fast as protocol errors") {
  StubServer stub;
  stub.respond_raw(404, "{}");
  RemoteOracle oracle = make_client(stub, 3);
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleProtocolError);
  CHECK(stub.requests.load() == 1);
}

TEST_CASE("persistent 5xx exhausts retries then reports unavailable") {
  StubServer stub;
  stub.respond_raw(500, "{}");
  RemoteOracle oracle = make_client(stub, 2);
  CHECK_THROWS_AS(oracle.score_continuation("p", "yes"), OracleUnavailableError);
  CHECK(stub.requests.load() == 3);
}

TEST_CASE("transient 5xx recovers within the retry budget") {
  StubServer stub;
  std::atomic<int> failures{1};
  stub.handler = [&](const httplib::Request&, httplib::Response& res) {
    if (failures.fetch_sub(1) > 0) {
      res.status = 503;
      return;
    }
    nlohmann::json j{{"tokens", {"yes"}}, {"token_logprobs", {-0.5}}};
    res.set_content(j.dump(), "application/json");
  };
  RemoteOracle oracle = make_client(stub, 2);
  auto scores = oracle.score_continuation("p", "yes");
  REQUIRE(scores.size() == 1);
  CHECK(scores[0].logprob == doctest::Approx(-0.5));
  CHECK(stub.requests.load() == 2);
}

TEST_CASE("unreachable endpoints report unavailable") {
  int free_port = 0;
  {
    StubServer probe;
    free_port = probe.port;
  }
  RemoteOracleConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(free_port);
  cfg.timeout_ms = 500;
  cfg.retries = 1;
  RemoteOracle oracle(cfg);
  CHECK_THROWS_WITH_AS(oracle.score_continuation("p", "yes"),
                       doctest::Contains("2 attempts"), OracleUnavailableError);
}

TEST_CASE("input guards run before any network traffic") {
  RemoteOracleConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  RemoteOracle oracle(cfg);
  CHECK_THROWS_AS(oracle.score_continuation("", "yes"), std::invalid_argument);
  CHECK_THROWS_AS(oracle.score_continuation("p", ""), std::invalid_argument);
}

TEST_CASE("config validation") {
  RemoteOracleConfig cfg;
  cfg.base_url = "";
  CHECK_THROWS_AS(RemoteOracle{cfg}, std::invalid_argument);
  cfg.base_url = "http://127.0.0.1:1";
  cfg.timeout_ms = 0;
  CHECK_THROWS_AS(RemoteOracle{cfg}, std::invalid_argument);
  cfg.timeout_ms = 1000;
  cfg.retries = -1;
  CHECK_THROWS_AS(RemoteOracle{cfg}, std::invalid_argument);
  cfg.retries = 0;
  cfg.deterministic = false;
  RemoteOracle oracle(cfg);
  CHECK_FALSE(oracle.info().deterministic);
}

}  // TEST_SUITE
