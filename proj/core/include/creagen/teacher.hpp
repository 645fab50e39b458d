#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <string>

namespace creagen {

struct DecodeOptions {
  double temperature = 0.0;
  int max_tokens = 256;
};

class TeacherError : public std::runtime_error {
 public:
  TeacherError(const std::string& what, bool retriable, int attempts = 1)
      : std::runtime_error(what), retriable_(retriable), attempts_(attempts) {}
  bool retriable() const { return retriable_; }
  int attempts() const { return attempts_; }

 private:
  bool retriable_;
  int attempts_;
};

// Text-completion client over which the dataset pipeline and the offline
// judge run. Implementations must be safe for concurrent complete() calls.
class TeacherClient {
 public:
  virtual ~TeacherClient() = default;
  virtual std::string complete(const std::string& prompt,
                               const DecodeOptions& opts) = 0;
  virtual std::string model_name() const = 0;
};

// Retries retriable failures with linear backoff; rethrows a TeacherError
// carrying the attempt count once exhausted.
std::string complete_with_retry(TeacherClient& client,
                                const std::string& prompt,
                                const DecodeOptions& opts,
                                int max_attempts = 3, int backoff_ms = 100);

// Deterministic stand-in for the teacher/judge model: a pure function of
// the prompt. Understands the default prompt library's four formats.
//  - profiling: summarizes history words into the three interest lines
//  - title generation: grounded title from the ad text plus one interest
//    word; a hash-determined fraction gets a fabricated number injected
//  - hallucination filter: flags digit runs absent from the ad text,
//    otherwise returns the {} pass sentinel
//  - judging: prefers the title with more interest/query word overlap,
//    first-listed on ties (a deliberate order bias the dual-order GSB
//    protocol must neutralize)
class MockTeacherClient : public TeacherClient {
 public:
  struct Config {
    double hallucination_rate = 0.25;
    int transient_failures = 0;  // first N calls fail retriably
    std::string model = "mock-teacher";
  };

  MockTeacherClient() : MockTeacherClient(Config{}) {}
  explicit MockTeacherClient(const Config& cfg) : cfg_(cfg) {}

  std::string complete(const std::string& prompt,
                       const DecodeOptions& opts) override;
  std::string model_name() const override { return cfg_.model; }

 private:
  Config cfg_;
  std::atomic<int> calls_{0};
};

struct HttpTeacherConfig {
  std::string base_url = "http://localhost:8089";
  std::string path = "/v1/complete";
  std::string model = "teacher";
  std::string auth_token_env;  // name of the env var holding a bearer token
  int timeout_ms = 10000;
};

// POSTs {model, prompt, temperature, max_tokens} as JSON and expects
// {"text": ...}. Connection failures and 5xx are retriable; other
// non-success statuses are not.
class HttpTeacherClient : public TeacherClient {
 public:
  explicit HttpTeacherClient(HttpTeacherConfig cfg) : cfg_(std::move(cfg)) {}
  std::string complete(const std::string& prompt,
                       const DecodeOptions& opts) override;
  std::string model_name() const override { return cfg_.model; }

 private:
  HttpTeacherConfig cfg_;
};

}  // namespace creagen
