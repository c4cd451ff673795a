#pragma once

// Chat-completion client. One wire shape for every provider:
//   POST {model, messages:[{role, content}], temperature, max_tokens}
// and a response carrying generated text plus provider-reported token usage.

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace taskalloc::gateway {

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class RetriesExhausted : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class AuthMissing : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class MalformedResponse : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class ScriptExhausted : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
/// Non-retryable HTTP status (4xx other than 408 and 429).
class HttpError : public GatewayError {
 public:
  HttpError(int status, const std::string& what) : GatewayError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};
/// Transient: connection failures, timeouts, 408/429/5xx. Retried by the client.
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

struct ModelBinding {
  std::string model_id;
  std::string endpoint_url;
  std::string auth_env_var;  // empty: no Authorization header
  int max_retries = 2;
  std::chrono::milliseconds timeout{60'000};

  /// {"model_id", "endpoint_url", "auth_env_var", "max_retries", "timeout_ms"}
  static ModelBinding from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ChatMessage {
  std::string role;  // system, user, assistant
  std::string content;
};

struct Decoding {
  double temperature = 0.0;
  int max_tokens = 2048;
};

struct CompletionResult {
  std::string text;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  std::chrono::milliseconds latency{0};
  int attempt = 1;  // 1-based attempt that succeeded
};

/// Byte-stable JSON request body.
std::string request_body(const std::string& model_id, const std::vector<ChatMessage>& messages,
                         const Decoding& decoding);

struct NormalizedReply {
  std::string text;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
};

/// Accepts {"text"}, {"choices":[{"message":{"content"}}]} or {"content":[{"text"}]}
/// with usage {input_tokens, output_tokens} or {prompt_tokens, completion_tokens}.
/// Throws MalformedResponse when text or usage is missing.
NormalizedReply normalize_response(const std::string& body);

struct TransportRequest {
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct TransportResponse {
  int status = 200;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError on connection failure or timeout.
  virtual TransportResponse post(const TransportRequest& request, std::chrono::milliseconds timeout) = 0;
};

/// Real HTTP(S) transport.
class HttpTransport : public Transport {
 public:
  TransportResponse post(const TransportRequest& request, std::chrono::milliseconds timeout) override;
};

/// One scripted outcome for MockTransport.
struct MockEntry {
  enum class Kind { Reply, Fail, Malformed, Status };
  Kind kind = Kind::Reply;
  std::string text;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  int status = 200;
  std::string raw_body;

  static MockEntry reply(std::string text, std::int64_t in, std::int64_t out) {
    return {Kind::Reply, std::move(text), in, out, 200, {}};
  }
  static MockEntry fail() { return {Kind::Fail, {}, 0, 0, 0, {}}; }
  static MockEntry malformed(std::string body = R"({"unexpected":true})") {
    return {Kind::Malformed, {}, 0, 0, 200, std::move(body)};
  }
  static MockEntry http_status(int status) { return {Kind::Status, {}, 0, 0, status, "{}"}; }
};

/// Consumes its script in call order; an exhausted script throws
/// ScriptExhausted. Safe for concurrent callers.
class MockTransport : public Transport {
 public:
  explicit MockTransport(std::vector<MockEntry> script = {});
  TransportResponse post(const TransportRequest& request, std::chrono::milliseconds timeout) override;
  void push(MockEntry e);
  std::vector<TransportRequest> requests() const;
  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::deque<MockEntry> script_;
  std::vector<TransportRequest> requests_;
};

/// Forwards to `inner` and appends {"request": body, "status", "response"} JSON
/// lines to `path`.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path path);
  TransportResponse post(const TransportRequest& request, std::chrono::milliseconds timeout) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::filesystem::path path_;
  std::mutex mu_;
};

/// Serves responses from a recorded session, matching by exact request body.
/// Identical bodies are answered in recording order.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& path);
  TransportResponse post(const TransportRequest& request, std::chrono::milliseconds timeout) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::deque<TransportResponse>> by_body_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class GatewayClient {
 public:
  /// `sleeper` defaults to std::this_thread::sleep_for.
  explicit GatewayClient(std::shared_ptr<Transport> transport, Sleeper sleeper = {},
                         std::chrono::milliseconds backoff_base = std::chrono::milliseconds(250));

  /// Retries transient failures up to binding.max_retries times with
  /// exponential backoff (base, 2*base, 4*base, ...).
  CompletionResult complete(const ModelBinding& binding, const std::vector<ChatMessage>& messages,
                            const Decoding& decoding = {});

  Transport& transport() { return *transport_; }

 private:
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::chrono::milliseconds backoff_base_;
};

}  // namespace taskalloc::gateway
