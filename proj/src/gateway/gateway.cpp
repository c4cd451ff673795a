#include "taskalloc/gateway/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

namespace taskalloc::gateway {
namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

ModelBinding ModelBinding::from_json(const nlohmann::json& j) {
  ModelBinding b;
  b.model_id = j.at("model_id").get<std::string>();
  b.endpoint_url = j.value("endpoint_url", "");
  b.auth_env_var = j.value("auth_env_var", "");
  b.max_retries = j.value("max_retries", 2);
  b.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60'000));
  if (b.model_id.empty()) throw GatewayError("binding needs a model_id");
  if (b.max_retries < 0) throw GatewayError("max_retries must be >= 0");
  return b;
}

nlohmann::json ModelBinding::to_json() const {
  return {{"model_id", model_id},
          {"endpoint_url", endpoint_url},
          {"auth_env_var", auth_env_var},
          {"max_retries", max_retries},
          {"timeout_ms", timeout.count()}};
}

std::string request_body(const std::string& model_id, const std::vector<ChatMessage>& messages,
                         const Decoding& decoding) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  const nlohmann::json body{{"model", model_id},
                            {"messages", std::move(msgs)},
                            {"temperature", decoding.temperature},
                            {"max_tokens", decoding.max_tokens}};
  return body.dump();
}

NormalizedReply normalize_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw MalformedResponse("response is not JSON");
  }
  if (!j.is_object()) throw MalformedResponse("response is not a JSON object");
  NormalizedReply r;
  if (j.contains("text") && j["text"].is_string()) {
    r.text = j["text"].get<std::string>();
  } else if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty() &&
             j["choices"][0].contains("message") && j["choices"][0]["message"].contains("content") &&
             j["choices"][0]["message"]["content"].is_string()) {
    r.text = j["choices"][0]["message"]["content"].get<std::string>();
  } else if (j.contains("content") && j["content"].is_array() && !j["content"].empty() &&
             j["content"][0].contains("text") && j["content"][0]["text"].is_string()) {
    r.text = j["content"][0]["text"].get<std::string>();
  } else {
    throw MalformedResponse("response has no text field");
  }
  if (!j.contains("usage") || !j["usage"].is_object()) throw MalformedResponse("response has no usage");
  const auto& u = j["usage"];
  auto pick = [&](const char* a, const char* b) -> std::int64_t {
    for (const char* key : {a, b}) {
      if (u.contains(key) && u[key].is_number_integer()) {
        const auto v = u[key].get<std::int64_t>();
        if (v < 0) throw MalformedResponse(std::string("negative ") + key);
        return v;
      }
    }
    throw MalformedResponse(std::string("usage lacks ") + a);
  };
  r.tokens_in = pick("input_tokens", "prompt_tokens");
  r.tokens_out = pick("output_tokens", "completion_tokens");
  return r;
}

// MockTransport --------------------------------------------------------------

MockTransport::MockTransport(std::vector<MockEntry> script) : script_(script.begin(), script.end()) {}

TransportResponse MockTransport::post(const TransportRequest& request, std::chrono::milliseconds) {
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  if (script_.empty()) throw ScriptExhausted("mock script exhausted after " + std::to_string(requests_.size() - 1) +
                                             " calls");
  const MockEntry e = script_.front();
  script_.pop_front();
  switch (e.kind) {
    case MockEntry::Kind::Reply: {
      const nlohmann::json body{{"text", e.text},
                                {"usage", {{"input_tokens", e.tokens_in}, {"output_tokens", e.tokens_out}}}};
      return {200, body.dump()};
    }
    case MockEntry::Kind::Fail: throw TransportError("scripted transport failure");
    case MockEntry::Kind::Malformed: return {200, e.raw_body};
    case MockEntry::Kind::Status: return {e.status, e.raw_body};
  }
  throw TransportError("unreachable");
}

void MockTransport::push(MockEntry e) {
  std::lock_guard lock(mu_);
  script_.push_back(std::move(e));
}

std::vector<TransportRequest> MockTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t MockTransport::remaining() const {
  std::lock_guard lock(mu_);
  return script_.size();
}

// Recording and replay -------------------------------------------------------

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {}

TransportResponse RecordingTransport::post(const TransportRequest& request, std::chrono::milliseconds timeout) {
  const auto resp = inner_->post(request, timeout);
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  out << nlohmann::json{{"request", request.body}, {"status", resp.status}, {"response", resp.body}}.dump() << '\n';
  return resp;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GatewayError("cannot open recorded session " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      by_body_[j.at("request").get<std::string>()].push_back(
          {j.value("status", 200), j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError("recorded session line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

TransportResponse ReplayTransport::post(const TransportRequest& request, std::chrono::milliseconds) {
  std::lock_guard lock(mu_);
  auto it = by_body_.find(request.body);
  if (it == by_body_.end() || it->second.empty()) {
    throw ScriptExhausted("no recorded response for this request body");
  }
  auto resp = it->second.front();
  it->second.pop_front();
  return resp;
}

// GatewayClient --------------------------------------------------------------

GatewayClient::GatewayClient(std::shared_ptr<Transport> transport, Sleeper sleeper,
                             std::chrono::milliseconds backoff_base)
    : transport_(std::move(transport)), sleeper_(std::move(sleeper)), backoff_base_(backoff_base) {
  if (!transport_) throw GatewayError("gateway needs a transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

CompletionResult GatewayClient::complete(const ModelBinding& binding, const std::vector<ChatMessage>& messages,
                                         const Decoding& decoding) {
  if (binding.max_retries < 0) throw GatewayError("max_retries must be >= 0");
  TransportRequest req;
  req.url = binding.endpoint_url;
  req.headers["Content-Type"] = "application/json";
  if (!binding.auth_env_var.empty()) {
    const char* secret = std::getenv(binding.auth_env_var.c_str());
    if (!secret || !*secret) throw AuthMissing("environment variable " + binding.auth_env_var + " is not set");
    req.headers["Authorization"] = std::string("Bearer ") + secret;
  }
  req.body = request_body(binding.model_id, messages, decoding);

  std::string last_error;
  const int attempts = 1 + binding.max_retries;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) sleeper_(backoff_base_ * (1LL << std::min(attempt - 2, 20)));
    const auto start = std::chrono::steady_clock::now();
    TransportResponse resp;
    try {
      resp = transport_->post(req, binding.timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (resp.status < 200 || resp.status >= 300) {
      const auto msg = "HTTP " + std::to_string(resp.status) + " from " + binding.model_id;
      if (transient_status(resp.status)) {
        last_error = msg;
        continue;
      }
      throw HttpError(resp.status, msg);
    }
    const auto reply = normalize_response(resp.body);
    CompletionResult r;
    r.text = reply.text;
    r.tokens_in = reply.tokens_in;
    r.tokens_out = reply.tokens_out;
    r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    r.attempt = attempt;
    return r;
  }
  throw RetriesExhausted(binding.model_id + ": " + std::to_string(attempts) + " attempts failed; last: " +
                         last_error);
}

}  // namespace taskalloc::gateway
