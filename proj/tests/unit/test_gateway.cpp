#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "taskalloc/gateway/gateway.hpp"

using namespace taskalloc::gateway;
using std::chrono::milliseconds;

namespace {

ModelBinding mock_binding(int retries = 2) { return {"gpt-4o-mini", "mock://", "", retries, milliseconds(1000)}; }

struct Recorder {
  std::vector<milliseconds> sleeps;
  Sleeper sleeper() {
    return [this](milliseconds d) { sleeps.push_back(d); };
  }
};

const std::vector<ChatMessage> kPrompt = {{"system", "You control agent0."}, {"user", "State: ..."}};

}  // namespace

TEST_CASE("mock passthrough returns the exact reply and usage") {
  auto mock = std::make_shared<MockTransport>(std::vector{MockEntry::reply("noop(agent0)", 120, 8)});
  GatewayClient client(mock);
  const auto r = client.complete(mock_binding(), kPrompt);
  CHECK(r.text == "noop(agent0)");
  CHECK(r.tokens_in == 120);
  CHECK(r.tokens_out == 8);
  CHECK(r.attempt == 1);
}

TEST_CASE("retries transient failures with exponential backoff") {
  auto mock = std::make_shared<MockTransport>(
      std::vector{MockEntry::fail(), MockEntry::http_status(503), MockEntry::reply("ok", 1, 1)});
  Recorder rec;
  GatewayClient client(mock, rec.sleeper(), milliseconds(100));
  const auto r = client.complete(mock_binding(3), kPrompt);
  CHECK(r.attempt == 3);
  CHECK(rec.sleeps == std::vector<milliseconds>{milliseconds(100), milliseconds(200)});
}

TEST_CASE("retry budget exhaustion") {
  auto mock = std::make_shared<MockTransport>(std::vector{MockEntry::fail(), MockEntry::fail(), MockEntry::fail()});
  Recorder rec;
  GatewayClient client(mock, rec.sleeper());
  CHECK_THROWS_AS(client.complete(mock_binding(2), kPrompt), RetriesExhausted);
  CHECK(mock->requests().size() == 3);
  CHECK(mock->remaining() == 0);
}

TEST_CASE("non-transient errors are not retried") {
  auto mock = std::make_shared<MockTransport>(std::vector{MockEntry::http_status(400), MockEntry::reply("x", 1, 1)});
  GatewayClient client(mock, [](milliseconds) {});
  CHECK_THROWS_AS(client.complete(mock_binding(), kPrompt), HttpError);
  CHECK(mock->remaining() == 1);

  auto mal = std::make_shared<MockTransport>(std::vector{MockEntry::malformed()});
  GatewayClient c2(mal, [](milliseconds) {});
  CHECK_THROWS_AS(c2.complete(mock_binding(), kPrompt), MalformedResponse);
}

TEST_CASE("script exhaustion") {
  auto mock = std::make_shared<MockTransport>();
  GatewayClient client(mock, [](milliseconds) {});
  CHECK_THROWS_AS(client.complete(mock_binding(), kPrompt), ScriptExhausted);

  auto three = std::make_shared<MockTransport>(
      std::vector{MockEntry::reply("a", 1, 1), MockEntry::reply("b", 2, 2), MockEntry::reply("c", 3, 3)});
  GatewayClient c3(three);
  CHECK(c3.complete(mock_binding(), kPrompt).text == "a");
  CHECK(c3.complete(mock_binding(), kPrompt).text == "b");
  CHECK(c3.complete(mock_binding(), kPrompt).text == "c");
}

TEST_CASE("request body carries greedy decoding and is byte-stable") {
  auto mock = std::make_shared<MockTransport>(std::vector{MockEntry::reply("a", 1, 1), MockEntry::reply("a", 1, 1)});
  GatewayClient client(mock);
  client.complete(mock_binding(), kPrompt, Decoding{0.0, 2048});
  client.complete(mock_binding(), kPrompt, Decoding{0.0, 2048});
  const auto reqs = mock->requests();
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[0].body == reqs[1].body);
  const auto j = nlohmann::json::parse(reqs[0].body);
  CHECK(j.at("temperature").get<double>() == 0.0);
  CHECK(j.at("max_tokens").get<int>() == 2048);
  CHECK(j.at("model") == "gpt-4o-mini");
  CHECK(j.at("messages").size() == 2);
  CHECK(j.at("messages")[0].at("role") == "system");
  CHECK(reqs[0].body == request_body("gpt-4o-mini", kPrompt, Decoding{}));
}

TEST_CASE("auth comes from the named environment variable") {
  auto mock = std::make_shared<MockTransport>(std::vector{MockEntry::reply("a", 1, 1)});
  GatewayClient client(mock);
  auto b = mock_binding();
  b.auth_env_var = "TASKALLOC_TEST_SECRET_UNSET";
  ::unsetenv(b.auth_env_var.c_str());
  CHECK_THROWS_AS(client.complete(b, kPrompt), AuthMissing);
  ::setenv(b.auth_env_var.c_str(), "s3cret", 1);
  client.complete(b, kPrompt);
  CHECK(mock->requests().back().headers.at("Authorization") == "Bearer s3cret");
  ::unsetenv(b.auth_env_var.c_str());
}

TEST_CASE("provider response variants normalize") {
  const auto a = normalize_response(R"({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":5,"completion_tokens":2}})");
  CHECK(a.text == "hi");
  CHECK(a.tokens_in == 5);
  CHECK(a.tokens_out == 2);
  const auto b = normalize_response(R"({"content":[{"type":"text","text":"yo"}],"usage":{"input_tokens":9,"output_tokens":4}})");
  CHECK(b.text == "yo");
  CHECK(b.tokens_out == 4);
  CHECK_THROWS_AS(normalize_response("not json"), MalformedResponse);
  CHECK_THROWS_AS(normalize_response(R"({"text":"x"})"), MalformedResponse);
  CHECK_THROWS_AS(normalize_response(R"({"usage":{"input_tokens":1,"output_tokens":1}})"), MalformedResponse);
}

TEST_CASE("binding json") {
  const auto b = ModelBinding::from_json(nlohmann::json::parse(
      R"({"model_id":"claude-3.7","endpoint_url":"https://x/v1","auth_env_var":"K","max_retries":4,"timeout_ms":500})"));
  CHECK(b.max_retries == 4);
  CHECK(b.timeout == milliseconds(500));
  CHECK(ModelBinding::from_json(b.to_json()).to_json() == b.to_json());
  CHECK_THROWS_AS(ModelBinding::from_json(nlohmann::json::parse(R"({"model_id":"x","max_retries":-1})")),
                  GatewayError);
}

TEST_CASE("record then replay a session") {
  const auto path = std::filesystem::temp_directory_path() / "taskalloc_gateway_session.jsonl";
  std::filesystem::remove(path);
  auto mock = std::make_shared<MockTransport>(std::vector{MockEntry::reply("first", 10, 1), MockEntry::reply("second", 11, 2)});
  GatewayClient rec(std::make_shared<RecordingTransport>(mock, path));
  rec.complete(mock_binding(), kPrompt);
  rec.complete(mock_binding(), {{"user", "other"}});

  GatewayClient play(std::make_shared<ReplayTransport>(path));
  CHECK(play.complete(mock_binding(), {{"user", "other"}}).text == "second");
  const auto r = play.complete(mock_binding(), kPrompt);
  CHECK(r.text == "first");
  CHECK(r.tokens_in == 10);
  CHECK_THROWS_AS(play.complete(mock_binding(), kPrompt), ScriptExhausted);
  std::filesystem::remove(path);
}

TEST_CASE("http transport against a local server") {
  httplib::Server server;
  std::string seen_body, seen_auth;
  int calls = 0;
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    if (calls == 1) {
      res.status = 503;
      return;
    }
    res.set_content(R"J({"choices":[{"message":{"content":"goto(agent0, storage0)"}}],"usage":{"prompt_tokens":42,"completion_tokens":7}})J",
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ModelBinding b{"gpt-4o", "http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "TASKALLOC_TEST_HTTP_KEY", 2,
                 milliseconds(5000)};
  ::setenv("TASKALLOC_TEST_HTTP_KEY", "k", 1);
  GatewayClient client(std::make_shared<HttpTransport>(), [](milliseconds) {});
  const auto r = client.complete(b, kPrompt);
  server.stop();
  t.join();
  ::unsetenv("TASKALLOC_TEST_HTTP_KEY");

  CHECK(r.text == "goto(agent0, storage0)");
  CHECK(r.tokens_in == 42);
  CHECK(r.tokens_out == 7);
  CHECK(r.attempt == 2);
  CHECK(seen_body == request_body("gpt-4o", kPrompt, Decoding{}));
  CHECK(seen_auth == "Bearer k");
}

TEST_CASE("http transport surfaces connection failures as retryable") {
  ModelBinding b{"gpt-4o", "http://127.0.0.1:1/v1/chat", "", 1, milliseconds(300)};
  Recorder rec;
  GatewayClient client(std::make_shared<HttpTransport>(), rec.sleeper());
  CHECK_THROWS_AS(client.complete(b, kPrompt), RetriesExhausted);
  CHECK(rec.sleeps.size() == 1);
}
