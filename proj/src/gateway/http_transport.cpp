#include <regex>

#include <httplib.h>

#include "taskalloc/gateway/gateway.hpp"

namespace taskalloc::gateway {

TransportResponse HttpTransport::post(const TransportRequest& request, std::chrono::milliseconds timeout) {
  static const std::regex url_re(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(request.url, m, url_re)) throw GatewayError("unsupported endpoint url '" + request.url + "'");
  const std::string scheme = m[1];
  const std::string host = m[2];
  const std::string path = m[4].matched ? std::string(m[4]) : "/";
  const int port = m[3].matched ? std::stoi(m[3]) : (scheme == "https" ? 443 : 80);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw GatewayError("built without TLS support; cannot reach " + request.url);
#endif
  httplib::Client client(scheme + "://" + host + ":" + std::to_string(port));
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [k, v] : request.headers) {
    if (k == "Content-Type") {
      content_type = v;
    } else {
      headers.emplace(k, v);
    }
  }
  auto res = client.Post(path, headers, request.body, content_type);
  if (!res) throw TransportError("request to " + request.url + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

}  // namespace taskalloc::gateway
