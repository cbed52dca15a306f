#include "eventnav/backend.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"
#include "jsonl.hpp"

namespace eventnav {

using detail::json;

std::string prompt_hash(std::string_view prompt) { return hex64(fnv1a64(prompt)); }

void save_cassette(const Cassette& cassette, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (const auto& [hash, e] : cassette) {
    detail::write_line(out, json{{"prompt_hash", hash}, {"prompt", e.prompt}, {"response", e.response}});
  }
  detail::finish(out, path);
}

Cassette load_cassette(const std::filesystem::path& path) {
  Cassette c;
  detail::for_each_record(path, [&](std::size_t ln, const json& j) {
    CassetteEntry e{detail::field<std::string>(j, "prompt", ln), detail::field<std::string>(j, "response", ln)};
    const auto hash = detail::field<std::string>(j, "prompt_hash", ln);
    if (hash != prompt_hash(e.prompt)) throw FormatError(ln, "prompt_hash does not match prompt");
    c.emplace(hash, std::move(e));
  });
  return c;
}

std::string ReplayBackend::complete(const std::string& prompt) const {
  auto it = cassette_.find(prompt_hash(prompt));
  if (it == cassette_.end() || it->second.prompt != prompt) {
    throw Error(Errc::backend_error, "cassette has no response for prompt " + prompt_hash(prompt));
  }
  return it->second.response;
}

std::string RecordingBackend::complete(const std::string& prompt) const {
  std::string response = inner_.complete(prompt);
  std::lock_guard lock(mu_);
  recorded_.insert_or_assign(prompt_hash(prompt), CassetteEntry{prompt, response});
  return response;
}

Cassette RecordingBackend::cassette() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

RemoteSettings remote_settings_from_env() {
  RemoteSettings s;
  if (const char* url = std::getenv("BACKEND_URL")) s.endpoint = url;
  if (const char* key = std::getenv("BACKEND_KEY")) s.api_key = key;
  return s;
}

UrlParts split_url(std::string_view url) {
  const auto scheme = url.find("://");
  const std::size_t host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

std::string post_json(const std::string& url, const std::string& api_key, const std::string& body,
                      std::chrono::seconds timeout) {
  if (url.empty()) throw Error(Errc::backend_error, "no endpoint configured");
  const UrlParts parts = split_url(url);
  httplib::Client client(parts.base);
  if (!client.is_valid()) throw Error(Errc::backend_error, "invalid endpoint '" + url + "'");
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = client.Post(parts.path, headers, body, "application/json");
  if (!res) throw Error(Errc::backend_error, "transport: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::backend_error, "HTTP status " + std::to_string(res->status));
  return res->body;
}

RemoteBackend::RemoteBackend(RemoteSettings settings) : settings_(std::move(settings)) {
  if (settings_.endpoint.empty()) throw Error(Errc::config_error, "remote backend requires an endpoint");
}

std::string RemoteBackend::complete(const std::string& prompt) const {
  const json request{{"model", settings_.model},
                     {"prompt", prompt},
                     {"max_tokens", settings_.max_tokens},
                     {"temperature", 0}};
  const std::string body = post_json(settings_.endpoint, settings_.api_key, request.dump(), settings_.timeout);
  json reply = json::parse(body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("response") ||
      !reply["response"].is_string()) {
    throw Error(Errc::backend_error, "malformed reply: expected {\"response\": string}");
  }
  return reply["response"].get<std::string>();
}

}  // namespace eventnav
