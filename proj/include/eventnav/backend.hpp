#pragma once
// Text-generation backends shared by extraction and planning.
//
// Remote wire protocol: POST <endpoint> with a JSON body
//   {"model": <identity>, "prompt": <text>, "max_tokens": N, "temperature": 0}
// and bearer credential; the reply is {"response": <text>}.
//
// Cassette file: one JSON object per line
//   {"prompt": <text>, "prompt_hash": <fnv1a64 hex>, "response": <text>}

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace eventnav {

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string identity() const = 0;
  // Throws Error(BackendError) on transport failure.
  virtual std::string complete(const std::string& prompt) const = 0;
};

std::string prompt_hash(std::string_view prompt);

struct CassetteEntry {
  std::string prompt;
  std::string response;
  friend bool operator==(const CassetteEntry&, const CassetteEntry&) = default;
};

// prompt hash -> entry, ordered so saved files are deterministic.
using Cassette = std::map<std::string, CassetteEntry>;

void save_cassette(const Cassette& cassette, const std::filesystem::path& path);
Cassette load_cassette(const std::filesystem::path& path);

// Answers from a cassette; a prompt not in it is a BackendError.
class ReplayBackend final : public TextBackend {
 public:
  explicit ReplayBackend(Cassette cassette, std::string identity = "replay")
      : cassette_(std::move(cassette)), identity_(std::move(identity)) {}

  std::string identity() const override { return identity_; }
  std::string complete(const std::string& prompt) const override;

 private:
  Cassette cassette_;
  std::string identity_;
};

// Forwards to an inner backend and remembers every exchange. Thread-safe.
class RecordingBackend final : public TextBackend {
 public:
  explicit RecordingBackend(const TextBackend& inner) : inner_(inner) {}

  std::string identity() const override { return inner_.identity(); }
  std::string complete(const std::string& prompt) const override;
  Cassette cassette() const;

 private:
  const TextBackend& inner_;
  mutable std::mutex mu_;
  mutable Cassette recorded_;
};

struct RemoteSettings {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string api_key;
  std::string model = "gpt-3.5-turbo";
  int max_tokens = 256;
  std::chrono::seconds timeout{30};
};

// Reads BACKEND_URL and BACKEND_KEY; empty fields when unset.
RemoteSettings remote_settings_from_env();

class RemoteBackend final : public TextBackend {
 public:
  explicit RemoteBackend(RemoteSettings settings);

  std::string identity() const override { return "remote:" + settings_.model; }
  std::string complete(const std::string& prompt) const override;

 private:
  RemoteSettings settings_;
};

// Splits "http://host:port/path" into base ("http://host:port") and path.
struct UrlParts {
  std::string base;
  std::string path;
};
UrlParts split_url(std::string_view url);

// POSTs a JSON document and returns the parsed JSON reply body as text.
// Shared by the remote text backend and the remote embedder.
std::string post_json(const std::string& url, const std::string& api_key, const std::string& body,
                      std::chrono::seconds timeout);

}  // namespace eventnav
