#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace forge {

struct ProviderRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 1.0;
  int max_tokens = 8192;
  // Stage label such as "draft:consumer_transaction:3"; used by playback and logs.
  std::string tag;
};

struct ProviderResponse {
  std::string text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

// One request/response text-completion interface. Implementations throw
// TransportError for delivery failures and ConfigError for misconfiguration.
class Provider {
public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

enum class ProviderRole { Creative, Precision };

struct ProviderProfile {
  std::string provider_id;
  ProviderRole role = ProviderRole::Precision;
  double temperature = 1.0;
  int max_output_tokens = 8192;
  std::shared_ptr<Provider> provider;

  static ProviderProfile creative(std::shared_ptr<Provider> p, int max_tokens = 8192);
  static ProviderProfile precision(std::shared_ptr<Provider> p, int max_tokens = 8192);
};

std::string role_name(ProviderRole r);
ProviderRole role_from_name(const std::string& name);

// Fixture playback. Each entry matches when its `match` substring occurs in
// "<tag>\n<user prompt>"; entries with several responses hand them out in
// order and then repeat the last one. Safe for concurrent use.
class ScriptedProvider final : public Provider {
public:
  struct Entry {
    std::string match;
    std::vector<std::string> responses;
  };

  explicit ScriptedProvider(std::string id, std::vector<Entry> entries = {});
  // {"responses": [{"match": "...", "text": "..."} | {"match": "...", "file": "..."} |
  //                {"match": "...", "files": [...]}]}; paths relative to the script.
  static std::shared_ptr<ScriptedProvider> from_file(const std::string& id,
                                                     const std::filesystem::path& script);

  void add(std::string match, std::string response);
  std::string id() const override { return id_; }
  ProviderResponse complete(const ProviderRequest& request) override;
  std::size_t calls() const;

private:
  std::string id_;
  std::vector<Entry> entries_;
  std::map<std::size_t, std::size_t> cursor_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

// Forwards to an inner provider and appends each exchange as one JSON line.
class RecordingProvider final : public Provider {
public:
  RecordingProvider(std::shared_ptr<Provider> inner, std::filesystem::path log_path);
  std::string id() const override { return inner_->id(); }
  ProviderResponse complete(const ProviderRequest& request) override;

private:
  std::shared_ptr<Provider> inner_;
  std::filesystem::path log_path_;
  std::mutex mu_;
};

// OpenAI-compatible chat-completions gateway.
class HttpProvider final : public Provider {
public:
  HttpProvider(std::string id, std::string endpoint, std::string model, std::string api_key,
               int timeout_seconds = 120);
  std::string id() const override { return id_; }
  ProviderResponse complete(const ProviderRequest& request) override;

private:
  std::string id_;
  std::string scheme_host_;
  std::string path_;
  std::string model_;
  std::string api_key_;
  int timeout_seconds_;
};

// Minimal TOML-style key/value file: [section] headers, key = "string" | number | bool.
using KeyValueSections = std::map<std::string, std::map<std::string, nlohmann::json>>;
KeyValueSections parse_key_value_file(const std::string& text);

// Loads providers.toml-style configuration. Each section is one provider:
//   [planner]
//   kind = "scripted" | "http" | "recording"
//   role = "creative" | "precision"
//   temperature = 2.0
//   script = "fixtures/script.json"          (scripted)
//   endpoint = "https://host/v1/chat/completions", model = "..." (http)
//   inner = "other-id", log = "calls.jsonl"  (recording)
// API keys come from FORGE_PROVIDER_<ID>_KEY with the id upper-cased and
// non-alphanumerics mapped to '_'.
std::map<std::string, ProviderProfile> load_providers(const std::filesystem::path& path);
std::string provider_key_env(const std::string& id);

} // namespace forge
