#include "forge/provider.hpp"

#include "forge/errors.hpp"
#include "forge/util.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>

namespace forge {

using nlohmann::json;

ProviderProfile ProviderProfile::creative(std::shared_ptr<Provider> p, int max_tokens) {
  ProviderProfile prof;
  prof.provider_id = p ? p->id() : "";
  prof.role = ProviderRole::Creative;
  prof.temperature = 2.0;
  prof.max_output_tokens = max_tokens;
  prof.provider = std::move(p);
  return prof;
}

ProviderProfile ProviderProfile::precision(std::shared_ptr<Provider> p, int max_tokens) {
  ProviderProfile prof;
  prof.provider_id = p ? p->id() : "";
  prof.role = ProviderRole::Precision;
  prof.temperature = 1.0;
  prof.max_output_tokens = max_tokens;
  prof.provider = std::move(p);
  return prof;
}

std::string role_name(ProviderRole r) { return r == ProviderRole::Creative ? "creative" : "precision"; }

ProviderRole role_from_name(const std::string& name) {
  if (name == "creative") return ProviderRole::Creative;
  if (name == "precision") return ProviderRole::Precision;
  throw ConfigError("unknown provider role: " + name);
}

// ---- scripted --------------------------------------------------------------

ScriptedProvider::ScriptedProvider(std::string id, std::vector<Entry> entries)
    : id_(std::move(id)), entries_(std::move(entries)) {}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::string& id,
                                                              const std::filesystem::path& script) {
  json j;
  try {
    j = json::parse(util::read_file(script));
  } catch (const json::exception& e) {
    throw ConfigError("scripted provider " + id + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError("scripted provider " + id + ": " + e.what());
  }
  const auto base = script.parent_path();
  std::vector<Entry> entries;
  for (const auto& r : j.value("responses", json::array())) {
    Entry e;
    e.match = r.value("match", "");
    if (r.contains("text")) e.responses.push_back(r["text"].get<std::string>());
    if (r.contains("file")) e.responses.push_back(util::read_file(base / r["file"].get<std::string>()));
    for (const auto& f : r.value("files", json::array())) {
      e.responses.push_back(util::read_file(base / f.get<std::string>()));
    }
    if (e.responses.empty()) throw ConfigError("scripted provider " + id + ": entry without response");
    entries.push_back(std::move(e));
  }
  return std::make_shared<ScriptedProvider>(id, std::move(entries));
}

void ScriptedProvider::add(std::string match, std::string response) {
  std::lock_guard lock(mu_);
  for (auto& e : entries_) {
    if (e.match == match) {
      e.responses.push_back(std::move(response));
      return;
    }
  }
  entries_.push_back({std::move(match), {std::move(response)}});
}

ProviderResponse ScriptedProvider::complete(const ProviderRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  const std::string key = request.tag + "\n" + request.user_prompt;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!util::contains(key, entries_[i].match)) continue;
    auto& cur = cursor_[i];
    const auto& rs = entries_[i].responses;
    ProviderResponse out;
    out.text = rs[std::min(cur, rs.size() - 1)];
    ++cur;
    out.prompt_tokens = static_cast<long long>((request.system_prompt.size() + request.user_prompt.size()) / 4);
    out.completion_tokens = static_cast<long long>(out.text.size() / 4);
    return out;
  }
  throw ConfigError("scripted provider " + id_ + " has no response for tag '" + request.tag + "'");
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---- recording -------------------------------------------------------------

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, std::filesystem::path log_path)
    : inner_(std::move(inner)), log_path_(std::move(log_path)) {}

ProviderResponse RecordingProvider::complete(const ProviderRequest& request) {
  ProviderResponse resp = inner_->complete(request);
  json rec = {{"provider", inner_->id()},
              {"tag", request.tag},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"system", request.system_prompt},
              {"user", request.user_prompt},
              {"response", resp.text},
              {"prompt_tokens", resp.prompt_tokens},
              {"completion_tokens", resp.completion_tokens}};
  std::lock_guard lock(mu_);
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  std::ofstream out(log_path_, std::ios::app | std::ios::binary);
  out << rec.dump() << '\n';
  return resp;
}

// ---- http ------------------------------------------------------------------

HttpProvider::HttpProvider(std::string id, std::string endpoint, std::string model,
                           std::string api_key, int timeout_seconds)
    : id_(std::move(id)), model_(std::move(model)), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("provider endpoint lacks a scheme: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  scheme_host_ = endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

ProviderResponse HttpProvider::complete(const ProviderRequest& request) {
  httplib::Client cli(scheme_host_);
  cli.set_connection_timeout(timeout_seconds_);
  cli.set_read_timeout(timeout_seconds_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  json body = {{"model", model_},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens},
               {"messages",
                json::array({{{"role", "system"}, {"content", request.system_prompt}},
                             {{"role", "user"}, {"content", request.user_prompt}}})}};
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("provider " + id_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 429) {
    throw TransportError("provider " + id_ + ": HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ConfigError("provider " + id_ + ": HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  ProviderResponse out;
  try {
    const json j = json::parse(res->body);
    out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      out.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
      out.completion_tokens = j["usage"].value("completion_tokens", 0LL);
    }
  } catch (const json::exception& e) {
    throw TransportError("provider " + id_ + ": malformed response: " + e.what());
  }
  return out;
}

// ---- configuration ---------------------------------------------------------

KeyValueSections parse_key_value_file(const std::string& text) {
  KeyValueSections out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = util::trim(std::string_view(text).substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = util::trim(line.substr(1, line.size() - 2));
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = util::trim(line.substr(0, eq));
    std::string raw = util::trim(line.substr(eq + 1));
    if (!raw.empty() && raw[0] != '"') {
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw = util::trim(raw.substr(0, hash));
    }
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      throw ConfigError("line " + std::to_string(line_no) + ": bad value for " + key);
    }
    out[section][key] = value;
  }
  return out;
}

std::string provider_key_env(const std::string& id) {
  std::string out = "FORGE_PROVIDER_";
  for (char c : id) {
    out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_';
  }
  return out + "_KEY";
}

std::map<std::string, ProviderProfile> load_providers(const std::filesystem::path& path) {
  const auto sections = parse_key_value_file(util::read_file(path));
  const auto base = path.parent_path();
  std::map<std::string, ProviderProfile> out;
  auto get_str = [](const std::map<std::string, json>& kv, const std::string& k) -> std::string {
    auto it = kv.find(k);
    if (it == kv.end()) return {};
    if (!it->second.is_string()) throw ConfigError("provider key " + k + " must be a string");
    return it->second.get<std::string>();
  };
  // Recording providers wrap others, so build plain providers first.
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& [id, kv] : sections) {
      if (id.empty()) continue;
      const std::string kind = get_str(kv, "kind");
      if ((kind == "recording") != (pass == 1)) continue;
      std::shared_ptr<Provider> p;
      if (kind == "scripted") {
        p = ScriptedProvider::from_file(id, base / get_str(kv, "script"));
      } else if (kind == "http") {
        const char* key = std::getenv(provider_key_env(id).c_str());
        const int timeout = kv.count("timeout") ? kv.at("timeout").get<int>() : 120;
        p = std::make_shared<HttpProvider>(id, get_str(kv, "endpoint"), get_str(kv, "model"),
                                           key ? key : "", timeout);
      } else if (kind == "recording") {
        auto inner = out.find(get_str(kv, "inner"));
        if (inner == out.end()) throw ConfigError("recording provider " + id + " wraps unknown provider");
        p = std::make_shared<RecordingProvider>(inner->second.provider, base / get_str(kv, "log"));
      } else {
        throw ConfigError("provider " + id + " has unknown kind '" + kind + "'");
      }
      const std::string role = get_str(kv, "role");
      ProviderProfile prof = role == "creative" ? ProviderProfile::creative(p)
                                                : ProviderProfile::precision(p);
      prof.provider_id = id;
      if (kv.count("temperature")) {
        prof.temperature = kv.at("temperature").get<double>();
        if (prof.temperature < 0) throw ConfigError("provider " + id + " has negative temperature");
      }
      if (kv.count("max_tokens")) {
        prof.max_output_tokens = kv.at("max_tokens").get<int>();
        if (prof.max_output_tokens <= 0) throw ConfigError("provider " + id + " needs positive max_tokens");
      }
      out[id] = prof;
    }
  }
  return out;
}

} // namespace forge
