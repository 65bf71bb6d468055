#include "forge/judge.hpp"

#include "forge/errors.hpp"

#include <map>

namespace forge {

using nlohmann::json;

json JudgeProgram::derive_all(const json& state) const {
  json derived = json::object();
  const expr::Env env{&state, &constants, &derived};
  for (const auto& d : derive) {
    derived[d.name] = d.expr.eval(env);
  }
  return derived;
}

std::string JudgeProgram::match(const json& state) const {
  const json derived = derive_all(state);
  const expr::Env env{&state, &constants, &derived};
  for (const auto& r : rules) {
    if (r.when.test(env)) return r.outcome;
  }
  throw ConfigError("no judge rule matched the submission state");
}

std::vector<std::string> JudgeProgram::outcomes() const {
  std::vector<std::string> out;
  for (const auto& r : rules) out.push_back(r.outcome);
  return out;
}

json JudgeProgram::to_json(bool encode_strings) const {
  json j;
  j["state_key"] = state_key;
  j["constants"] = constants;
  j["derive"] = json::array();
  for (const auto& d : derive) {
    j["derive"].push_back({{"name", d.name}, {"expr", d.expr.to_source(encode_strings)}});
  }
  j["rules"] = json::array();
  for (const auto& r : rules) {
    j["rules"].push_back({{"when", r.when.to_source(encode_strings)}, {"outcome", r.outcome}});
  }
  return j;
}

JudgeProgram JudgeProgram::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("judge program must be an object");
  JudgeProgram p;
  if (j.contains("state_key")) p.state_key = j.at("state_key").get<std::string>();
  if (j.contains("constants")) p.constants = j.at("constants");
  try {
    for (const auto& d : j.value("derive", json::array())) {
      p.derive.push_back({d.at("name").get<std::string>(),
                          expr::Expr::parse(d.at("expr").get<std::string>())});
    }
    for (const auto& r : j.value("rules", json::array())) {
      p.rules.push_back({expr::Expr::parse(r.at("when").get<std::string>()),
                         r.at("outcome").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("judge program: ") + e.what());
  }
  return p;
}

JudgeProgram JudgeProgram::obfuscated(const std::set<std::string>& keep) const {
  std::map<std::string, std::string> names;
  int next = 0;
  for (const auto& d : derive) {
    if (!keep.contains(d.name)) names[d.name] = "_v" + std::to_string(next++);
  }
  JudgeProgram out = *this;
  for (auto& d : out.derive) {
    if (auto it = names.find(d.name); it != names.end()) d.name = it->second;
    d.expr = d.expr.rename(names);
  }
  for (auto& r : out.rules) r.when = r.when.rename(names);
  return out;
}

} // namespace forge
