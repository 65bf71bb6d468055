#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/expr.hpp"

namespace forge {

inline constexpr const char* kCorrectOutcome = "CORRECT";

struct Derivation {
  std::string name;
  expr::Expr expr;
};

// One row of the deceptive-code table: the first rule whose condition holds
// decides which code the booking flow hands back.
struct JudgeRule {
  expr::Expr when;
  std::string outcome;  // kCorrectOutcome or a mistake-pattern id
};

// Declarative program shared by the judge, the solution check and the page
// runtime: constants, ordered derivations over the submission state, and the
// ordered outcome rules.
struct JudgeProgram {
  std::string state_key = "forge_state";
  nlohmann::json constants = nlohmann::json::object();
  std::vector<Derivation> derive;
  std::vector<JudgeRule> rules;

  // Each derivation sees the state, the constants and every earlier derivation.
  nlohmann::json derive_all(const nlohmann::json& state) const;
  // Outcome id of the first matching rule. Throws ConfigError if none matches.
  std::string match(const nlohmann::json& state) const;
  // Outcome ids in rule order.
  std::vector<std::string> outcomes() const;

  // String literals are written as ~"base64" when encode_strings is set.
  nlohmann::json to_json(bool encode_strings = false) const;
  // Throws ParseError on malformed expressions or structure.
  static JudgeProgram from_json(const nlohmann::json& j);

  // Renames derivations outside `keep` to opaque identifiers. Semantics are
  // unchanged; together with encoded literals this is the shipped form.
  JudgeProgram obfuscated(const std::set<std::string>& keep) const;
};

} // namespace forge
