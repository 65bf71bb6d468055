#include "forge/blueprint.hpp"

#include "forge/errors.hpp"
#include "forge/util.hpp"

#include <algorithm>
#include <set>

namespace forge {

using nlohmann::json;

namespace {

struct DomainInfo {
  Domain d;
  const char* key;
  const char* code;
  const char* label;
};

constexpr DomainInfo kDomains[] = {
    {Domain::ConsumerTransaction, "consumer_transaction", "D1", "Consumer Transaction/Service"},
    {Domain::ContentModeration, "content_moderation", "D2", "Content Moderation/Compliance"},
    {Domain::EnterpriseProcess, "enterprise_process", "D3", "Enterprise Process/Collaboration"},
    {Domain::InfoRetrieval, "info_retrieval", "D4", "Info Retrieval/Analysis"},
    {Domain::PlatformManagement, "platform_management", "D5", "Platform Management/Ops"},
    {Domain::ToolUsage, "tool_usage", "D6", "Tool Usage"},
    {Domain::ContentCreation, "content_creation", "D7", "Content Creation/Publishing"},
};

constexpr const char* kStepKinds[] = {"navigate",  "observe", "visual_analysis", "reasoning",
                                      "form_input", "click",   "verify",          "read_answer"};

constexpr const char* kAnswerTypes[] = {"direct_answer", "operation_code", "mixed"};

std::string require_string(const json& j, const char* key, const std::string& section) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
    throw ParseError(section + " missing field '" + key + "'");
  }
  return j[key].get<std::string>();
}

std::string optional_string(const json& j, const char* key) {
  if (j.is_object() && j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  return {};
}

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string extract_fenced_json(const std::string& text) {
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find("```", pos);
    if (open == std::string::npos) break;
    const std::size_t eol = text.find('\n', open);
    if (eol == std::string::npos) break;
    const std::string info = util::trim(std::string_view(text).substr(open + 3, eol - open - 3));
    const std::size_t close = text.find("\n```", eol);
    if (close == std::string::npos) break;
    if (info == "json" || util::starts_with(info, "json ")) {
      return text.substr(eol + 1, close - eol - 1);
    }
    pos = close + 4;
  }
  throw ParseError("no fenced json plan block in provider output");
}

} // namespace

std::string domain_key(Domain d) { return kDomains[domain_index(d)].key; }
std::string domain_code(Domain d) { return kDomains[domain_index(d)].code; }
std::string domain_label(Domain d) { return kDomains[domain_index(d)].label; }

std::optional<Domain> domain_from_string(const std::string& s) {
  for (const auto& info : kDomains) {
    if (s == info.key || s == info.code) return info.d;
  }
  return std::nullopt;
}

std::string step_kind_name(StepKind k) { return kStepKinds[static_cast<int>(k)]; }

std::optional<StepKind> step_kind_from_name(const std::string& s) {
  for (int i = 0; i < 8; ++i) {
    if (s == kStepKinds[i]) return static_cast<StepKind>(i);
  }
  return std::nullopt;
}

std::string answer_type_name(AnswerType t) { return kAnswerTypes[static_cast<int>(t)]; }

std::optional<AnswerType> answer_type_from_name(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    if (s == kAnswerTypes[i]) return static_cast<AnswerType>(i);
  }
  return std::nullopt;
}

json to_json(const TaskBlueprint& bp) {
  json j;
  j["title"] = bp.title;
  j["user_query"] = bp.user_query;
  j["domain"] = domain_key(bp.domain);
  j["overall_level"] = bp.overall_level;
  j["difficulty"] = to_json(bp.difficulty);
  j["pages"] = json::array();
  for (const auto& p : bp.pages) {
    j["pages"].push_back({{"page_id", p.page_id},
                          {"route", p.route},
                          {"purpose", p.purpose},
                          {"key_content", p.key_content},
                          {"distractors", p.distractors}});
  }
  j["solution"] = json::array();
  for (const auto& s : bp.solution) {
    j["solution"].push_back(
        {{"ordinal", s.ordinal}, {"kind", step_kind_name(s.kind)}, {"description", s.description}});
  }
  json ans;
  ans["answer_type"] = answer_type_name(bp.answer.answer_type);
  ans["ground_truth_fields"] = bp.answer.ground_truth_fields;
  ans["code_fields"] = bp.answer.code_fields;
  ans["grading_tiers"] = json::array();
  for (const auto& t : bp.answer.grading_tiers) {
    ans["grading_tiers"].push_back({{"condition", t.condition}, {"credit", t.credit}});
  }
  j["answer"] = ans;
  j["qa_notes"] = bp.qa_notes;
  return j;
}

TaskBlueprint blueprint_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("plan must be a JSON object");
  TaskBlueprint bp;
  bp.title = optional_string(j, "title");
  if (!j.contains("user_query") || !j["user_query"].is_string() ||
      util::trim(j["user_query"].get<std::string>()).empty()) {
    throw ParseError("user query missing");
  }
  bp.user_query = j["user_query"].get<std::string>();

  if (!j.contains("domain") || !j["domain"].is_string()) throw ParseError("domain missing");
  auto dom = domain_from_string(j["domain"].get<std::string>());
  if (!dom) throw ParseError("unknown domain '" + j["domain"].get<std::string>() + "'");
  bp.domain = *dom;

  if (!j.contains("overall_level") || !j["overall_level"].is_number_integer()) {
    throw ParseError("overall level missing");
  }
  bp.overall_level = j["overall_level"].get<int>();
  if (bp.overall_level < 1 || bp.overall_level > 3) throw ParseError("overall level out of range");

  if (!j.contains("difficulty") || j["difficulty"].is_null()) {
    throw ParseError("difficulty configuration missing");
  }
  bp.difficulty = difficulty_from_json(j["difficulty"]);

  if (!j.contains("pages") || !j["pages"].is_array() || j["pages"].empty()) {
    throw ParseError("web environment design missing");
  }
  std::set<std::string> ids, routes;
  for (const auto& p : j["pages"]) {
    PageDesign d;
    d.page_id = require_string(p, "page_id", "page");
    d.route = require_string(p, "route", "page " + d.page_id);
    d.purpose = optional_string(p, "purpose");
    d.key_content = optional_string(p, "key_content");
    if (p.contains("distractors")) {
      for (const auto& x : p["distractors"]) d.distractors.push_back(x.get<std::string>());
    }
    if (!ids.insert(d.page_id).second) throw ParseError("duplicate page id '" + d.page_id + "'");
    if (!routes.insert(d.route).second) throw ParseError("duplicate route '" + d.route + "'");
    bp.pages.push_back(std::move(d));
  }

  if (!j.contains("solution") || !j["solution"].is_array() || j["solution"].empty()) {
    throw ParseError("solution path missing");
  }
  int expect = 1;
  for (const auto& s : j["solution"]) {
    SolutionStep st;
    if (!s.contains("ordinal") || !s["ordinal"].is_number_integer()) {
      throw ParseError("solution step without ordinal");
    }
    st.ordinal = s["ordinal"].get<int>();
    if (st.ordinal != expect++) throw ParseError("solution ordinals must be contiguous from 1");
    st.description = optional_string(s, "description");
    auto kind = step_kind_from_name(require_string(s, "kind", "solution step"));
    if (!kind) throw ParseError("unknown solution step kind '" + s["kind"].get<std::string>() + "'");
    st.kind = *kind;
    bp.solution.push_back(std::move(st));
  }

  if (!j.contains("answer") || !j["answer"].is_object()) throw ParseError("answer configuration missing");
  const json& a = j["answer"];
  auto at = answer_type_from_name(require_string(a, "answer_type", "answer configuration"));
  if (!at) throw ParseError("unknown answer type");
  bp.answer.answer_type = *at;
  if (!a.contains("ground_truth_fields") || !a["ground_truth_fields"].is_object() ||
      a["ground_truth_fields"].empty()) {
    throw ParseError("answer configuration has no ground truth fields");
  }
  for (auto it = a["ground_truth_fields"].begin(); it != a["ground_truth_fields"].end(); ++it) {
    if (!it.value().is_string()) throw ParseError("ground truth field " + it.key() + " must be text");
    bp.answer.ground_truth_fields[it.key()] = it.value().get<std::string>();
  }
  for (const auto& c : a.value("code_fields", json::array())) {
    const auto name = c.get<std::string>();
    if (!bp.answer.ground_truth_fields.count(name)) {
      throw ParseError("code field " + name + " is not a ground truth field");
    }
    bp.answer.code_fields.push_back(name);
  }
  for (const auto& t : a.value("grading_tiers", json::array())) {
    GradingTier g;
    g.condition = optional_string(t, "condition");
    if (!t.contains("credit") || !t["credit"].is_number()) throw ParseError("grading tier without credit");
    g.credit = t["credit"].get<double>();
    if (!(g.credit > 0.0 && g.credit <= 1.0)) throw ParseError("grading tier credit outside (0,1]");
    bp.answer.grading_tiers.push_back(std::move(g));
  }
  if (bp.answer.answer_type == AnswerType::Mixed && bp.answer.ground_truth_fields.size() < 2) {
    throw ParseError("mixed answers need at least two ground truth fields");
  }
  if (bp.answer.answer_type != AnswerType::DirectAnswer && bp.answer.code_fields.empty()) {
    throw ParseError("operation-code answers must name their code field");
  }
  bp.qa_notes = optional_string(j, "qa_notes");
  return bp;
}

TaskBlueprint parse_blueprint(const std::string& text) {
  const std::string body = extract_fenced_json(text);
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan block is not valid JSON: ") + e.what());
  }
  return blueprint_from_json(j);
}

std::string serialize_blueprint(const TaskBlueprint& bp) {
  return "```json\n" + to_json(bp).dump(2) + "\n```\n";
}

double modification_ratio(const TaskBlueprint& a, const TaskBlueprint& b) {
  const auto ta = util::split_ws(to_json(a).dump(2));
  const auto tb = util::split_ws(to_json(b).dump(2));
  const std::size_t n = std::max(ta.size(), tb.size());
  if (n == 0) return 0.0;
  return static_cast<double>(levenshtein(ta, tb)) / static_cast<double>(n);
}

std::string plan_system_prompt() {
  return "You design self-contained static websites that serve as browser-agent benchmark tasks.\n"
         "Respond with prose if useful, followed by exactly one fenced ```json block containing the plan:\n"
         "{title, user_query, domain, overall_level, difficulty{jump_depth, jump_breadth, page_interaction,\n"
         " visual_complexity, info_complexity, reasoning_calc, risk_factor: {level, justification}},\n"
         " pages[{page_id, route, purpose, key_content, distractors[]}],\n"
         " solution[{ordinal, kind, description}], answer{answer_type, ground_truth_fields, code_fields,\n"
         " grading_tiers[{condition, credit}]}, qa_notes}.\n"
         "Overall level rules: L1 has at most 2 dimensions at L2 and none at L3; L2 has at least 2 at L2\n"
         "and at most 1 at L3; L3 has at least 2 at L3 and at least 2 at L2.";
}

std::string draft_user_prompt(Domain domain, int level) {
  return "Draft a creative task plan.\ndomain: " + domain_key(domain) + " (" + domain_label(domain) +
         ")\noverall_level: " + std::to_string(level) + "\n";
}

std::string refine_user_prompt(const TaskBlueprint& draft) {
  return "Refine this draft into a precise, internally consistent plan. Keep the domain and overall "
         "level, enforce the level rules, and add hidden complexity where it raises difficulty "
         "honestly.\n\n" +
         serialize_blueprint(draft);
}

DraftResult draft_plan(Domain domain, int level, const ProviderProfile& provider) {
  if (provider.role != ProviderRole::Creative) {
    throw ConfigError("draft_plan requires a creative provider profile");
  }
  if (!provider.provider) throw ConfigError("provider profile has no provider");
  ProviderRequest req;
  req.system_prompt = plan_system_prompt();
  req.user_prompt = draft_user_prompt(domain, level);
  req.temperature = provider.temperature;
  req.max_tokens = provider.max_output_tokens;
  req.tag = "draft:" + domain_key(domain) + ":" + std::to_string(level);

  std::string last;
  std::string last_error;
  for (int attempt = 1; attempt <= 3; ++attempt) {
    last = provider.provider->complete(req).text;
    try {
      DraftResult r;
      r.blueprint = parse_blueprint(last);
      r.composition_ok = check_composition(Level(level), r.blueprint.difficulty);
      r.attempts = attempt;
      return r;
    } catch (const ParseError& e) {
      last_error = e.what();
    }
  }
  throw GenerationError("draft plan unparseable after 3 attempts: " + last_error, last);
}

RefineResult refine_plan(const TaskBlueprint& draft, const ProviderProfile& provider) {
  if (provider.role != ProviderRole::Precision) {
    throw ConfigError("refine_plan requires a precision provider profile");
  }
  if (!provider.provider) throw ConfigError("provider profile has no provider");
  ProviderRequest req;
  req.system_prompt = plan_system_prompt();
  req.user_prompt = refine_user_prompt(draft);
  req.temperature = provider.temperature;
  req.max_tokens = provider.max_output_tokens;
  req.tag = "refine:" + domain_key(draft.domain) + ":" + std::to_string(draft.overall_level);

  int calls = 0;
  std::string violation;
  for (int round = 0; round < 3; ++round) {
    std::string last;
    std::optional<TaskBlueprint> refined;
    std::string parse_error;
    for (int attempt = 1; attempt <= 3 && !refined; ++attempt) {
      last = provider.provider->complete(req).text;
      ++calls;
      try {
        refined = parse_blueprint(last);
      } catch (const ParseError& e) {
        parse_error = e.what();
      }
    }
    if (!refined) throw GenerationError("refined plan unparseable after 3 attempts: " + parse_error, last);
    if (refined->overall_level != draft.overall_level) {
      violation = "refinement changed the overall level";
    } else if (refined->domain != draft.domain) {
      violation = "refinement changed the domain";
    } else if (!check_composition(Level(draft.overall_level), refined->difficulty)) {
      violation = "difficulty vector violates the level " + std::to_string(draft.overall_level) +
                  " composition rules";
    } else {
      RefineResult r;
      r.blueprint = std::move(*refined);
      r.modification_ratio = modification_ratio(draft, r.blueprint);
      r.attempts = calls;
      if (r.modification_ratio < kMinModificationRatio) {
        r.warnings.push_back("modification ratio " + util::fixed(r.modification_ratio, 3) +
                             " is below " + util::fixed(kMinModificationRatio, 2));
      }
      return r;
    }
    req.user_prompt = refine_user_prompt(draft) + "\nThe previous attempt was rejected: " + violation + ".\n";
  }
  throw PipelineError("refined plan rejected after 2 retries: " + violation);
}

} // namespace forge
