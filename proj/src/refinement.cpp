#include "forge/refinement.hpp"

#include "forge/codec.hpp"
#include "forge/errors.hpp"
#include "forge/html.hpp"
#include "forge/util.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

namespace forge {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- names ---------------------------------------------------------------------

namespace {

constexpr std::pair<RuleCategory, const char*> kCategories[] = {
    {RuleCategory::FunctionalCompleteness, "functional_completeness"},
    {RuleCategory::VisualCorrectness, "visual_correctness"},
    {RuleCategory::StateDeterminism, "state_determinism"},
    {RuleCategory::EnvironmentRealism, "environment_realism"},
    {RuleCategory::TaskSecurity, "task_security"},
    {RuleCategory::InteractionFeedback, "interaction_feedback"},
};

} // namespace

std::string rule_category_name(RuleCategory c) {
  for (const auto& [k, n] : kCategories) {
    if (k == c) return n;
  }
  return "functional_completeness";
}

std::optional<RuleCategory> rule_category_from_name(const std::string& s) {
  for (const auto& [k, n] : kCategories) {
    if (s == n) return k;
  }
  return std::nullopt;
}

std::string severity_name(Severity s) {
  switch (s) {
  case Severity::Blocker:
    return "blocker";
  case Severity::Major:
    return "major";
  case Severity::Minor:
    return "minor";
  }
  return "minor";
}

std::optional<Severity> severity_from_name(const std::string& s) {
  if (s == "blocker") return Severity::Blocker;
  if (s == "major") return Severity::Major;
  if (s == "minor") return Severity::Minor;
  return std::nullopt;
}

std::string repair_action_name(RepairAction a) {
  switch (a) {
  case RepairAction::ResolveDeadLinks:
    return "resolve_dead_links";
  case RepairAction::ReplaceBlockingDialogs:
    return "replace_blocking_dialogs";
  case RepairAction::InjectNoise:
    return "inject_noise";
  case RepairAction::Manual:
    return "manual";
  }
  return "manual";
}

RepairAction repair_action_for(const std::string& check) {
  if (check == "dead_links") return RepairAction::ResolveDeadLinks;
  if (check == "blocking_dialogs") return RepairAction::ReplaceBlockingDialogs;
  if (check == "noise_runtime") return RepairAction::InjectNoise;
  return RepairAction::Manual;
}

// ---- rule set ------------------------------------------------------------------

const std::vector<std::string>& static_check_names() {
  static const std::vector<std::string> names = {
      "dead_links",       "missing_local_resources", "stylesheet_linked",    "image_alt",
      "ambient_randomness", "duplicate_ids",         "noise_runtime",        "answer_plaintext",
      "external_references", "encoded_data",         "control_files_exposed", "blocking_dialogs",
      "form_feedback",
  };
  return names;
}

void RuleSet::validate() const {
  std::set<std::string> seen;
  const auto& checks = static_check_names();
  for (const auto& r : rules) {
    if (r.rule_id.empty()) throw ConfigError("quality rule without rule_id");
    if (!seen.insert(r.rule_id).second) throw ConfigError("duplicate quality rule " + r.rule_id);
    if (r.checker == Checker::Static && std::find(checks.begin(), checks.end(), r.check) == checks.end()) {
      throw ConfigError("rule " + r.rule_id + ": unknown static check '" + r.check + "'");
    }
  }
}

const QualityRule* RuleSet::find(const std::string& rule_id) const {
  for (const auto& r : rules) {
    if (r.rule_id == rule_id) return &r;
  }
  return nullptr;
}

json RuleSet::to_json() const {
  json arr = json::array();
  for (const auto& r : rules) {
    arr.push_back({{"rule_id", r.rule_id},
                   {"category", rule_category_name(r.category)},
                   {"checker", r.checker == Checker::Static ? "static" : "llm"},
                   {"severity", severity_name(r.severity)},
                   {"check", r.check},
                   {"description", r.description}});
  }
  return {{"rules", arr}};
}

RuleSet RuleSet::from_json(const json& j) {
  RuleSet set;
  const json& arr = j.is_array() ? j : j.value("rules", json::array());
  try {
    for (const auto& r : arr) {
      QualityRule q;
      q.rule_id = r.at("rule_id").get<std::string>();
      const auto cat = rule_category_from_name(r.at("category").get<std::string>());
      if (!cat) throw ConfigError("rule " + q.rule_id + ": unknown category");
      q.category = *cat;
      const std::string checker = r.at("checker").get<std::string>();
      if (checker != "static" && checker != "llm") throw ConfigError("rule " + q.rule_id + ": unknown checker");
      q.checker = checker == "static" ? Checker::Static : Checker::Llm;
      const auto sev = severity_from_name(r.at("severity").get<std::string>());
      if (!sev) throw ConfigError("rule " + q.rule_id + ": unknown severity");
      q.severity = *sev;
      q.check = r.value("check", "");
      q.description = r.value("description", "");
      set.rules.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rules: ") + e.what());
  }
  set.validate();
  return set;
}

RuleSet RuleSet::load(const fs::path& path) {
  try {
    return from_json(json::parse(util::read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RuleSet RuleSet::defaults() {
  using C = RuleCategory;
  using S = Severity;
  RuleSet set;
  auto add = [&](const char* id, C c, Checker k, S s, const char* check, const char* desc) {
    set.rules.push_back({id, c, k, s, check, desc});
  };
  add("FC-001", C::FunctionalCompleteness, Checker::Static, S::Blocker, "dead_links",
      "Every link, data-href button and form action reaches a page, an asset or an external site.");
  add("FC-002", C::FunctionalCompleteness, Checker::Static, S::Blocker, "missing_local_resources",
      "Every local image, script and stylesheet a page loads exists in the bundle.");
  add("VC-001", C::VisualCorrectness, Checker::Static, S::Major, "stylesheet_linked",
      "Every page links the site stylesheet.");
  add("VC-002", C::VisualCorrectness, Checker::Static, S::Minor, "image_alt",
      "Images carry alt text.");
  add("VC-003", C::VisualCorrectness, Checker::Llm, S::Minor, "layout_review",
      "Reviewer reads page markup for overlapping, clipped or unreadable content.");
  add("SD-001", C::StateDeterminism, Checker::Static, S::Major, "ambient_randomness",
      "Site scripts do not draw on Math.random or the wall clock.");
  add("SD-002", C::StateDeterminism, Checker::Static, S::Major, "duplicate_ids",
      "Element ids are unique within a page.");
  add("ER-001", C::EnvironmentRealism, Checker::Static, S::Major, "noise_runtime",
      "Every page carries one runtime-config island and loads the page runtime once.");
  add("TS-001", C::TaskSecurity, Checker::Static, S::Blocker, "answer_plaintext",
      "No ground-truth value or deceptive code appears in plaintext.");
  add("TS-002", C::TaskSecurity, Checker::Static, S::Blocker, "external_references",
      "No served file loads anything from outside the bundle.");
  add("TS-003", C::TaskSecurity, Checker::Static, S::Blocker, "encoded_data",
      "Answer-bearing data fields are base64 encoded.");
  add("TS-004", C::TaskSecurity, Checker::Static, S::Blocker, "control_files_exposed",
      "Pages do not reference solution, metadata or task files.");
  add("IF-001", C::InteractionFeedback, Checker::Static, S::Blocker, "blocking_dialogs",
      "No alert, confirm or prompt calls in served scripts.");
  add("IF-002", C::InteractionFeedback, Checker::Static, S::Minor, "form_feedback",
      "Required form fields declare the message shown when they are left empty.");
  return set;
}

json to_json(const Finding& f) {
  return {{"rule_id", f.rule_id}, {"file", f.file}, {"detail", f.detail}, {"severity", severity_name(f.severity)}};
}

// ---- scripts -------------------------------------------------------------------

std::vector<BlockingCall> find_blocking_calls(std::string_view s) {
  std::vector<BlockingCall> out;
  auto ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; };
  for (const char* name : {"alert", "confirm", "prompt"}) {
    const std::string_view n(name);
    std::size_t pos = 0;
    while ((pos = s.find(n, pos)) != std::string_view::npos) {
      const std::size_t at = pos;
      pos += n.size();
      if (at > 0 && ident(s[at - 1])) continue;
      std::size_t k = at + n.size();
      while (k < s.size() && std::isspace(static_cast<unsigned char>(s[k]))) ++k;
      if (k >= s.size() || s[k] != '(') continue;
      // "function alert(" declares rather than calls.
      std::size_t b = at;
      while (b > 0 && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
      if (b >= 8 && s.substr(b - 8, 8) == "function" && (b == 8 || !ident(s[b - 9]))) continue;
      out.push_back({at, std::string(n)});
    }
  }
  std::sort(out.begin(), out.end(), [](const BlockingCall& a, const BlockingCall& b) { return a.offset < b.offset; });
  return out;
}

namespace {

bool is_js_script(const html::Node& n) {
  if (n.tag != "script" || n.has_attr("src")) return false;
  const std::string type = util::to_lower(n.attr("type").value_or(""));
  return type.empty() || util::contains(type, "javascript") || type == "module";
}

bool is_handler_attr(const std::string& name) {
  return name.size() > 2 && name[0] == 'o' && name[1] == 'n';
}

html::Document parse_or_extract(const std::string& file, const std::string& text) {
  try {
    return html::Document::parse(text);
  } catch (const ParseError& e) {
    throw ExtractionError(file + ": " + e.what());
  }
}

std::string strip_runtime(const std::string& js) {
  const auto b = js.find(kRuntimeBegin);
  if (b == std::string::npos) return js;
  const auto e = js.find(kRuntimeEnd, b);
  if (e == std::string::npos) return js.substr(0, b);
  return js.substr(0, b) + js.substr(e + std::string_view(kRuntimeEnd).size());
}

} // namespace

std::vector<std::pair<std::string, std::string>> served_scripts(const WebsiteBundle& bundle) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& path : bundle.served_files()) {
    const std::string& text = bundle.files.at(path);
    if (util::ends_with(path, ".js")) {
      out.emplace_back(path, text);
    } else if (util::ends_with(path, ".html") || util::ends_with(path, ".htm")) {
      const auto doc = parse_or_extract(path, text);
      int index = 0;
      for (const html::Node* n : doc.find_all([](const html::Node& x) { return x.is_element(); })) {
        if (is_js_script(*n)) out.emplace_back(path + "#script" + std::to_string(index++), n->text);
        for (const auto& [name, value] : n->attrs) {
          if (is_handler_attr(name)) out.emplace_back(path + "#" + n->tag + "@" + name, value);
        }
      }
    }
  }
  return out;
}

// ---- static checks -------------------------------------------------------------

namespace {

using CheckFn = void (*)(const WebsiteBundle&, const QualityRule&, std::vector<Finding>&);

void emit(std::vector<Finding>& out, const QualityRule& r, std::string file, std::string detail) {
  out.push_back({r.rule_id, std::move(file), std::move(detail), r.severity});
}

const std::string* page_text(const WebsiteBundle& b, const PageEntry& p) {
  auto it = b.files.find(p.file);
  return it == b.files.end() ? nullptr : &it->second;
}

void check_dead_links(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  const NavGraph g = extract_nav_graph(b);
  for (const auto& e : g.edges) {
    if (e.target != EdgeTarget::Dead) continue;
    const PageEntry* p = b.page_by_id(e.from);
    emit(out, r, p ? p->file : e.from, "link '" + e.text + "' -> '" + e.href + "' leads nowhere");
  }
}

void check_missing_resources(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  for (const auto& p : b.pages) {
    const std::string* text = page_text(b, p);
    if (!text) {
      emit(out, r, p.file, "page file missing");
      continue;
    }
    const auto doc = parse_or_extract(p.file, *text);
    for (const html::Node* n : doc.find_all([](const html::Node& x) { return x.is_element(); })) {
      std::optional<std::string> ref;
      if ((n->tag == "img" || n->tag == "script" || n->tag == "source") && n->has_attr("src")) ref = n->attr("src");
      if (n->tag == "link" && util::contains(util::to_lower(n->attr("rel").value_or("")), "stylesheet")) {
        ref = n->attr("href");
      }
      if (!ref || is_external_href(*ref)) continue;
      const auto file = resolve_href(p.file, *ref);
      if (file && !b.files.count(*file)) emit(out, r, p.file, "<" + n->tag + "> loads missing " + *ref);
    }
  }
}

void check_stylesheet(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  if (!b.files.count(kStyleFile)) return;
  for (const auto& p : b.pages) {
    const std::string* text = page_text(b, p);
    if (!text) continue;
    const auto doc = parse_or_extract(p.file, *text);
    bool linked = false;
    for (const html::Node* n : doc.by_tag("link")) {
      const auto file = resolve_href(p.file, n->attr("href").value_or(""));
      if (file && *file == kStyleFile) linked = true;
    }
    if (!linked) emit(out, r, p.file, "page does not link " + std::string(kStyleFile));
  }
}

void check_image_alt(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  for (const auto& p : b.pages) {
    const std::string* text = page_text(b, p);
    if (!text) continue;
    const auto doc = parse_or_extract(p.file, *text);
    for (const html::Node* n : doc.by_tag("img")) {
      if (!n->has_attr("alt")) emit(out, r, p.file, "image " + n->attr("src").value_or("?") + " has no alt text");
    }
  }
}

void check_randomness(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  static const std::regex re(R"(Math\.random\s*\(|Date\.now\s*\(|new\s+Date\s*\(\s*\)|performance\.now\s*\()");
  for (const auto& [label, text] : served_scripts(b)) {
    const std::string body = strip_runtime(text);
    std::smatch m;
    if (std::regex_search(body, m, re)) emit(out, r, label, "uses " + m.str(0));
  }
}

void check_duplicate_ids(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  for (const auto& p : b.pages) {
    const std::string* text = page_text(b, p);
    if (!text) continue;
    std::map<std::string, int> seen;
    const auto doc = parse_or_extract(p.file, *text);
    for (const html::Node* n : doc.find_all([](const html::Node& x) {
           return x.has_attr("id");
         })) {
      if (++seen[*n->attr("id")] == 2) emit(out, r, p.file, "id '" + *n->attr("id") + "' is used more than once");
    }
  }
}

std::size_t count_main_script_tags(const html::Document& doc, const std::string& page_file) {
  std::size_t count = 0;
  for (const html::Node* n : doc.by_tag("script")) {
    const auto src = n->attr("src");
    if (!src) continue;
    const auto file = resolve_href(page_file, *src);
    if (file && *file == kScriptFile) ++count;
  }
  return count;
}

void check_noise_runtime(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  auto js = b.files.find(kScriptFile);
  const bool runtime = js != b.files.end() && util::contains(js->second, kRuntimeBegin) &&
                       util::contains(js->second, kRuntimeEnd);
  if (!runtime) emit(out, r, kScriptFile, "page runtime not present");
  for (const auto& p : b.pages) {
    const std::string* text = page_text(b, p);
    if (!text) continue;
    const auto doc = parse_or_extract(p.file, *text);
    const auto islands = doc.find_all([](const html::Node& n) { return n.attr("id") == kRuntimeConfigId; });
    if (islands.size() != 1) {
      emit(out, r, p.file, "expected one runtime-config island, found " + std::to_string(islands.size()));
    } else if (!read_runtime_config(*text)) {
      emit(out, r, p.file, "runtime-config island is malformed");
    }
    const std::size_t scripts = count_main_script_tags(doc, p.file);
    if (scripts != 1) {
      emit(out, r, p.file, "expected the runtime script once, found " + std::to_string(scripts));
    }
  }
}

void check_audit(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out, char code) {
  for (const auto& f : audit_bundle(b).flags) {
    if (f.code == code) emit(out, r, f.file, f.detail);
  }
}

void check_plaintext(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  check_audit(b, r, out, 'a');
  check_audit(b, r, out, 'b');
}

void check_external(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  check_audit(b, r, out, 'c');
}

void check_encoded(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  check_audit(b, r, out, 'd');
}

void check_control_files(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  for (const auto& path : b.served_files()) {
    if (path == kDataFile) continue;
    const std::string& text = b.files.at(path);
    for (const char* control : {kSolutionFile, kMetadataFile, kTaskFile}) {
      if (contains_token(text, control)) emit(out, r, path, std::string("references ") + control);
    }
  }
}

void check_blocking_dialogs(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  for (const auto& [label, text] : served_scripts(b)) {
    for (const auto& call : find_blocking_calls(text)) {
      emit(out, r, label, call.name + "() call at offset " + std::to_string(call.offset));
    }
  }
}

void check_form_feedback(const WebsiteBundle& b, const QualityRule& r, std::vector<Finding>& out) {
  for (const auto& p : b.pages) {
    const std::string* text = page_text(b, p);
    if (!text) continue;
    const auto doc = parse_or_extract(p.file, *text);
    for (const html::Node* n : doc.find_all([](const html::Node& x) {
           return x.has_attr("required") && (x.tag == "input" || x.tag == "select" || x.tag == "textarea");
         })) {
      if (!n->has_attr("data-forge-message")) {
        emit(out, r, p.file, "required field " + n->attr("name").value_or(n->attr("id").value_or("?")) +
                                 " declares no message");
      }
    }
  }
}

const std::map<std::string, CheckFn>& check_table() {
  static const std::map<std::string, CheckFn> table = {
      {"dead_links", check_dead_links},
      {"missing_local_resources", check_missing_resources},
      {"stylesheet_linked", check_stylesheet},
      {"image_alt", check_image_alt},
      {"ambient_randomness", check_randomness},
      {"duplicate_ids", check_duplicate_ids},
      {"noise_runtime", check_noise_runtime},
      {"answer_plaintext", check_plaintext},
      {"external_references", check_external},
      {"encoded_data", check_encoded},
      {"control_files_exposed", check_control_files},
      {"blocking_dialogs", check_blocking_dialogs},
      {"form_feedback", check_form_feedback},
  };
  return table;
}

bool finding_less(const Finding& a, const Finding& b) {
  return std::tie(a.severity, a.rule_id, a.file, a.detail) < std::tie(b.severity, b.rule_id, b.file, b.detail);
}

std::string review_prompt(const WebsiteBundle& b, const QualityRule& r) {
  std::string s = "Review the pages below against this rule and answer with a JSON array of "
                  "{\"file\": ..., \"detail\": ...} objects, empty when nothing is wrong.\n\nRule " +
                  r.rule_id + " (" + r.check + "): " + r.description + "\n";
  for (const auto& p : b.pages) {
    auto it = b.files.find(p.file);
    if (it != b.files.end()) s += "\n--- " + p.file + " ---\n" + it->second + "\n";
  }
  return s;
}

// Parses the first JSON array in the reviewer's answer.
std::optional<json> review_findings(const std::string& text) {
  const auto b = text.find('[');
  const auto e = text.rfind(']');
  if (b == std::string::npos || e == std::string::npos || e < b) return std::nullopt;
  try {
    json j = json::parse(text.substr(b, e - b + 1));
    if (!j.is_array()) return std::nullopt;
    return j;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

} // namespace

Assessment assess(const WebsiteBundle& bundle, const RuleSet& rules, const ProviderProfile* reviewer) {
  Assessment a;
  for (const auto& r : rules.rules) {
    if (r.checker == Checker::Static) {
      auto it = check_table().find(r.check);
      if (it == check_table().end()) throw ConfigError("rule " + r.rule_id + ": unknown static check");
      it->second(bundle, r, a.findings);
      continue;
    }
    if (!reviewer || !reviewer->provider) {
      a.skipped.push_back(r.rule_id);
      continue;
    }
    ProviderRequest req;
    req.system_prompt = "You review generated websites for quality problems.";
    req.user_prompt = review_prompt(bundle, r);
    req.temperature = reviewer->temperature;
    req.max_tokens = reviewer->max_output_tokens;
    req.tag = "assess:" + r.rule_id;
    const auto parsed = review_findings(reviewer->provider->complete(req).text);
    if (!parsed) {
      a.skipped.push_back(r.rule_id);
      continue;
    }
    for (const auto& f : *parsed) {
      if (!f.is_object()) continue;
      emit(a.findings, r, f.value("file", ""), f.value("detail", ""));
    }
  }
  std::sort(a.findings.begin(), a.findings.end(), finding_less);
  return a;
}

RepairPlan plan_repairs(const std::vector<Finding>& findings, const RuleSet& rules) {
  RepairPlan plan;
  for (const auto& f : findings) {
    const QualityRule* r = rules.find(f.rule_id);
    plan.push_back({f, r && r->checker == Checker::Static ? repair_action_for(r->check) : RepairAction::Manual});
  }
  std::stable_sort(plan.begin(), plan.end(), [](const RepairStep& a, const RepairStep& b) {
    return std::tie(a.finding.severity, a.finding.rule_id) < std::tie(b.finding.severity, b.finding.rule_id);
  });
  return plan;
}

// ---- noise config --------------------------------------------------------------

void NoiseConfig::validate() const {
  if (cookie_banner_delay < 0) throw ConfigError("cookie banner delay must be non-negative");
  if (popup_delay_min < 0) throw ConfigError("popup delay minimum must be non-negative");
  if (popup_delay_min > popup_delay_max) throw ConfigError("popup delay minimum exceeds maximum");
  if (!network_delay.is_object()) throw ConfigError("network_delay must be an object of [lo, hi] ranges");
  for (auto it = network_delay.begin(); it != network_delay.end(); ++it) {
    const json& v = it.value();
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number() || v[0].get<double>() < 0 ||
        v[0].get<double>() > v[1].get<double>()) {
      throw ConfigError("network_delay " + it.key() + " must be [lo, hi] with 0 <= lo <= hi");
    }
  }
}

json NoiseConfig::to_json() const {
  return {{"cookie_banner_delay", cookie_banner_delay},
          {"popup_delay_min", popup_delay_min},
          {"popup_delay_max", popup_delay_max},
          {"suppression_keys", suppression_keys},
          {"network_delay", network_delay},
          {"seed", seed}};
}

NoiseConfig NoiseConfig::from_json(const json& j) {
  NoiseConfig c;
  try {
    c.cookie_banner_delay = j.value("cookie_banner_delay", c.cookie_banner_delay);
    c.popup_delay_min = j.value("popup_delay_min", c.popup_delay_min);
    c.popup_delay_max = j.value("popup_delay_max", c.popup_delay_max);
    if (j.contains("suppression_keys")) c.suppression_keys = j.at("suppression_keys").get<std::vector<std::string>>();
    if (j.contains("network_delay")) c.network_delay = j.at("network_delay");
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("noise config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- runtime config ------------------------------------------------------------

std::string RuntimeConfig::cookie_key() const {
  return !suppression_keys.empty() ? suppression_keys[0] : "forge_cookie_consent";
}

std::string RuntimeConfig::popup_key() const {
  return suppression_keys.size() > 1 ? suppression_keys[1] : "forge_popup_dismissed";
}

json RuntimeConfig::to_json() const {
  return {{"cookie_delay_ms", cookie_delay_ms},
          {"popup_delay_min_ms", popup_delay_min_ms},
          {"popup_delay_max_ms", popup_delay_max_ms},
          {"suppression_keys", suppression_keys},
          {"judge_rules", judge_rules},
          {"seed", seed}};
}

RuntimeConfig RuntimeConfig::from_json(const json& j) {
  RuntimeConfig c;
  c.cookie_delay_ms = j.at("cookie_delay_ms").get<int>();
  c.popup_delay_min_ms = j.at("popup_delay_min_ms").get<int>();
  c.popup_delay_max_ms = j.at("popup_delay_max_ms").get<int>();
  c.suppression_keys = j.value("suppression_keys", std::vector<std::string>{});
  c.judge_rules = j.value("judge_rules", json());
  c.seed = j.value("seed", 0u);
  return c;
}

RuntimeConfig runtime_config_for(const WebsiteBundle& bundle, const NoiseConfig& config) {
  RuntimeConfig c;
  c.cookie_delay_ms = config.cookie_banner_delay;
  c.popup_delay_min_ms = config.popup_delay_min;
  c.popup_delay_max_ms = config.popup_delay_max;
  c.suppression_keys = config.suppression_keys;
  c.seed = config.seed;
  if (bundle.shipped_judge) {
    c.judge_rules = bundle.shipped_judge->to_json(true);
    json codes = bundle.answer.deceptive_codes;
    auto gt = bundle.answer.ground_truth.find(bundle.answer.code_field);
    if (gt != bundle.answer.ground_truth.end()) codes[kCorrectOutcome] = gt->second;
    c.judge_rules["codes"] = codes;
  }
  return c;
}

namespace {

std::string island_payload(const RuntimeConfig& c) {
  return util::replace_all(c.to_json().dump(), "<", "\\u003c");
}

const html::Node* find_island(const html::Document& doc) {
  const auto found = doc.find_all([](const html::Node& n) { return n.tag == "script" && n.attr("id") == kRuntimeConfigId; });
  return found.empty() ? nullptr : found.front();
}

} // namespace

std::optional<RuntimeConfig> read_runtime_config(std::string_view page_html) {
  try {
    const auto doc = html::Document::parse(page_html);
    const html::Node* island = find_island(doc);
    if (!island) return std::nullopt;
    return RuntimeConfig::from_json(json::parse(island->text));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string rewrite_runtime_seed(std::string_view page_html, std::uint32_t seed) {
  const auto doc = html::Document::parse(page_html);
  const html::Node* island = find_island(doc);
  if (!island) return std::string(page_html);
  RuntimeConfig c;
  try {
    c = RuntimeConfig::from_json(json::parse(island->text));
  } catch (const std::exception&) {
    return std::string(page_html);
  }
  c.seed = seed;
  std::string out(page_html);
  out.replace(island->open_end, island->close_start - island->open_end, island_payload(c));
  return out;
}

double Mulberry32::next() {
  state_ += 0x6D2B79F5u;
  std::uint32_t t = state_;
  t = (t ^ (t >> 15)) * (t | 1u);
  t = (t + (t ^ (t >> 7)) * (t | 61u)) ^ t;
  return static_cast<double>(t ^ (t >> 14)) / 4294967296.0;
}

std::uint32_t runtime_load_seed(std::uint32_t seed, std::uint32_t load) {
  return seed ^ ((load + 1u) * 0x9E3779B1u);
}

int popup_delay_ms(const RuntimeConfig& config, std::uint32_t load) {
  Mulberry32 rng(runtime_load_seed(config.seed, load));
  const double span = config.popup_delay_max_ms - config.popup_delay_min_ms;
  return config.popup_delay_min_ms + static_cast<int>(std::floor(rng.next() * span));
}

// ---- page rewriting ------------------------------------------------------------

namespace {

struct Edit {
  std::size_t offset;
  std::size_t erase;
  std::string insert;
};

std::string apply_edits(std::string text, std::vector<Edit> edits) {
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.offset > b.offset; });
  for (const auto& e : edits) text.replace(e.offset, e.erase, e.insert);
  return text;
}

std::string rel_prefix(const std::string& file) {
  std::string out;
  for (char c : file) {
    if (c == '/') out += "../";
  }
  return out;
}

// Relative href from one bundle file to another.
std::string relative_href(const std::string& from, const std::string& to) {
  auto dirs = [](const std::string& f) {
    std::vector<std::string> parts;
    std::size_t b = 0, e;
    while ((e = f.find('/', b)) != std::string::npos) {
      parts.push_back(f.substr(b, e - b));
      b = e + 1;
    }
    return parts;
  };
  const auto a = dirs(from);
  auto t = dirs(to);
  std::size_t common = 0;
  while (common < a.size() && common < t.size() && a[common] == t[common]) ++common;
  std::string out;
  for (std::size_t i = common; i < a.size(); ++i) out += "../";
  for (std::size_t i = common; i < t.size(); ++i) out += t[i] + "/";
  return out + to.substr(to.rfind('/') == std::string::npos ? 0 : to.rfind('/') + 1);
}

// Position just before </body>, or the end of the document.
std::size_t body_end(const html::Document& doc, const std::string& text) {
  const html::Node* body = doc.first("body");
  if (body && body->close_start < body->end) return body->close_start;
  const html::Node* root = doc.first("html");
  if (root && root->close_start < root->end) return root->close_start;
  return text.size();
}

std::string with_runtime(const std::string& page_file, std::string text, const RuntimeConfig& config) {
  const std::string payload = island_payload(config);
  {
    const auto doc = html::Document::parse(text);
    std::vector<Edit> edits;
    const auto islands = doc.find_all([](const html::Node& n) { return n.tag == "script" && n.attr("id") == kRuntimeConfigId; });
    for (std::size_t i = 0; i < islands.size(); ++i) {
      if (i == 0) {
        edits.push_back({islands[i]->open_end, islands[i]->close_start - islands[i]->open_end, payload});
      } else {
        edits.push_back({islands[i]->start, islands[i]->end - islands[i]->start, ""});
      }
    }
    bool first = true;
    for (const html::Node* n : doc.by_tag("script")) {
      const auto src = n->attr("src");
      const auto file = src ? resolve_href(page_file, *src) : std::nullopt;
      if (!file || *file != kScriptFile) continue;
      if (!first) edits.push_back({n->start, n->end - n->start, ""});
      first = false;
    }
    if (first) {
      edits.push_back({body_end(doc, text), 0, "<script src=\"" + rel_prefix(page_file) + kScriptFile + "\"></script>\n"});
    }
    text = apply_edits(std::move(text), std::move(edits));
  }
  const auto doc = html::Document::parse(text);
  if (find_island(doc)) return text;
  std::size_t at = body_end(doc, text);
  for (const html::Node* n : doc.by_tag("script")) {
    const auto src = n->attr("src");
    const auto file = src ? resolve_href(page_file, *src) : std::nullopt;
    if (file && *file == kScriptFile) {
      at = n->start;
      break;
    }
  }
  text.insert(at, "<script type=\"application/json\" id=\"" + std::string(kRuntimeConfigId) + "\">" + payload +
                      "</script>\n");
  return text;
}

std::string with_runtime_script(const std::string& js) {
  const std::string block = std::string(kRuntimeBegin) + "\n" + page_runtime_source() + kRuntimeEnd + "\n";
  const auto b = js.find(kRuntimeBegin);
  if (b != std::string::npos) {
    const auto e = js.find(kRuntimeEnd, b);
    if (e != std::string::npos) {
      std::size_t stop = e + std::string_view(kRuntimeEnd).size();
      if (stop < js.size() && js[stop] == '\n') ++stop;
      return js.substr(0, b) + block + js.substr(stop);
    }
  }
  std::string out = js;
  if (!out.empty() && out.back() != '\n') out += '\n';
  return out + block;
}

} // namespace

WebsiteBundle inject_noise(WebsiteBundle bundle, const NoiseConfig& config) {
  config.validate();
  const RuntimeConfig rc = runtime_config_for(bundle, config);
  for (const auto& p : bundle.pages) {
    auto it = bundle.files.find(p.file);
    if (it == bundle.files.end()) throw RepairError(p.file + ": page file missing");
    try {
      it->second = with_runtime(p.file, it->second, rc);
    } catch (const ParseError& e) {
      throw RepairError(p.file + ": " + e.what());
    }
  }
  bundle.files[kScriptFile] = with_runtime_script(bundle.files[kScriptFile]);
  if (std::none_of(bundle.assets.begin(), bundle.assets.end(),
                   [](const AssetEntry& a) { return a.file == kScriptFile; })) {
    bundle.assets.push_back({AssetKind::Script, kScriptFile});
  }
  bundle.network_delay = config.network_delay;
  bundle.sync_control_files();
  return bundle;
}

// ---- blocking dialogs ----------------------------------------------------------

namespace {

std::string replacement_for(const std::string& name) {
  if (name == "alert") return "forgeRuntime.inlineError";
  if (name == "confirm") return "forgeRuntime.inlineConfirm";
  return "forgeRuntime.inlinePrompt";
}

std::string rewrite_calls(const std::string& text) {
  std::string out = text;
  const auto calls = find_blocking_calls(text);
  for (auto it = calls.rbegin(); it != calls.rend(); ++it) {
    out.replace(it->offset, it->name.size(), replacement_for(it->name));
  }
  return out;
}

} // namespace

WebsiteBundle replace_blocking_dialogs(WebsiteBundle bundle) {
  bool changed = false;
  for (const auto& path : bundle.served_files()) {
    std::string& text = bundle.files.at(path);
    if (util::ends_with(path, ".js")) {
      const std::string next = rewrite_calls(text);
      if (next != text) {
        text = next;
        changed = true;
      }
      continue;
    }
    if (!util::ends_with(path, ".html") && !util::ends_with(path, ".htm")) continue;
    const auto doc = html::Document::parse(text);
    std::vector<Edit> edits;
    for (const html::Node* n : doc.find_all([](const html::Node& x) { return x.is_element(); })) {
      if (is_js_script(*n)) {
        const std::string body = text.substr(n->open_end, n->close_start - n->open_end);
        const std::string next = rewrite_calls(body);
        if (next != body) edits.push_back({n->open_end, body.size(), next});
      }
      const bool handlers = std::any_of(n->attrs.begin(), n->attrs.end(),
                                        [](const auto& a) { return is_handler_attr(a.first); });
      if (handlers) {
        const std::string tag = text.substr(n->start, n->open_end - n->start);
        const std::string next = rewrite_calls(tag);
        if (next != tag) edits.push_back({n->start, tag.size(), next});
      }
    }
    if (!edits.empty()) {
      text = apply_edits(text, std::move(edits));
      changed = true;
    }
  }
  if (changed) bundle.sync_control_files();
  return bundle;
}

// ---- dead links ----------------------------------------------------------------

namespace {

struct LinkSite {
  std::string page_file;
  const html::Node* node = nullptr;
  std::string attr;  // href, data-href or action
  std::string href;
};

std::string title_prefix(const std::string& page_html) {
  try {
    const auto doc = html::Document::parse(page_html);
    const html::Node* t = doc.first("title");
    if (!t) return {};
    const std::string s = t->text_content();
    const auto bar = s.find(" | ");
    return bar == std::string::npos ? s : s.substr(0, bar);
  } catch (const ParseError&) {
    return {};
  }
}

std::string site_name(const WebsiteBundle& b) {
  auto it = b.files.find("index.html");
  if (it != b.files.end()) {
    const auto doc = html::Document::parse(it->second);
    if (const html::Node* t = doc.first("title")) {
      const std::string s = t->text_content();
      for (const char* sep : {" | ", " - "}) {
        const auto at = s.rfind(sep);
        if (at != std::string::npos) return s.substr(at + std::string_view(sep).size());
      }
      if (!s.empty()) return s;
    }
  }
  return b.task.title.empty() ? "This site" : b.task.title;
}

std::string placeholder_file(const WebsiteBundle& b) {
  std::map<std::string, int> prefixes;
  for (const auto& p : b.pages) {
    const auto us = p.page_id.find('_');
    if (us != std::string::npos && us > 0) prefixes[p.page_id.substr(0, us)] += 1;
  }
  std::string best = "page";
  int count = 0;
  for (const auto& [prefix, n] : prefixes) {
    if (n > count) {
      best = prefix;
      count = n;
    }
  }
  return best + "_generic.html";
}

std::string outer(const std::string& text, const html::Node* n) {
  return n ? text.substr(n->start, n->end - n->start) : std::string();
}

// Lowercased link text keyed to a short description for supporting pages.
std::string supporting_blurb(const std::string& title, const std::string& site) {
  const std::string t = util::to_lower(title);
  struct Topic {
    const char* key;
    const char* text;
  };
  static const Topic kTopics[] = {
      {"blog", "Stories, planning notes and seasonal ideas from the %s team."},
      {"about", "%s started as a small directory and now helps thousands of people plan their events."},
      {"contact", "Reach the %s support team by email at support@example.com or through the help desk, Monday to Friday."},
      {"career", "%s is hiring across product, support and partnerships. Open roles are posted here first."},
      {"login", "Sign in to your %s account to see saved searches and reservations."},
      {"sign in", "Sign in to your %s account to see saved searches and reservations."},
      {"register", "Create a %s account to save searches and manage reservations."},
      {"sign up", "Create a %s account to save searches and manage reservations."},
      {"privacy", "How %s collects, stores and uses personal information."},
      {"terms", "The conditions that apply when you use %s and its booking services."},
      {"gallery", "Photos shared by %s partners and recent guests."},
      {"help", "Answers to common questions about using %s."},
      {"faq", "Answers to common questions about using %s."},
  };
  for (const auto& topic : kTopics) {
    if (util::contains(t, topic.key)) return util::replace_all(topic.text, "%s", site);
  }
  return "More about " + title + " from " + site + ".";
}

std::string page_shell(const WebsiteBundle& b, const std::string& file, const std::string& title,
                       const std::string& site, const std::string& header, const std::string& footer,
                       const std::string& main) {
  const std::string rel = rel_prefix(file);
  std::string s = "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
  s += "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n";
  s += "<title>" + html::escape_text(title) + " | " + html::escape_text(site) + "</title>\n";
  if (b.files.count(kStyleFile)) s += "<link rel=\"stylesheet\" href=\"" + rel + kStyleFile + "\">\n";
  s += "</head>\n<body>\n";
  if (!header.empty()) s += header + "\n";
  s += main;
  if (!footer.empty()) s += footer + "\n";
  if (b.files.count(kScriptFile)) s += "<script src=\"" + rel + kScriptFile + "\"></script>\n";
  s += "</body>\n</html>\n";
  return s;
}

std::string dir_of(const std::string& file) {
  const auto slash = file.rfind('/');
  return slash == std::string::npos ? std::string() : file.substr(0, slash);
}

// Header and footer markup of a page, usable verbatim on a page in the same directory.
std::pair<std::string, std::string> chrome_of(const WebsiteBundle& b, const std::string& source, const std::string& target) {
  if (dir_of(source) != dir_of(target)) return {};
  const std::string& text = b.files.at(source);
  const auto doc = html::Document::parse(text);
  const html::Node* header = doc.first("header");
  if (!header) header = doc.first("nav");
  return {outer(text, header), outer(text, doc.first("footer"))};
}

std::string set_attr_in_tag(const std::string& tag, const std::string& attr, const std::string& value) {
  const std::regex re("(\\s)(" + attr + ")(\\s*=\\s*)(\"[^\"]*\"|'[^']*'|[^\\s>]+)", std::regex::icase);
  std::smatch m;
  if (std::regex_search(tag, m, re)) {
    return tag.substr(0, static_cast<std::size_t>(m.position(4))) + "\"" + html::escape_attr(value) + "\"" +
           tag.substr(static_cast<std::size_t>(m.position(4) + m.length(4)));
  }
  // Bare attribute without a value.
  const std::regex bare("(\\s)(" + attr + ")(?=[\\s/>])", std::regex::icase);
  if (std::regex_search(tag, m, bare)) {
    const std::size_t end = static_cast<std::size_t>(m.position(2) + m.length(2));
    return tag.substr(0, end) + "=\"" + html::escape_attr(value) + "\"" + tag.substr(end);
  }
  return tag;
}

bool is_placeholder_href(const std::string& href) {
  const std::string h = util::trim(href);
  return h.empty() || h == "#" || util::starts_with(util::to_lower(h), "javascript:");
}

std::vector<LinkSite> dead_sites(const WebsiteBundle& b, std::vector<html::Document>& docs) {
  std::map<std::string, std::string> routes;
  for (const auto& p : b.pages) routes[p.route] = p.page_id;
  std::vector<LinkSite> out;
  for (const auto& page : b.pages) {
    docs.push_back(parse_or_extract(page.file, b.files.at(page.file)));
    const auto& doc = docs.back();
    for (const html::Node* n : doc.find_all([](const html::Node& x) {
           return (x.tag == "a" && x.has_attr("href")) || (x.tag == "button" && x.has_attr("data-href")) ||
                  (x.tag == "form" && x.has_attr("action"));
         })) {
      if (n->has_attr("data-forge-action") || n->has_attr("onclick")) continue;
      const std::string attr = n->tag == "a" ? "href" : n->tag == "button" ? "data-href" : "action";
      const std::string href = *n->attr(attr);
      const std::string h = util::trim(href);
      const std::string lower = util::to_lower(h);
      if (util::starts_with(lower, "mailto:") || util::starts_with(lower, "tel:")) continue;
      if (h.size() > 1 && h[0] == '#') continue;
      if (is_placeholder_href(h)) {
        out.push_back({page.file, n, attr, href});
        continue;
      }
      if (is_external_href(h)) continue;
      if (routes.count(h.substr(0, h.find_first_of("?#")))) continue;
      const auto file = resolve_href(page.file, h);
      if (file && b.files.count(*file)) continue;
      out.push_back({page.file, n, attr, href});
    }
  }
  return out;
}

// File a supporting page should live at for a dead href, or empty when the
// link should go to the generic placeholder instead.
std::string supporting_target(const std::string& from_file, const std::string& href) {
  if (is_placeholder_href(href)) return {};
  const std::string h = util::trim(href);
  const auto file = resolve_href(from_file, h);
  if (!file) return {};
  if (util::ends_with(*file, ".html") || util::ends_with(*file, ".htm")) return *file;
  const std::string base = file->substr(file->rfind('/') == std::string::npos ? 0 : file->rfind('/') + 1);
  if (!h.empty() && h[0] == '/' && base.find('.') == std::string::npos) return *file + ".html";
  return {};
}

} // namespace

WebsiteBundle resolve_dead_links(WebsiteBundle bundle) {
  const std::string site = site_name(bundle);
  bool changed = false;
  for (int round = 0; round < 8; ++round) {
    std::vector<html::Document> docs;
    docs.reserve(bundle.pages.size());
    const auto sites = dead_sites(bundle, docs);
    if (sites.empty()) break;
    changed = true;

    // Supporting pages for missing files, in first-seen order.
    std::vector<std::pair<std::string, const LinkSite*>> to_create;
    std::set<std::string> planned;
    for (const auto& s : sites) {
      const std::string target = supporting_target(s.page_file, s.href);
      if (target.empty() || bundle.files.count(target) || !planned.insert(target).second) continue;
      to_create.emplace_back(target, &s);
    }
    std::map<std::string, std::string> new_pages;
    for (const auto& [file, s] : to_create) {
      std::string title = s->node->tag == "form" ? std::string() : s->node->text_content();
      if (title.empty()) title = fs::path(file).stem().string();
      const auto [header, footer] = chrome_of(bundle, s->page_file, file);
      std::string main = "<main class=\"page-supporting\">\n<h1>" + html::escape_text(title) + "</h1>\n<p>" +
                         html::escape_text(supporting_blurb(title, site)) + "</p>\n<p><a href=\"" +
                         relative_href(file, "index.html") + "\">Return to the home page</a></p>\n</main>\n";
      new_pages[file] = page_shell(bundle, file, title, site, header, footer, main);
    }

    // Placeholder for links that have no meaningful target.
    std::string placeholder;
    std::vector<const LinkSite*> retarget;
    for (const auto& s : sites) {
      if (supporting_target(s.page_file, s.href).empty()) retarget.push_back(&s);
    }
    if (!retarget.empty()) {
      placeholder = placeholder_file(bundle);
      if (!bundle.files.count(placeholder) && !new_pages.count(placeholder)) {
        const std::string back = retarget.front()->page_file;
        std::string back_title = title_prefix(bundle.files.at(back));
        if (back_title.empty()) back_title = "previous page";
        const bool has_contact = bundle.files.count("contact.html") || new_pages.count("contact.html");
        const auto [header, footer] = chrome_of(bundle, back, placeholder);
        std::string main = "<main class=\"page-unavailable\">\n<h1>Content Unavailable</h1>\n<p>The page you "
                           "selected on " +
                           html::escape_text(site) + " is not available right now.</p>\n<p>";
        if (has_contact) {
          main += "<a href=\"" + relative_href(placeholder, "contact.html") + "\">Contact Support</a> ";
        }
        main += "<a href=\"" + relative_href(placeholder, back) + "\">Back to " + html::escape_text(back_title) +
                "</a> <a href=\"" + relative_href(placeholder, "index.html") + "\">Home</a></p>\n</main>\n";
        new_pages[placeholder] = page_shell(bundle, placeholder, "Content Unavailable", site, header, footer, main);
      }
    }

    // Retarget placeholder-style links on existing pages.
    std::map<std::string, std::vector<Edit>> edits;
    for (const LinkSite* s : retarget) {
      const std::string& text = bundle.files.at(s->page_file);
      const std::string tag = text.substr(s->node->start, s->node->open_end - s->node->start);
      edits[s->page_file].push_back(
          {s->node->start, tag.size(), set_attr_in_tag(tag, s->attr, relative_href(s->page_file, placeholder))});
    }
    docs.clear();
    for (auto& [file, list] : edits) bundle.files[file] = apply_edits(bundle.files[file], std::move(list));

    for (const auto& [file, content] : new_pages) {
      std::string id = file.substr(0, file.rfind('.'));
      id = util::replace_all(id, "/", "_");
      std::string route = "/" + file.substr(0, file.rfind('.'));
      for (const auto& p : bundle.pages) {
        if (p.route == route) route = "/" + file;
      }
      bundle.files[file] = content;
      bundle.pages.push_back({id, route, file});
    }
  }
  if (!changed) return bundle;
  bundle.sync_control_files();
  if (bundle.nav.dead_count() != 0) {
    throw RepairError("dead links remain after repair: " + std::to_string(bundle.nav.dead_count()));
  }
  return bundle;
}

// ---- verify and pipeline -------------------------------------------------------

std::vector<Finding> verify_repairs(const WebsiteBundle& bundle, const std::vector<Finding>& findings,
                                    const RuleSet& rules, const ProviderProfile* reviewer) {
  std::set<std::string> failing;
  for (const auto& f : findings) failing.insert(f.rule_id);
  RuleSet subset;
  for (const auto& r : rules.rules) {
    if (failing.count(r.rule_id)) subset.rules.push_back(r);
  }
  return assess(bundle, subset, reviewer).findings;
}

bool RefinementReport::clean() const {
  return std::none_of(residual.begin(), residual.end(), [](const Finding& f) { return f.severity == Severity::Blocker; });
}

json RefinementReport::to_json() const {
  json b = json::array(), r = json::array(), p = json::array();
  for (const auto& f : before) b.push_back(forge::to_json(f));
  for (const auto& f : residual) r.push_back(forge::to_json(f));
  for (const auto& s : plan) {
    json step = forge::to_json(s.finding);
    step["action"] = repair_action_name(s.action);
    p.push_back(step);
  }
  return {{"before", b},
          {"plan", p},
          {"applied", applied},
          {"residual", r},
          {"skipped", skipped},
          {"pages_before", pages_before},
          {"pages_after", pages_after},
          {"files_before", files_before},
          {"files_after", files_after}};
}

std::pair<WebsiteBundle, RefinementReport> refine_bundle(WebsiteBundle bundle, const NoiseConfig& config,
                                                         const RuleSet& rules, const ProviderProfile* reviewer) {
  config.validate();
  RefinementReport report;
  report.pages_before = bundle.pages.size();
  report.files_before = bundle.served_files().size();
  Assessment a = assess(bundle, rules, reviewer);
  report.before = a.findings;
  report.skipped = a.skipped;
  report.plan = plan_repairs(a.findings, rules);

  std::set<RepairAction> done;
  for (const auto& step : report.plan) {
    if (step.action == RepairAction::Manual || step.action == RepairAction::InjectNoise) continue;
    if (!done.insert(step.action).second) continue;
    if (step.action == RepairAction::ResolveDeadLinks) bundle = resolve_dead_links(std::move(bundle));
    if (step.action == RepairAction::ReplaceBlockingDialogs) bundle = replace_blocking_dialogs(std::move(bundle));
    report.applied.push_back(repair_action_name(step.action));
  }
  bundle = inject_noise(std::move(bundle), config);
  report.applied.push_back(repair_action_name(RepairAction::InjectNoise));

  report.residual = verify_repairs(bundle, report.before, rules, reviewer);
  report.pages_after = bundle.pages.size();
  report.files_after = bundle.served_files().size();
  return {std::move(bundle), std::move(report)};
}

} // namespace forge
