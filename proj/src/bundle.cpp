#include "forge/bundle.hpp"

#include "forge/codec.hpp"
#include "forge/errors.hpp"
#include "forge/html.hpp"
#include "forge/util.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace forge {

using nlohmann::json;
namespace fs = std::filesystem;

bool is_control_file(const std::string& path) {
  return path == kSolutionFile || path == kMetadataFile || path == kTaskFile;
}

std::string asset_kind_name(AssetKind k) {
  switch (k) {
    case AssetKind::Image: return "image";
    case AssetKind::Chart: return "chart";
    case AssetKind::Stylesheet: return "stylesheet";
    case AssetKind::Script: return "script";
    case AssetKind::Data: return "data";
  }
  return "image";
}

std::optional<AssetKind> asset_kind_from_name(const std::string& s) {
  for (auto k : {AssetKind::Image, AssetKind::Chart, AssetKind::Stylesheet, AssetKind::Script, AssetKind::Data}) {
    if (asset_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

std::size_t NavGraph::dead_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const NavEdge& e) { return e.target == EdgeTarget::Dead; }));
}

// ---- answers -----------------------------------------------------------------

std::string code_shape(const std::string& code) {
  std::string out;
  for (unsigned char c : code) {
    if (std::isalpha(c)) out += 'A';
    else if (std::isdigit(c)) out += '9';
    else out += static_cast<char>(c);
  }
  return out;
}

void check_answer_config(const EncodedAnswerConfig& config) {
  std::map<std::string, std::string> gt;
  for (const auto& [k, v] : config.ground_truth) {
    gt[k] = decode_secret(v);
    if (gt[k].empty()) throw ConfigError("ground truth field " + k + " decodes to empty text");
  }
  if (!config.code_field.empty() && !gt.count(config.code_field)) {
    throw ConfigError("code field " + config.code_field + " has no ground truth");
  }
  std::set<std::string> seen;
  if (!config.code_field.empty()) seen.insert(gt[config.code_field]);
  for (const auto& [id, v] : config.deceptive_codes) {
    const std::string code = decode_secret(v);
    if (code.empty()) throw ConfigError("deceptive code " + id + " decodes to empty text");
    if (!seen.insert(code).second) throw ConfigError("deceptive code " + id + " duplicates another code");
    if (!config.code_field.empty() && code_shape(code) != code_shape(gt[config.code_field])) {
      throw ConfigError("deceptive code " + id + " does not share the ground-truth code format");
    }
  }
}

std::string resolve_submission(const SubmissionState& state, const EncodedAnswerConfig& config,
                               const JudgeProgram& rules) {
  const std::string outcome = rules.match(state);
  if (outcome == kCorrectOutcome) {
    auto it = config.ground_truth.find(config.code_field);
    if (config.code_field.empty() || it == config.ground_truth.end()) {
      throw ConfigError("answer config has no ground-truth code");
    }
    return decode_secret(it->second);
  }
  auto it = config.deceptive_codes.find(outcome);
  if (it == config.deceptive_codes.end()) {
    throw ConfigError("mistake pattern '" + outcome + "' has no deceptive code");
  }
  return decode_secret(it->second);
}

std::vector<std::string> check_submission_state(const SubmissionState& state,
                                                const std::vector<SchemaField>& schema) {
  std::vector<std::string> problems;
  for (const auto& f : schema) {
    if (!state.is_object() || !state.contains(f.name) || state[f.name].is_null()) {
      problems.push_back(f.name + ": missing");
      continue;
    }
    const json& v = state[f.name];
    const std::string text = v.is_string() ? v.get<std::string>() : v.dump();
    bool ok = true;
    if (f.type == "date") {
      int y, m, d;
      ok = v.is_string() && util::parse_iso_date(text, y, m, d);
    } else if (f.type == "integer") {
      ok = v.is_number_integer() ||
           (v.is_string() && !text.empty() &&
            std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); }));
    } else if (f.type == "number") {
      const json wrapped = {{"x", v}};
      ok = !expr::Expr::parse("number(x)").eval({&wrapped, nullptr, nullptr}).is_null();
    } else if (f.type == "string") {
      ok = v.is_string();
    }
    if (!ok) {
      problems.push_back(f.name + ": expected " + f.type);
      continue;
    }
    if (!f.options.empty()) {
      const std::string lowered = util::to_lower(text);
      const bool listed = std::any_of(f.options.begin(), f.options.end(),
                                      [&](const std::string& o) { return util::to_lower(o) == lowered; });
      if (!listed) problems.push_back(f.name + ": '" + text + "' is not an allowed option");
    }
  }
  return problems;
}

// ---- solution / task files ------------------------------------------------------

json to_json(const SolutionFile& s) {
  json steps = json::array();
  for (const auto& st : s.steps) {
    json j = {{"ordinal", st.ordinal}, {"description", st.description}, {"kind", step_kind_name(st.kind)}};
    if (st.action) {
      json a = {{"kind", st.action->kind}};
      if (!st.action->url.empty()) a["url"] = st.action->url;
      if (!st.action->selector.empty()) a["selector"] = st.action->selector;
      if (!st.action->text.empty() || st.action->kind == "input") a["text"] = st.action->text;
      if (!st.action->field.empty()) a["field"] = st.action->field;
      j["action"] = a;
    }
    steps.push_back(j);
  }
  json schema = json::array();
  for (const auto& f : s.submission_schema) {
    json j = {{"name", f.name}, {"type", f.type}};
    if (!f.options.empty()) j["options"] = f.options;
    schema.push_back(j);
  }
  json out = {{"steps", steps},
              {"expected_final_state", s.expected_final_state},
              {"submission_schema", schema},
              {"witness_state", s.witness_state},
              {"answer_map", s.answer_map}};
  if (s.judge) out["judge"] = s.judge->to_json(false);
  return out;
}

SolutionFile solution_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("solution file must be an object");
  SolutionFile s;
  int expect = 1;
  for (const auto& st : j.value("steps", json::array())) {
    SolutionAction a;
    a.ordinal = st.value("ordinal", expect);
    if (a.ordinal != expect++) throw ParseError("solution step ordinals must be contiguous from 1");
    a.description = st.value("description", "");
    auto kind = step_kind_from_name(st.value("kind", "navigate"));
    if (!kind) throw ParseError("unknown solution step kind '" + st.value("kind", "") + "'");
    a.kind = *kind;
    if (st.contains("action") && !st["action"].is_null()) {
      const json& aj = st["action"];
      ActionSpec spec;
      spec.kind = aj.value("kind", "");
      static const std::set<std::string> kKinds = {"navigate", "click", "input", "read", "scroll", "back"};
      if (!kKinds.count(spec.kind)) throw ParseError("unknown solution action kind '" + spec.kind + "'");
      spec.url = aj.value("url", "");
      spec.selector = aj.value("selector", "");
      spec.text = aj.value("text", "");
      spec.field = aj.value("field", "");
      a.action = spec;
    }
    s.steps.push_back(std::move(a));
  }
  const json efs = j.value("expected_final_state", json::object());
  for (auto it = efs.begin(); it != efs.end(); ++it) s.expected_final_state[it.key()] = it.value().get<std::string>();
  for (const auto& f : j.value("submission_schema", json::array())) {
    SchemaField sf;
    sf.name = f.at("name").get<std::string>();
    sf.type = f.value("type", "string");
    for (const auto& o : f.value("options", json::array())) sf.options.push_back(o.get<std::string>());
    s.submission_schema.push_back(std::move(sf));
  }
  s.witness_state = j.value("witness_state", json::object());
  const json am = j.value("answer_map", json::object());
  for (auto it = am.begin(); it != am.end(); ++it) s.answer_map[it.key()] = it.value().get<std::string>();
  if (j.contains("judge") && !j["judge"].is_null()) s.judge = JudgeProgram::from_json(j["judge"]);
  return s;
}

json to_json(const TaskInfo& t) {
  return {{"task_id", t.task_id},         {"title", t.title},
          {"user_query", t.user_query},   {"domain", domain_key(t.domain)},
          {"level", t.level},             {"difficulty", to_json(t.difficulty)}};
}

TaskInfo task_info_from_json(const json& j) {
  TaskInfo t;
  t.task_id = j.value("task_id", "");
  t.title = j.value("title", "");
  t.user_query = j.value("user_query", "");
  auto d = domain_from_string(j.value("domain", ""));
  if (!d) throw ParseError("task file has an unknown domain");
  t.domain = *d;
  t.level = j.value("level", 1);
  t.difficulty = difficulty_from_json(j.at("difficulty"));
  return t;
}

// ---- bundle storage ------------------------------------------------------------

std::vector<std::string> WebsiteBundle::served_files() const {
  std::vector<std::string> out;
  for (const auto& [path, _] : files) {
    if (!is_control_file(path)) out.push_back(path);
  }
  return out;
}

const PageEntry* WebsiteBundle::page_by_file(const std::string& file) const {
  for (const auto& p : pages) {
    if (p.file == file) return &p;
  }
  return nullptr;
}

const PageEntry* WebsiteBundle::page_by_id(const std::string& id) const {
  for (const auto& p : pages) {
    if (p.page_id == id) return &p;
  }
  return nullptr;
}

std::optional<std::pair<double, double>> latency_range(const WebsiteBundle& bundle, const std::string& file) {
  const json& nd = bundle.network_delay;
  if (!nd.is_object() || nd.empty()) return std::nullopt;
  const PageEntry* entry = bundle.page_by_file(file);
  const json* range = nullptr;
  if (entry && nd.contains(entry->route)) range = &nd.at(entry->route);
  else if (nd.contains("/" + file)) range = &nd.at("/" + file);
  else if (nd.contains("default")) range = &nd.at("default");
  if (!range || !range->is_array() || range->size() != 2) return std::nullopt;
  return std::make_pair((*range)[0].get<double>(), (*range)[1].get<double>());
}

std::string render_data_json(const WebsiteBundle& bundle) {
  json j = {{"answer_type", answer_type_name(bundle.answer.answer_type)},
            {"ground_truth", bundle.answer.ground_truth},
            {"deceptive_codes", bundle.answer.deceptive_codes}};
  if (!bundle.answer.code_field.empty()) j["code_field"] = bundle.answer.code_field;
  if (bundle.shipped_judge) j["judge"] = bundle.shipped_judge->to_json(true);
  return j.dump(2) + "\n";
}

namespace {

json nav_to_json(const NavGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges) {
    const char* t = e.target == EdgeTarget::Page ? "page" : e.target == EdgeTarget::External ? "external" : "dead";
    edges.push_back({{"from", e.from}, {"text", e.text}, {"href", e.href}, {"target", t}, {"to", e.to}});
  }
  return {{"nodes", g.nodes}, {"edges", edges}};
}

NavGraph nav_from_json(const json& j) {
  NavGraph g;
  for (const auto& n : j.value("nodes", json::array())) g.nodes.push_back(n.get<std::string>());
  for (const auto& e : j.value("edges", json::array())) {
    NavEdge edge;
    edge.from = e.value("from", "");
    edge.text = e.value("text", "");
    edge.href = e.value("href", "");
    edge.to = e.value("to", "");
    const std::string t = e.value("target", "dead");
    edge.target = t == "page" ? EdgeTarget::Page : t == "external" ? EdgeTarget::External : EdgeTarget::Dead;
    g.edges.push_back(edge);
  }
  return g;
}

} // namespace

void WebsiteBundle::sync_control_files() {
  nav = extract_nav_graph(*this);
  files[kDataFile] = render_data_json(*this);
  if (std::none_of(assets.begin(), assets.end(), [](const AssetEntry& a) { return a.file == kDataFile; })) {
    assets.push_back({AssetKind::Data, kDataFile});
  }

  json page_list = json::array();
  for (const auto& p : pages) page_list.push_back({{"page_id", p.page_id}, {"route", p.route}, {"file", p.file}});
  json asset_list = json::array();
  std::size_t media = 0, code = 0;
  for (const auto& a : assets) {
    asset_list.push_back({{"kind", asset_kind_name(a.kind)}, {"file", a.file}});
    (a.kind == AssetKind::Image || a.kind == AssetKind::Chart ? media : code) += 1;
  }
  json meta = {{"pages", page_list},
               {"assets", asset_list},
               {"nav_graph", nav_to_json(nav)},
               {"network_delay", network_delay},
               {"stats",
                {{"pages", pages.size()},
                 {"media_assets", media},
                 {"code_data_files", code},
                 {"total_files", served_files().size()},
                 {"dead_links", nav.dead_count()}}}};
  files[kMetadataFile] = meta.dump(2) + "\n";
  files[kSolutionFile] = to_json(solution).dump(2) + "\n";
  files[kTaskFile] = to_json(task).dump(2) + "\n";
}

void WebsiteBundle::save(const fs::path& dir) const {
  for (const auto& [path, content] : files) util::write_file(dir / path, content);
}

WebsiteBundle WebsiteBundle::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("bundle directory not found: " + dir.string());
  WebsiteBundle b;
  b.root = dir;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    b.files[fs::relative(entry.path(), dir).generic_string()] = util::read_file(entry.path());
  }
  auto need = [&](const char* name) -> json {
    auto it = b.files.find(name);
    if (it == b.files.end()) throw ParseError(std::string("bundle lacks ") + name);
    try {
      return json::parse(it->second);
    } catch (const json::exception& e) {
      throw ParseError(std::string(name) + ": " + e.what());
    }
  };
  const json meta = need(kMetadataFile);
  for (const auto& p : meta.value("pages", json::array())) {
    b.pages.push_back({p.at("page_id").get<std::string>(), p.at("route").get<std::string>(),
                       p.at("file").get<std::string>()});
  }
  for (const auto& a : meta.value("assets", json::array())) {
    auto kind = asset_kind_from_name(a.value("kind", ""));
    if (!kind) throw ParseError("metadata lists an unknown asset kind");
    b.assets.push_back({*kind, a.at("file").get<std::string>()});
  }
  b.nav = nav_from_json(meta.value("nav_graph", json::object()));
  b.network_delay = meta.value("network_delay", json::object());

  const json data = need(kDataFile);
  auto at = answer_type_from_name(data.value("answer_type", "direct_answer"));
  if (!at) throw ParseError("data.json has an unknown answer type");
  b.answer.answer_type = *at;
  b.answer.ground_truth = data.value("ground_truth", std::map<std::string, std::string>{});
  b.answer.deceptive_codes = data.value("deceptive_codes", std::map<std::string, std::string>{});
  b.answer.code_field = data.value("code_field", "");
  if (data.contains("judge")) b.shipped_judge = JudgeProgram::from_json(data["judge"]);

  b.solution = solution_from_json(need(kSolutionFile));
  b.task = task_info_from_json(need(kTaskFile));
  return b;
}

// ---- navigation ----------------------------------------------------------------

bool is_external_href(const std::string& href) {
  const std::string h = util::to_lower(util::trim(href));
  return util::starts_with(h, "http://") || util::starts_with(h, "https://") || util::starts_with(h, "//");
}

std::optional<std::string> resolve_href(const std::string& from_file, const std::string& href) {
  std::string h = util::trim(href);
  const std::string lower = util::to_lower(h);
  if (is_external_href(h) || util::starts_with(lower, "mailto:") || util::starts_with(lower, "tel:") ||
      util::starts_with(lower, "javascript:") || util::starts_with(lower, "data:")) {
    return std::nullopt;
  }
  h = h.substr(0, h.find_first_of("?#"));
  if (h.empty()) return std::nullopt;
  std::vector<std::string> parts;
  if (h[0] != '/') {
    const auto slash = from_file.rfind('/');
    if (slash != std::string::npos) {
      for (const auto& seg : util::split_ws(util::replace_all(from_file.substr(0, slash), "/", " "))) {
        parts.push_back(seg);
      }
    }
  }
  std::size_t pos = 0;
  while (pos <= h.size()) {
    std::size_t next = h.find('/', pos);
    if (next == std::string::npos) next = h.size();
    const std::string seg = h.substr(pos, next - pos);
    pos = next + 1;
    if (seg.empty() || seg == ".") continue;
    if (seg == "..") {
      if (!parts.empty()) parts.pop_back();
      continue;
    }
    parts.push_back(seg);
  }
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "/") + p;
  if (out.empty() || h.back() == '/') out += (out.empty() ? "" : "/") + std::string("index.html");
  return out;
}

namespace {

html::Document parse_page(const WebsiteBundle& bundle, const std::string& file) {
  auto it = bundle.files.find(file);
  if (it == bundle.files.end()) throw ExtractionError(file + ": page file missing");
  try {
    return html::Document::parse(it->second);
  } catch (const ParseError& e) {
    throw ExtractionError(file + ": " + e.what());
  }
}

std::string link_text(const html::Node& n) {
  std::string t = n.text_content();
  if (t.empty()) t = n.attr("aria-label").value_or("");
  if (t.empty()) t = n.attr("title").value_or("");
  return t;
}

} // namespace

NavGraph extract_nav_graph(const WebsiteBundle& bundle) {
  NavGraph g;
  std::map<std::string, std::string> route_to_id;
  for (const auto& p : bundle.pages) {
    g.nodes.push_back(p.page_id);
    route_to_id[p.route] = p.page_id;
  }
  for (const auto& page : bundle.pages) {
    const auto doc = parse_page(bundle, page.file);
    const auto nodes = doc.find_all([](const html::Node& n) {
      return (n.tag == "a" && n.has_attr("href")) || (n.tag == "button" && n.has_attr("data-href")) ||
             (n.tag == "form" && n.has_attr("action"));
    });
    for (const html::Node* n : nodes) {
      NavEdge e;
      e.from = page.page_id;
      e.href = n->tag == "a" ? *n->attr("href") : n->tag == "button" ? *n->attr("data-href") : *n->attr("action");
      e.text = n->tag == "form" ? n->attr("id").value_or("form") : link_text(*n);
      const std::string h = util::trim(e.href);
      const std::string lower = util::to_lower(h);
      if (util::starts_with(lower, "mailto:") || util::starts_with(lower, "tel:")) continue;
      if (n->has_attr("data-forge-action") || n->has_attr("onclick")) continue;
      if (!h.empty() && h[0] == '#' && h.size() > 1) continue;  // in-page anchor
      if (h.empty() || h == "#" || util::starts_with(lower, "javascript:")) {
        e.target = EdgeTarget::Dead;
      } else if (is_external_href(h)) {
        e.target = EdgeTarget::External;
      } else {
        const std::string no_query = h.substr(0, h.find_first_of("?#"));
        auto r = route_to_id.find(no_query);
        if (r != route_to_id.end()) {
          e.target = EdgeTarget::Page;
          e.to = r->second;
        } else {
          const auto file = resolve_href(page.file, h);
          const PageEntry* target = file ? bundle.page_by_file(*file) : nullptr;
          if (target) {
            e.target = EdgeTarget::Page;
            e.to = target->page_id;
          } else if (file && bundle.files.count(*file)) {
            continue;  // link to an asset such as an image
          } else {
            e.target = EdgeTarget::Dead;
          }
        }
      }
      g.edges.push_back(std::move(e));
    }
  }
  return g;
}

// ---- audit ---------------------------------------------------------------------

bool contains_token(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
    const std::size_t end = pos + needle.size();
    const bool right_ok = end >= haystack.size() || !std::isalnum(static_cast<unsigned char>(haystack[end]));
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

bool AuditReport::has(char code) const {
  return std::any_of(flags.begin(), flags.end(), [&](const AuditFlag& f) { return f.code == code; });
}

namespace {

bool is_text_file(const std::string& path) {
  for (const char* ext : {".html", ".htm", ".css", ".js", ".json", ".svg", ".txt", ".xml"}) {
    if (util::ends_with(path, ext)) return true;
  }
  return false;
}

const std::regex& css_url_re() {
  static const std::regex re(R"re((?:url\(\s*['"]?|@import\s+['"]))re" R"re(((?:https?:)?//[^'")\s]+))re",
                             std::regex::icase);
  return re;
}

const std::regex& js_url_re() {
  static const std::regex re(R"re(['"`]((?:https?:)?//[^'"`\s]+))re", std::regex::icase);
  return re;
}

bool is_namespace_uri(const std::string& url) {
  return util::contains(url, "www.w3.org/");
}

void scan_css(const std::string& file, const std::string& text, std::vector<AuditFlag>& out) {
  for (std::sregex_iterator it(text.begin(), text.end(), css_url_re()), end; it != end; ++it) {
    out.push_back({'c', file, "loads " + (*it)[1].str()});
  }
}

void scan_js(const std::string& file, const std::string& text, std::vector<AuditFlag>& out) {
  for (std::sregex_iterator it(text.begin(), text.end(), js_url_re()), end; it != end; ++it) {
    const std::string url = (*it)[1].str();
    if (!is_namespace_uri(url)) out.push_back({'c', file, "references " + url});
  }
}

void scan_markup(const std::string& file, const std::string& text, std::vector<AuditFlag>& out) {
  html::Document doc = [&] {
    try {
      return html::Document::parse(text);
    } catch (const ParseError& e) {
      throw ExtractionError(file + ": " + e.what());
    }
  }();
  static const std::set<std::string> kLoaders = {"script", "img", "iframe", "source", "video", "audio",
                                                 "embed",  "track", "image", "use", "input"};
  for (const html::Node* n : doc.find_all([](const html::Node& x) { return x.is_element(); })) {
    for (const auto& [name, value] : n->attrs) {
      const bool loads = name == "src" || name == "srcset" || name == "poster" ||
                         (name == "href" && (n->tag == "link" || kLoaders.count(n->tag))) ||
                         (name == "xlink:href") || (name == "data" && n->tag == "object");
      if (loads && is_external_href(value)) out.push_back({'c', file, "<" + n->tag + "> loads " + value});
      if (name == "style") scan_css(file, value, out);
    }
    if (n->tag == "style") scan_css(file, n->text, out);
    if (n->tag == "script" && !n->has_attr("src")) {
      const std::string type = util::to_lower(n->attr("type").value_or(""));
      if (type.empty() || util::contains(type, "javascript") || type == "module") scan_js(file, n->text, out);
    }
  }
}

bool decodes(const json& v) {
  if (!v.is_string()) return false;
  try {
    return !decode_secret(v.get<std::string>()).empty();
  } catch (const DecodeError&) {
    return false;
  }
}

void scan_data(const std::string& file, const json& j, const std::set<std::string>& answer_keys,
               std::vector<AuditFlag>& out, const std::string& where) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string here = where + "/" + it.key();
      if (answer_keys.count(it.key())) {
        if (it.value().is_object()) {
          for (auto f = it.value().begin(); f != it.value().end(); ++f) {
            if (!decodes(f.value())) out.push_back({'d', file, here + "/" + f.key() + " is not encoded"});
          }
        } else if (!decodes(it.value())) {
          out.push_back({'d', file, here + " is not encoded"});
        }
        continue;
      }
      scan_data(file, it.value(), answer_keys, out, here);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) scan_data(file, j[i], answer_keys, out, where + "/" + std::to_string(i));
  }
}

} // namespace

AuditReport audit_bundle(const WebsiteBundle& bundle) {
  AuditReport report;
  std::vector<std::pair<std::string, std::string>> secrets;  // (label, plaintext)
  std::vector<std::pair<std::string, std::string>> decoys;
  std::set<std::string> answer_keys = {"ground_truth", "deceptive_codes"};
  for (const auto& [name, enc] : bundle.answer.ground_truth) {
    answer_keys.insert(name);
    try {
      secrets.emplace_back(name, decode_secret(enc));
    } catch (const DecodeError&) {
    }
  }
  for (const auto& [id, enc] : bundle.answer.deceptive_codes) {
    try {
      decoys.emplace_back(id, decode_secret(enc));
    } catch (const DecodeError&) {
    }
  }

  for (const auto& path : bundle.served_files()) {
    if (!is_text_file(path)) continue;
    const std::string& text = bundle.files.at(path);
    for (const auto& [name, value] : secrets) {
      if (contains_token(text, value)) report.flags.push_back({'a', path, "ground truth " + name + " in plaintext"});
    }
    for (const auto& [id, value] : decoys) {
      if (contains_token(text, value)) report.flags.push_back({'b', path, "deceptive code " + id + " in plaintext"});
    }
    if (util::ends_with(path, ".html") || util::ends_with(path, ".htm") || util::ends_with(path, ".svg")) {
      scan_markup(path, text, report.flags);
    } else if (util::ends_with(path, ".css")) {
      scan_css(path, text, report.flags);
    } else if (util::ends_with(path, ".js")) {
      scan_js(path, text, report.flags);
    } else if (util::ends_with(path, ".json")) {
      try {
        scan_data(path, json::parse(text), answer_keys, report.flags, "");
      } catch (const json::exception&) {
        report.flags.push_back({'d', path, "data file is not valid JSON"});
      }
    }
  }
  return report;
}

// ---- generation ----------------------------------------------------------------

GenerationOutput parse_generation_output(const std::string& text) {
  GenerationOutput out;
  std::size_t pos = 0;
  bool any = false;
  while (true) {
    std::size_t open = text.find("```", pos);
    if (open == std::string::npos) break;
    if (open != 0 && text[open - 1] != '\n') {
      pos = open + 3;
      continue;
    }
    const std::size_t info_end = text.find('\n', open);
    if (info_end == std::string::npos) throw ParseError("unterminated fence header");
    const auto info = util::split_ws(std::string_view(text).substr(open + 3, info_end - open - 3));
    std::size_t close = info_end + 1;
    while (true) {
      close = text.find("```", close);
      if (close == std::string::npos) throw ParseError("unterminated fenced block");
      if (text[close - 1] == '\n') break;
      close += 3;
    }
    const std::string body = text.substr(info_end + 1, close - info_end - 1);
    pos = text.find('\n', close);
    pos = pos == std::string::npos ? text.size() : pos + 1;
    if (info.empty()) continue;
    std::map<std::string, std::string> attrs;
    for (std::size_t i = 1; i < info.size(); ++i) {
      const auto eq = info[i].find('=');
      if (eq != std::string::npos) attrs[info[i].substr(0, eq)] = info[i].substr(eq + 1);
    }
    const std::string& lang = info[0];
    any = true;
    if (lang == "json" && attrs.count("role")) {
      json j;
      try {
        j = json::parse(body);
      } catch (const json::exception& e) {
        throw ParseError("block role=" + attrs["role"] + " is not valid JSON: " + e.what());
      }
      const std::string& role = attrs["role"];
      if (role == "answer") {
        out.answer = j;
      } else if (role == "judge") {
        out.judge = j;
      } else if (role == "solution") {
        out.solution = j;
      } else if (role == "assets") {
        for (const auto& a : j) {
          AssetRequest r;
          r.path = a.at("path").get<std::string>();
          r.kind = a.value("kind", "image");
          r.prompt = a.value("prompt", "");
          r.spec = a.value("spec", json::object());
          out.assets.push_back(std::move(r));
        }
      } else {
        throw ParseError("unknown block role '" + role + "'");
      }
      continue;
    }
    if (!attrs.count("path")) throw ParseError("```" + lang + " block without path=");
    const std::string path = attrs["path"];
    if (path.empty() || path[0] == '/' || util::contains(path, "..")) throw ParseError("bad file path '" + path + "'");
    if (is_control_file(path) || path == kDataFile) throw ParseError(path + " is written by the assembler");
    if (!out.files.emplace(path, body).second) throw ParseError("duplicate file " + path);
  }
  if (!any) throw ParseError("no fenced blocks in generation output");
  if (out.files.empty()) throw ParseError("generation output contains no files");
  return out;
}

std::string generation_system_prompt() {
  return "You build the static website for a browser-agent task from its plan.\n"
         "Emit every file as a fenced block: ```html path=<page_id>.html, ```css path=css/style.css,\n"
         "```js path=js/main.js. Then emit ```json role=assets (list of {path, kind: image|chart, prompt, spec}),\n"
         "```json role=answer ({deceptive_codes: {pattern_id: code}}), ```json role=judge (state_key, constants,\n"
         "derive, rules) for operation codes, and ```json role=solution (steps with concrete actions,\n"
         "submission_schema, witness_state, answer_map).\n"
         "Never write ground-truth values or codes into any page, script or stylesheet. Persist form fields under\n"
         "the judge state_key, bind computed values with data-forge-show and the judged code with data-forge-code.\n"
         "Pages must be purely static and load nothing from other origins.";
}

std::string generation_user_prompt(const TaskBlueprint& plan) {
  return "Build the website for this plan.\n\n" + serialize_blueprint(plan);
}

std::set<std::string> bound_names(const WebsiteBundle& bundle) {
  std::set<std::string> out;
  for (const auto& p : bundle.pages) {
    auto it = bundle.files.find(p.file);
    if (it == bundle.files.end()) continue;
    const auto doc = html::Document::parse(it->second);
    for (const html::Node* n : doc.find_all([](const html::Node& x) { return x.has_attr("data-forge-show"); })) {
      out.insert(*n->attr("data-forge-show"));
    }
  }
  return out;
}

WebsiteBundle assemble_bundle(const TaskBlueprint& plan, const ProviderProfile& provider,
                              AssetProvider& asset_provider, const std::string& task_id) {
  if (!provider.provider) throw ConfigError("provider profile has no provider");
  ProviderRequest req;
  req.system_prompt = generation_system_prompt();
  req.user_prompt = generation_user_prompt(plan);
  req.temperature = provider.temperature;
  req.max_tokens = provider.max_output_tokens;
  req.tag = "generate:" + domain_key(plan.domain) + ":" + std::to_string(plan.overall_level);

  GenerationOutput gen;
  {
    std::string last, err;
    bool ok = false;
    for (int attempt = 1; attempt <= 3 && !ok; ++attempt) {
      last = provider.provider->complete(req).text;
      try {
        gen = parse_generation_output(last);
        ok = true;
      } catch (const ParseError& e) {
        err = e.what();
      } catch (const json::exception& e) {
        err = e.what();
      }
    }
    if (!ok) throw GenerationError("generation output unusable after 3 attempts: " + err, last);
  }

  WebsiteBundle b;
  for (const auto& page : plan.pages) {
    const std::string file = page.page_id + ".html";
    if (!gen.files.count(file)) throw AssemblyError("page " + page.page_id + " missing from generation output");
    b.pages.push_back({page.page_id, page.route, file});
  }
  for (const auto& [path, content] : gen.files) {
    if (util::ends_with(path, ".html") && !b.page_by_file(path)) {
      const std::string id = fs::path(path).stem().string();
      b.pages.push_back({id, "/" + id, path});
    }
    b.files[path] = content;
  }
  if (!b.page_by_file("index.html")) throw AssemblyError("bundle has no index.html");

  for (const auto& req_asset : gen.assets) {
    if (b.files.count(req_asset.path)) throw AssemblyError("asset " + req_asset.path + " collides with a file");
    b.files[req_asset.path] = asset_provider.fetch(req_asset);
    b.assets.push_back({req_asset.kind == "chart" ? AssetKind::Chart : AssetKind::Image, req_asset.path});
  }
  if (b.files.count(kStyleFile)) b.assets.push_back({AssetKind::Stylesheet, kStyleFile});
  if (b.files.count(kScriptFile)) b.assets.push_back({AssetKind::Script, kScriptFile});

  // Answers.
  b.answer.answer_type = plan.answer.answer_type;
  for (const auto& [name, value] : plan.answer.ground_truth_fields) b.answer.ground_truth[name] = encode_secret(value);
  if (!plan.answer.code_fields.empty()) b.answer.code_field = plan.answer.code_fields.front();
  const json decoys = gen.answer.value("deceptive_codes", json::object());
  for (auto it = decoys.begin(); it != decoys.end(); ++it) {
    b.answer.deceptive_codes[it.key()] = encode_secret(it.value().get<std::string>());
  }
  try {
    check_answer_config(b.answer);
  } catch (const Error& e) {
    throw AssemblyError(std::string("answer configuration: ") + e.what());
  }

  std::optional<JudgeProgram> judge;
  if (gen.judge) {
    try {
      judge = JudgeProgram::from_json(*gen.judge);
    } catch (const ParseError& e) {
      throw AssemblyError(std::string("judge program: ") + e.what());
    }
    for (const auto& outcome : judge->outcomes()) {
      if (outcome != kCorrectOutcome && !b.answer.deceptive_codes.count(outcome)) {
        throw AssemblyError("judge outcome " + outcome + " has no deceptive code");
      }
    }
  } else if (plan.answer.answer_type != AnswerType::DirectAnswer) {
    throw AssemblyError("operation-code answer without a judge program");
  }

  // Solution.
  try {
    b.solution = solution_from_json(gen.solution);
  } catch (const std::exception& e) {
    throw AssemblyError(std::string("solution file: ") + e.what());
  }
  if (b.solution.steps.size() > static_cast<std::size_t>(kMaxSolutionSteps)) {
    throw AssemblyError("solution has more than 50 steps");
  }
  b.solution.expected_final_state = plan.answer.ground_truth_fields;
  b.solution.judge = judge;
  if (judge) b.shipped_judge = judge->obfuscated(bound_names(b));

  b.task.task_id = task_id;
  b.task.title = plan.title;
  b.task.user_query = plan.user_query;
  b.task.domain = plan.domain;
  b.task.level = plan.overall_level;
  b.task.difficulty = plan.difficulty;

  try {
    b.sync_control_files();
  } catch (const ExtractionError& e) {
    throw AssemblyError(e.what());
  }
  const AuditReport audit = audit_bundle(b);
  if (!audit.passed()) {
    std::string msg = "anti-cheat audit failed:";
    for (const auto& f : audit.flags) msg += std::string(" (") + f.code + ") " + f.file + ": " + f.detail + ";";
    throw AssemblyError(msg);
  }
  return b;
}

} // namespace forge
