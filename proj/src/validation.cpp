#include "forge/validation.hpp"

#include "forge/codec.hpp"
#include "forge/errors.hpp"
#include "forge/harness.hpp"
#include "forge/html.hpp"
#include "forge/refinement.hpp"
#include "forge/util.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace forge {

using nlohmann::json;

// ---- snapshot --------------------------------------------------------------------

json to_json(const SnapshotNode& n) {
  json j = {{"tag", n.tag}};
  if (!n.attrs.empty()) j["attrs"] = n.attrs;
  if (!n.text.empty()) j["text"] = n.text;
  if (n.index >= 0) j["index"] = n.index;
  if (n.layer != "page") j["layer"] = n.layer;
  if (!n.children.empty()) {
    j["children"] = json::array();
    for (const auto& c : n.children) j["children"].push_back(to_json(c));
  }
  return j;
}

SnapshotNode snapshot_from_json(const json& j) {
  SnapshotNode n;
  n.tag = j.at("tag").get<std::string>();
  n.attrs = j.value("attrs", std::map<std::string, std::string>{});
  n.text = j.value("text", "");
  n.index = j.value("index", -1);
  n.layer = j.value("layer", "page");
  for (const auto& c : j.value("children", json::array())) n.children.push_back(snapshot_from_json(c));
  return n;
}

namespace {

struct SimpleSelector {
  std::string tag;
  std::vector<std::pair<std::string, std::optional<std::string>>> attrs;
  std::vector<std::string> classes;
};

SimpleSelector parse_selector(const std::string& sel) {
  SimpleSelector out;
  std::size_t i = 0;
  auto ident = [&](std::size_t& k) {
    const std::size_t b = k;
    while (k < sel.size() && (std::isalnum(static_cast<unsigned char>(sel[k])) || sel[k] == '-' || sel[k] == '_')) ++k;
    if (k == b) throw ParseError("selector '" + sel + "': expected a name at offset " + std::to_string(b));
    return sel.substr(b, k - b);
  };
  if (i < sel.size() && std::isalpha(static_cast<unsigned char>(sel[i]))) out.tag = util::to_lower(ident(i));
  while (i < sel.size()) {
    const char c = sel[i++];
    if (c == '#') {
      out.attrs.emplace_back("id", ident(i));
    } else if (c == '.') {
      out.classes.push_back(ident(i));
    } else if (c == '[') {
      std::string name = util::to_lower(ident(i));
      if (i < sel.size() && sel[i] == ']') {
        ++i;
        out.attrs.emplace_back(name, std::nullopt);
        continue;
      }
      if (i >= sel.size() || sel[i] != '=') throw ParseError("selector '" + sel + "': expected '=' or ']'");
      ++i;
      std::string value;
      if (i < sel.size() && (sel[i] == '"' || sel[i] == '\'')) {
        const char q = sel[i++];
        const auto e = sel.find(q, i);
        if (e == std::string::npos) throw ParseError("selector '" + sel + "': unterminated string");
        value = sel.substr(i, e - i);
        i = e + 1;
      } else {
        const auto e = sel.find(']', i);
        if (e == std::string::npos) throw ParseError("selector '" + sel + "': unterminated attribute");
        value = util::trim(sel.substr(i, e - i));
        i = e;
      }
      if (i >= sel.size() || sel[i] != ']') throw ParseError("selector '" + sel + "': expected ']'");
      ++i;
      out.attrs.emplace_back(name, value);
    } else {
      throw ParseError("selector '" + sel + "': unsupported syntax at offset " + std::to_string(i - 1));
    }
  }
  return out;
}

bool matches(const SnapshotNode& n, const SimpleSelector& s) {
  if (!s.tag.empty() && n.tag != s.tag) return false;
  for (const auto& [name, value] : s.attrs) {
    auto it = n.attrs.find(name);
    if (it == n.attrs.end()) return false;
    if (value && it->second != *value) return false;
  }
  if (!s.classes.empty()) {
    auto it = n.attrs.find("class");
    if (it == n.attrs.end()) return false;
    const auto have = util::split_ws(it->second);
    for (const auto& c : s.classes) {
      if (std::find(have.begin(), have.end(), c) == have.end()) return false;
    }
  }
  return true;
}

const SnapshotNode* select_in(const SnapshotNode& n, const SimpleSelector& s) {
  if (matches(n, s)) return &n;
  for (const auto& c : n.children) {
    if (const SnapshotNode* hit = select_in(c, s)) return hit;
  }
  return nullptr;
}

} // namespace

const SnapshotNode* snapshot_select(const SnapshotNode& root, const std::string& selector) {
  const std::string sel = util::trim(selector);
  if (sel.empty() || sel.find_first_of(" >+~,:") != std::string::npos) {
    // Spaces are allowed only inside quoted attribute values.
    bool quoted = false;
    for (char c : sel) {
      if (c == '"' || c == '\'') quoted = !quoted;
      if (!quoted && (c == ' ' || c == '>' || c == '+' || c == '~' || c == ',' || c == ':')) {
        throw ParseError("selector '" + sel + "': only compound selectors are supported");
      }
    }
    if (sel.empty()) throw ParseError("empty selector");
  }
  return select_in(root, parse_selector(sel));
}

// ---- observation -----------------------------------------------------------------

const InteractiveElement* Observation::element(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= elements.size()) return nullptr;
  return &elements[static_cast<std::size_t>(index)];
}

bool Observation::has_layer(const std::string& layer) const {
  return std::any_of(elements.begin(), elements.end(), [&](const InteractiveElement& e) { return e.layer == layer; });
}

json Observation::to_json(bool include_screenshot) const {
  json els = json::array();
  for (const auto& e : elements) {
    json x = {{"index", e.index}, {"tag", e.tag}, {"text", e.text}, {"layer", e.layer}};
    if (!e.attrs.empty()) x["attrs"] = e.attrs;
    if (!e.value.empty()) x["value"] = e.value;
    if (!e.options.empty()) {
      x["options"] = json::array();
      for (const auto& [v, l] : e.options) x["options"].push_back({v, l});
    }
    els.push_back(x);
  }
  json j = {{"url", url},          {"title", title},     {"dom", forge::to_json(dom)},
            {"elements", els},     {"storage", storage}, {"clock_ms", clock_ms}};
  if (dialog) j["dialog"] = *dialog;
  if (screenshot) {
    j["screenshot_sha256"] = util::sha256_hex(*screenshot);
    if (include_screenshot) j["screenshot"] = Base64Codec().encode(*screenshot);
  }
  return j;
}

Observation Observation::from_json(const json& j) {
  Observation o;
  o.url = j.value("url", "");
  o.title = j.value("title", "");
  if (j.contains("dom")) o.dom = snapshot_from_json(j.at("dom"));
  for (const auto& x : j.value("elements", json::array())) {
    InteractiveElement e;
    e.index = x.at("index").get<int>();
    e.tag = x.value("tag", "");
    e.text = x.value("text", "");
    e.layer = x.value("layer", "page");
    e.attrs = x.value("attrs", std::map<std::string, std::string>{});
    e.value = x.value("value", "");
    for (const auto& opt : x.value("options", json::array())) {
      e.options.emplace_back(opt.at(0).get<std::string>(), opt.at(1).get<std::string>());
    }
    o.elements.push_back(std::move(e));
  }
  o.storage = j.value("storage", std::map<std::string, std::string>{});
  if (j.contains("dialog")) o.dialog = j.at("dialog").get<std::string>();
  o.clock_ms = j.value("clock_ms", 0LL);
  if (j.contains("screenshot")) o.screenshot = Base64Codec().decode(j.at("screenshot").get<std::string>());
  return o;
}

std::string Observation::digest() const { return util::sha256_hex(to_json(false).dump()); }

// ---- actions ---------------------------------------------------------------------

namespace {

constexpr std::pair<ActionKind, const char*> kActionNames[] = {
    {ActionKind::Navigate, "navigate"}, {ActionKind::Click, "click"}, {ActionKind::Input, "input"},
    {ActionKind::Scroll, "scroll"},     {ActionKind::Back, "back"},   {ActionKind::Terminate, "terminate"},
};

} // namespace

std::string action_kind_name(ActionKind k) {
  for (const auto& [kind, name] : kActionNames) {
    if (kind == k) return name;
  }
  return "scroll";
}

std::optional<ActionKind> action_kind_from_name(const std::string& s) {
  for (const auto& [kind, name] : kActionNames) {
    if (s == name) return kind;
  }
  return std::nullopt;
}

BrowserAction BrowserAction::navigate(std::string url) {
  BrowserAction a;
  a.kind = ActionKind::Navigate;
  a.url = std::move(url);
  return a;
}

BrowserAction BrowserAction::click(int index) {
  BrowserAction a;
  a.kind = ActionKind::Click;
  a.index = index;
  return a;
}

BrowserAction BrowserAction::input(int index, std::string text) {
  BrowserAction a;
  a.kind = ActionKind::Input;
  a.index = index;
  a.text = std::move(text);
  return a;
}

BrowserAction BrowserAction::scroll(std::string direction) {
  BrowserAction a;
  a.kind = ActionKind::Scroll;
  a.direction = std::move(direction);
  return a;
}

BrowserAction BrowserAction::back() {
  BrowserAction a;
  a.kind = ActionKind::Back;
  return a;
}

BrowserAction BrowserAction::terminate(std::map<std::string, std::string> answer) {
  BrowserAction a;
  a.kind = ActionKind::Terminate;
  a.answer = std::move(answer);
  return a;
}

std::string BrowserAction::key() const { return to_json().dump(); }

json BrowserAction::to_json() const {
  json j = {{"kind", action_kind_name(kind)}};
  switch (kind) {
  case ActionKind::Navigate:
    j["url"] = url;
    break;
  case ActionKind::Click:
    j["index"] = index;
    break;
  case ActionKind::Input:
    j["index"] = index;
    j["text"] = text;
    break;
  case ActionKind::Scroll:
    if (index >= 0) j["index"] = index;
    if (!direction.empty()) j["direction"] = direction;
    break;
  case ActionKind::Back:
    break;
  case ActionKind::Terminate:
    j["answer"] = answer;
    break;
  }
  return j;
}

BrowserAction BrowserAction::from_json(const json& j) {
  const auto kind = action_kind_from_name(j.value("kind", ""));
  if (!kind) throw ParseError("unknown browser action '" + j.value("kind", "") + "'");
  BrowserAction a;
  a.kind = *kind;
  a.url = j.value("url", "");
  a.index = j.value("index", -1);
  a.text = j.value("text", "");
  a.direction = j.value("direction", "");
  a.answer = j.value("answer", std::map<std::string, std::string>{});
  return a;
}

// ---- simulated browser -----------------------------------------------------------

namespace {

bool hidden_node(const html::Node& n) {
  static const std::set<std::string> skip = {"head", "script", "style", "template", "noscript", "meta", "link", "title"};
  if (skip.count(n.tag)) return true;
  if (n.has_attr("hidden")) return true;
  if (n.tag == "input" && util::to_lower(n.attr("type").value_or("")) == "hidden") return true;
  std::string style = util::to_lower(n.attr("style").value_or(""));
  style.erase(std::remove_if(style.begin(), style.end(), [](unsigned char c) { return std::isspace(c); }), style.end());
  return util::contains(style, "display:none") || util::contains(style, "visibility:hidden");
}

bool interactive_node(const html::Node& n) {
  if (n.tag == "a") return n.has_attr("href");
  if (n.tag == "button" || n.tag == "select" || n.tag == "textarea") return true;
  if (n.tag == "input") return true;
  return n.has_attr("data-href") || n.has_attr("data-forge-action") || n.has_attr("onclick");
}

bool is_field(const html::Node& n) { return n.tag == "input" || n.tag == "select" || n.tag == "textarea"; }

bool is_submit(const html::Node& n) {
  const std::string type = util::to_lower(n.attr("type").value_or(""));
  if (n.tag == "button") return (type.empty() || type == "submit") && n.closest("form");
  if (n.tag == "input") return type == "submit" || type == "image";
  return false;
}

const std::set<std::string>& kept_attrs() {
  static const std::set<std::string> keep = {"id",    "class",       "name",       "type",  "href",   "value",
                                             "role",  "placeholder", "aria-label", "alt",   "src",    "for",
                                             "action", "required",   "min",        "max",   "title",  "data-href",
                                             "selected", "checked",  "disabled"};
  return keep;
}

std::string collapse(const std::string& raw) {
  std::string out;
  bool space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
    } else {
      if (space && !out.empty()) out += ' ';
      space = false;
      out += c;
    }
  }
  return out;
}

std::string url_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else if (c == ' ') {
      out += '+';
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

struct Target {
  std::string layer = "page";
  const html::Node* node = nullptr;
  std::string overlay;  // accept-cookies | dismiss-popup | popup-cta
};

} // namespace

struct SimulatedBrowser::Impl {
  struct Page {
    std::string file;
    std::string query;
    std::string html;
    html::Document doc;
    std::optional<RuntimeConfig> config;
    std::optional<JudgeProgram> judge;
    bool runtime = false;
    bool blocking_scripts = false;
    std::map<const html::Node*, std::string> values;
    std::map<const html::Node*, std::string> errors;
    long long loaded_at = 0;
    std::optional<long long> cookie_due;
    std::optional<long long> popup_due;
    bool cookie_visible = false;
    bool popup_visible = false;

    explicit Page(html::Document d) : doc(std::move(d)) {}
  };

  const WebsiteBundle& bundle;
  SessionOptions options;
  std::optional<std::uint32_t> page_seed;
  std::map<std::string, std::string> storage;
  std::unique_ptr<Page> page;
  std::vector<std::pair<std::string, std::string>> history;  // (file, query)
  std::optional<std::string> dialog;
  long long clock = 0;
  Mulberry32 rng;
  std::vector<Target> targets;
  bool launched = false;

  Impl(const WebsiteBundle& b, SessionOptions o) : bundle(b), options(std::move(o)), rng(options.seed) {}

  std::string state_key() const {
    if (page && page->judge) return page->judge->state_key;
    if (bundle.solution.judge) return bundle.solution.judge->state_key;
    return "forge_state";
  }

  json state() const {
    auto it = storage.find(state_key());
    if (it == storage.end()) return json::object();
    try {
      json s = json::parse(it->second);
      return s.is_object() ? s : json::object();
    } catch (const json::exception&) {
      return json::object();
    }
  }

  void save_state(const json& s) { storage[state_key()] = s.dump(); }

  std::string cookie_key() const { return page && page->config ? page->config->cookie_key() : "forge_cookie_consent"; }
  std::string popup_key() const { return page && page->config ? page->config->popup_key() : "forge_popup_dismissed"; }

  long long latency_for(const std::string& file) {
    const auto range = latency_range(bundle, file);
    if (!range) return 0;
    return static_cast<long long>(range->first + std::floor(rng.next() * (range->second - range->first)));
  }

  std::string page_url() const {
    if (!page) return "about:blank";
    return options.base_url + page->file + (page->query.empty() ? "" : "?" + page->query);
  }

  // Resolves a navigation target to a bundle file, or an error message.
  std::pair<std::string, std::string> resolve_target(const std::string& raw, std::string& query) const {
    std::string url = util::trim(raw);
    if (util::starts_with(url, options.base_url)) url = url.substr(options.base_url.size());
    else if (is_external_href(url)) return {"", "navigation outside the site is blocked: " + url};
    const auto hash = url.find('#');
    if (hash != std::string::npos) url = url.substr(0, hash);
    const auto q = url.find('?');
    query = q == std::string::npos ? "" : url.substr(q + 1);
    if (q != std::string::npos) url = url.substr(0, q);
    std::string file;
    if (url.empty() || url == "/") {
      file = url.empty() && page ? page->file : "index.html";
    } else if (url[0] == '/') {
      for (const auto& p : bundle.pages) {
        if (p.route == url) file = p.file;
      }
      if (file.empty()) file = url.substr(1);
    } else {
      const auto resolved = resolve_href(page ? page->file : "index.html", url);
      if (!resolved) return {"", "cannot resolve " + raw};
      file = *resolved;
    }
    if (is_control_file(file) || !bundle.files.count(file)) return {"", "404 Not Found: /" + file};
    if (!util::ends_with(file, ".html") && !util::ends_with(file, ".htm")) return {"", "not a page: /" + file};
    return {file, ""};
  }

  void load(const std::string& file, const std::string& query) {
    std::string text = bundle.files.at(file);
    if (page_seed) text = rewrite_runtime_seed(text, *page_seed);
    html::Document doc = [&] {
      try {
        return html::Document::parse(text);
      } catch (const ParseError& e) {
        throw InfrastructureError(file + ": " + e.what());
      }
    }();
    auto p = std::make_unique<Page>(std::move(doc));
    p->file = file;
    p->query = query;
    p->html = std::move(text);
    p->config = read_runtime_config(p->html);

    bool loads_main = false;
    std::string scripts;
    for (const html::Node* n : p->doc.by_tag("script")) {
      const auto src = n->attr("src");
      if (!src) {
        scripts += n->text + "\n";
        continue;
      }
      const auto f = resolve_href(file, *src);
      if (!f) continue;
      if (*f == kScriptFile) loads_main = true;
      auto it = bundle.files.find(*f);
      if (it != bundle.files.end()) scripts += it->second + "\n";
    }
    for (const html::Node* n : p->doc.find_all([](const html::Node& x) { return x.is_element(); })) {
      for (const auto& [name, value] : n->attrs) {
        if (name.size() > 2 && name[0] == 'o' && name[1] == 'n') scripts += value + "\n";
      }
    }
    p->blocking_scripts = !find_blocking_calls(scripts).empty();
    auto js = bundle.files.find(kScriptFile);
    p->runtime = p->config && loads_main && js != bundle.files.end() && util::contains(js->second, kRuntimeBegin);
    if (p->runtime && p->config->judge_rules.is_object() && p->config->judge_rules.contains("rules")) {
      try {
        p->judge = JudgeProgram::from_json(p->config->judge_rules);
      } catch (const Error&) {
        p->judge.reset();
      }
    }
    page = std::move(p);
    init_values();

    page->loaded_at = clock;
    if (page->runtime) {
      long long load = 0;
      auto it = storage.find(kRuntimeLoadsKey);
      if (it != storage.end()) {
        try {
          load = std::stoll(it->second);
        } catch (const std::exception&) {
          load = 0;
        }
      }
      storage[kRuntimeLoadsKey] = std::to_string(load + 1);
      if (!storage.count(cookie_key())) page->cookie_due = clock + page->config->cookie_delay_ms;
      if (!storage.count(popup_key())) {
        page->popup_due = clock + popup_delay_ms(*page->config, static_cast<std::uint32_t>(load));
      }
    }
    tick();
  }

  void init_values() {
    const json s = state();
    for (const html::Node* n : page->doc.find_all([](const html::Node& x) { return is_field(x); })) {
      std::string v;
      if (n->tag == "select") {
        const auto opts = page->doc.find_all([n](const html::Node& x) { return x.tag == "option" && x.closest("select") == n; });
        for (const html::Node* o : opts) {
          if (o->has_attr("selected")) v = o->attr("value").value_or(o->text_content());
        }
        if (v.empty() && !opts.empty() && !std::any_of(opts.begin(), opts.end(), [](const html::Node* o) { return o->has_attr("selected"); })) {
          v = opts.front()->attr("value").value_or(opts.front()->text_content());
        }
      } else if (n->tag == "textarea") {
        v = n->text_content();
      } else {
        const std::string type = util::to_lower(n->attr("type").value_or("text"));
        if (type == "checkbox" || type == "radio") v = n->has_attr("checked") ? n->attr("value").value_or("on") : "";
        else v = n->attr("value").value_or("");
      }
      const auto name = n->attr("name");
      const html::Node* form = n->closest("form");
      if (name && form && form->has_attr("data-forge-form") && s.contains(*name) && v.empty()) {
        v = expr::display(s.at(*name));
      }
      page->values[n] = v;
    }
  }

  void tick() {
    if (!page || !page->runtime) return;
    if (page->cookie_due && clock >= *page->cookie_due && !storage.count(cookie_key())) page->cookie_visible = true;
    if (page->popup_due && clock >= *page->popup_due && !storage.count(popup_key())) page->popup_visible = true;
  }

  std::vector<std::pair<std::string, std::string>> options_of(const html::Node* select) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const html::Node* o : page->doc.find_all([select](const html::Node& x) {
           return x.tag == "option" && x.closest("select") == select;
         })) {
      const std::string label = o->text_content();
      out.emplace_back(o->attr("value").value_or(label), label);
    }
    return out;
  }

  // ---- rendering

  std::optional<std::string> binding(const html::Node& n, const json& s, const json& derived) const {
    if (!page->runtime) return std::nullopt;
    if (const auto name = n.attr("data-forge-show")) {
      json v;
      if (derived.contains(*name)) v = derived.at(*name);
      else if (s.contains(*name)) v = s.at(*name);
      return v.is_null() ? "--" : expr::display(v);
    }
    if (n.has_attr("data-forge-code")) {
      if (!page->judge) return "--";
      try {
        const std::string outcome = page->judge->match(s);
        const json& codes = page->config->judge_rules.at("codes");
        if (!codes.contains(outcome)) return "--";
        return decode_secret(codes.at(outcome).get<std::string>());
      } catch (const std::exception&) {
        return "--";
      }
    }
    return std::nullopt;
  }

  SnapshotNode overlay_button(const std::string& text, const std::string& action, const std::string& layer,
                              std::vector<InteractiveElement>& els, std::vector<Target>& tg) {
    SnapshotNode b;
    b.tag = "button";
    b.attrs["type"] = "button";
    if (action != "popup-cta") b.attrs["data-forge-action"] = action;
    b.text = text;
    b.layer = layer;
    b.index = static_cast<int>(els.size());
    InteractiveElement e;
    e.index = b.index;
    e.tag = "button";
    e.attrs = b.attrs;
    e.text = text;
    e.layer = layer;
    els.push_back(e);
    tg.push_back({layer, nullptr, action});
    return b;
  }

  SnapshotNode render(const html::Node& n, const json& s, const json& derived, std::vector<InteractiveElement>& els,
                      std::vector<Target>& tg) const {
    SnapshotNode out;
    out.tag = n.tag;
    for (const auto& [k, v] : n.attrs) {
      if (kept_attrs().count(k) || util::starts_with(k, "data-forge")) out.attrs[k] = v;
    }
    const bool field = is_field(n);
    if (field) {
      auto it = page->values.find(&n);
      const std::string v = it == page->values.end() ? "" : it->second;
      out.attrs["value"] = v;
    }
    if (interactive_node(n)) {
      out.index = static_cast<int>(els.size());
      tg.push_back({"page", &n, ""});
      els.emplace_back();
    }
    std::string raw;
    if (const auto bound = binding(n, s, derived)) {
      raw = *bound;
    } else if (n.tag == "select") {
      const auto v = out.attrs["value"];
      for (const auto& [value, label] : options_of(&n)) {
        if (value == v) raw = label;
      }
    } else if (n.tag != "textarea") {
      for (const html::Node* c : n.children) {
        if (c->tag == "#text") {
          raw += c->text;
        } else if (c->is_element() && !hidden_node(*c)) {
          SnapshotNode child = render(*c, s, derived, els, tg);
          raw += " " + child.text + " ";
          out.children.push_back(std::move(child));
          auto err = page->errors.find(c);
          if (err != page->errors.end()) {
            SnapshotNode box;
            box.tag = "div";
            box.attrs = {{"class", "forge-inline-error"}, {"role", "status"}};
            box.text = "\xE2\x8A\x98 " + err->second;
            raw += " " + box.text + " ";
            out.children.push_back(std::move(box));
          }
        }
      }
    }
    out.text = collapse(raw);
    if (out.index >= 0) {
      InteractiveElement& e = els[static_cast<std::size_t>(out.index)];
      e.index = out.index;
      e.tag = n.tag;
      e.attrs = out.attrs;
      e.text = out.text;
      if (field) e.value = out.attrs["value"];
      if (n.tag == "select") e.options = options_of(&n);
    }
    return out;
  }

  Observation observe() {
    Observation o;
    o.url = page_url();
    o.clock_ms = clock;
    o.storage = storage;
    o.dialog = dialog;
    targets.clear();
    if (!page) {
      o.dom.tag = "body";
      return o;
    }
    if (const html::Node* t = page->doc.first("title")) o.title = t->text_content();
    const json s = state();
    json derived = json::object();
    if (page->judge) {
      try {
        derived = page->judge->derive_all(s);
      } catch (const std::exception&) {
        derived = json::object();
      }
    }

    std::vector<InteractiveElement> els;
    std::vector<Target> tg;
    std::optional<SnapshotNode> popup;
    if (page->popup_visible) {
      SnapshotNode overlay;
      overlay.tag = "div";
      overlay.attrs = {{"id", "forge-popup"}};
      overlay.layer = "popup";
      SnapshotNode box;
      box.tag = "div";
      box.layer = "popup";
      SnapshotNode h2;
      h2.tag = "h2";
      h2.text = "Plan a guided visit";
      h2.layer = "popup";
      SnapshotNode p;
      p.tag = "p";
      p.text = "Book a walk-through this month and receive a voucher for your next reservation.";
      p.layer = "popup";
      box.children = {h2, p};
      box.children.push_back(overlay_button("Book a visit", "popup-cta", "popup", els, tg));
      box.children.push_back(overlay_button("No thanks", "dismiss-popup", "popup", els, tg));
      box.text = collapse(h2.text + " " + p.text + " Book a visit No thanks");
      overlay.text = box.text;
      overlay.children.push_back(std::move(box));
      popup = std::move(overlay);
    }

    const html::Node* body = page->doc.first("body");
    if (!body) body = &page->doc.root();
    o.dom = render(*body, s, derived, els, tg);
    o.dom.tag = "body";
    if (popup) {
      o.dom.children.push_back(*popup);
      o.dom.text = collapse(o.dom.text + " " + popup->text);
    }
    if (page->cookie_visible) {
      SnapshotNode bar;
      bar.tag = "div";
      bar.attrs = {{"id", "forge-cookie-banner"}};
      bar.layer = "banner";
      SnapshotNode span;
      span.tag = "span";
      span.text = "We use cookies to remember your preferences and improve your visit.";
      span.layer = "banner";
      bar.children.push_back(span);
      bar.children.push_back(overlay_button("Accept", "accept-cookies", "banner", els, tg));
      bar.text = collapse(span.text + " Accept");
      o.dom.text = collapse(o.dom.text + " " + bar.text);
      o.dom.children.push_back(std::move(bar));
    }
    o.elements = std::move(els);
    targets = std::move(tg);
    return o;
  }

  // ---- actions

  ActionOutcome go(const std::string& href, bool push = true) {
    std::string query;
    const auto [file, error] = resolve_target(href, query);
    if (file.empty()) return {false, error};
    if (push && page) history.emplace_back(page->file, page->query);
    clock += latency_for(file);
    load(file, query);
    return {true, "loaded /" + file};
  }

  const html::Node* form_of(const html::Node* n) const { return n ? n->closest("form") : nullptr; }

  ActionOutcome submit(const html::Node* form) {
    const bool forge_form = form->has_attr("data-forge-form");
    const bool validate = forge_form || !form->has_attr("novalidate");
    if (validate) {
      for (const html::Node* f : page->doc.find_all([form](const html::Node& x) {
             return is_field(x) && x.closest("form") == form && x.has_attr("required") && !x.has_attr("disabled");
           })) {
        if (!util::trim(page->values[f]).empty()) continue;
        const std::string msg = f->attr("data-forge-message").value_or("Please fill out this field.");
        if (page->runtime) {
          page->errors[f] = msg;
          return {false, "form not submitted: " + msg};
        }
        if (page->blocking_scripts) {
          dialog = msg;
          return {false, "blocking dialog opened: " + msg};
        }
        return {false, "form not submitted"};
      }
    }
    const auto fields = page->doc.find_all([form](const html::Node& x) { return is_field(x) && x.closest("form") == form; });
    std::string action = form->attr("action").value_or("");
    if (forge_form) {
      json s = state();
      for (const html::Node* f : fields) {
        if (const auto name = f->attr("name")) s[*name] = page->values[f];
      }
      save_state(s);
      return go(action.empty() ? page->file : action);
    }
    std::string query;
    for (const html::Node* f : fields) {
      const auto name = f->attr("name");
      if (!name) continue;
      if (!query.empty()) query += '&';
      query += url_encode(*name) + "=" + url_encode(page->values[f]);
    }
    if (action.empty()) action = page->file;
    return go(action + (query.empty() ? "" : "?" + query));
  }

  ActionOutcome click(int index) {
    if (index < 0 || static_cast<std::size_t>(index) >= targets.size()) {
      return {false, "no element with index " + std::to_string(index)};
    }
    const Target t = targets[static_cast<std::size_t>(index)];
    if (t.layer == "popup") {
      storage[popup_key()] = "1";
      page->popup_visible = false;
      return {true, t.overlay == "popup-cta" ? "popup closed" : "popup dismissed"};
    }
    if (t.layer == "banner") {
      storage[cookie_key()] = "1";
      page->cookie_visible = false;
      return {true, "cookies accepted"};
    }
    if (page->popup_visible) return {false, "click intercepted by #forge-popup"};
    const html::Node& n = *t.node;
    if (n.has_attr("disabled")) return {false, "element is disabled"};
    if (n.tag == "a") {
      const std::string href = util::trim(n.attr("href").value_or(""));
      const std::string lower = util::to_lower(href);
      if (href.empty() || href[0] == '#' || util::starts_with(lower, "javascript:")) return {true, "no navigation"};
      if (util::starts_with(lower, "mailto:") || util::starts_with(lower, "tel:")) return {true, "opened " + href};
      return go(href);
    }
    if (const auto href = n.attr("data-href")) return go(*href);
    if (is_submit(n)) {
      if (const html::Node* form = form_of(&n)) return submit(form);
    }
    return {true, "clicked <" + n.tag + ">"};
  }

  ActionOutcome input(int index, const std::string& text) {
    if (index < 0 || static_cast<std::size_t>(index) >= targets.size()) {
      return {false, "no element with index " + std::to_string(index)};
    }
    const Target t = targets[static_cast<std::size_t>(index)];
    if (t.layer != "page" || !t.node || !is_field(*t.node)) return {false, "element does not accept input"};
    if (page->popup_visible) return {false, "input intercepted by #forge-popup"};
    const html::Node* n = t.node;
    if (n->has_attr("disabled") || n->has_attr("readonly")) return {false, "field is not editable"};
    std::string value = text;
    if (n->tag == "select") {
      const auto opts = options_of(n);
      auto hit = std::find_if(opts.begin(), opts.end(), [&](const auto& o) { return o.first == text; });
      if (hit == opts.end()) {
        const std::string want = util::to_lower(util::trim(text));
        hit = std::find_if(opts.begin(), opts.end(), [&](const auto& o) { return util::to_lower(util::trim(o.second)) == want; });
      }
      if (hit == opts.end()) return {false, "no option '" + text + "'"};
      value = hit->first;
    } else {
      const std::string type = util::to_lower(n->attr("type").value_or("text"));
      if (type == "submit" || type == "button" || type == "image") return {false, "element does not accept input"};
      if (type == "checkbox" || type == "radio") {
        const std::string t2 = util::to_lower(util::trim(text));
        value = (t2 == "true" || t2 == "on" || t2 == "yes" || t2 == "1") ? n->attr("value").value_or("on") : "";
      }
    }
    page->values[n] = value;
    page->errors.erase(n);
    const html::Node* form = form_of(n);
    if (form && form->has_attr("data-forge-form")) {
      if (const auto name = n->attr("name")) {
        json s = state();
        s[*name] = value;
        save_state(s);
      }
    }
    return {true, "value set"};
  }

  ActionOutcome dispatch(const BrowserAction& a) {
    if (!launched) throw InfrastructureError("simulated browser used before launch");
    if (targets.empty() && page) observe();
    ActionOutcome out;
    if (dialog) {
      out = {false, "blocked by dialog: " + *dialog};
      dialog.reset();
    } else {
      switch (a.kind) {
      case ActionKind::Navigate:
        out = go(a.url);
        break;
      case ActionKind::Click:
        out = page ? click(a.index) : ActionOutcome{false, "no page loaded"};
        break;
      case ActionKind::Input:
        out = page ? input(a.index, a.text) : ActionOutcome{false, "no page loaded"};
        break;
      case ActionKind::Scroll:
        if (a.index >= 0 && static_cast<std::size_t>(a.index) >= targets.size()) {
          out = {false, "no element with index " + std::to_string(a.index)};
        } else {
          out = {true, a.index >= 0 ? "scrolled to element" : "scrolled " + (a.direction.empty() ? "down" : a.direction)};
        }
        break;
      case ActionKind::Back:
        if (history.empty()) {
          out = {false, "no history"};
        } else {
          const auto [file, query] = history.back();
          history.pop_back();
          out = go(query.empty() ? file : file + "?" + query, false);
        }
        break;
      case ActionKind::Terminate:
        out = {true, "terminated"};
        break;
      }
    }
    clock += options.action_ms;
    tick();
    targets.clear();
    return out;
  }
};

SimulatedBrowser::SimulatedBrowser(const WebsiteBundle& bundle, SessionOptions options)
    : impl_(std::make_unique<Impl>(bundle, std::move(options))) {}

SimulatedBrowser::~SimulatedBrowser() = default;

void SimulatedBrowser::launch() { impl_->launched = true; }

Observation SimulatedBrowser::observe() {
  if (!impl_->launched) throw InfrastructureError("simulated browser used before launch");
  return impl_->observe();
}

ActionOutcome SimulatedBrowser::dispatch(const BrowserAction& action) { return impl_->dispatch(action); }

const std::map<std::string, std::string>& SimulatedBrowser::storage() const { return impl_->storage; }

void SimulatedBrowser::set_page_seed(std::uint32_t seed) { impl_->page_seed = seed; }

// ---- scripted solver -------------------------------------------------------------

ScriptedSolver::ScriptedSolver(SolutionFile solution, std::string start_url)
    : solution_(std::move(solution)), start_url_(std::move(start_url)) {}

void ScriptedSolver::override_answer(const std::string& field, const std::string& value) { overrides_[field] = value; }

namespace {

const InteractiveElement* overlay_control(const Observation& o, const std::string& layer, const std::string& action) {
  for (const auto& e : o.elements) {
    auto it = e.attrs.find("data-forge-action");
    if (e.layer == layer && it != e.attrs.end() && it->second == action) return &e;
  }
  return nullptr;
}

} // namespace

SolverTurn ScriptedSolver::next(const Observation& obs, const std::vector<TraceStep>& history) {
  if (pending_) {
    cursor_ = !history.empty() && !history.back().outcome.ok ? *pending_ : *pending_ + 1;
    pending_.reset();
  }
  if (obs.dialog) return {"A dialog is in the way; acknowledging it.", BrowserAction::scroll("down")};
  if (const auto* e = overlay_control(obs, "popup", "dismiss-popup")) {
    return {"A promotional popup covers the page; dismissing it.", BrowserAction::click(e->index)};
  }
  if (const auto* e = overlay_control(obs, "banner", "accept-cookies")) {
    return {"Accepting the cookie banner.", BrowserAction::click(e->index)};
  }
  if (!started_) {
    started_ = true;
    const bool opens = !solution_.steps.empty() && solution_.steps.front().action &&
                       solution_.steps.front().action->kind == "navigate";
    if (!opens) return {"Opening the site.", BrowserAction::navigate(start_url_)};
  }
  while (cursor_ < solution_.steps.size()) {
    const SolutionAction& step = solution_.steps[cursor_];
    if (!step.action) {
      ++cursor_;
      continue;
    }
    const ActionSpec& a = *step.action;
    const SnapshotNode* node = nullptr;
    if (!a.selector.empty()) {
      node = snapshot_select(obs.dom, a.selector);
      if (!node) return {step.description + " Looking for " + a.selector + ".", BrowserAction::scroll("down")};
    }
    if (a.kind == "read") {
      answer_[a.field] = node->text;
      ++cursor_;
      continue;
    }
    pending_ = cursor_;
    if (a.kind == "navigate") return {step.description, BrowserAction::navigate(a.url)};
    if (a.kind == "back") return {step.description, BrowserAction::back()};
    if (a.kind == "scroll") {
      BrowserAction s = BrowserAction::scroll(node ? "" : (a.text.empty() ? "down" : a.text));
      if (node) s.index = node->index;
      return {step.description, s};
    }
    if (node->index < 0) {
      pending_.reset();
      return {step.description + " The target is not interactive.", BrowserAction::scroll("down")};
    }
    if (a.kind == "click") return {step.description, BrowserAction::click(node->index)};
    if (a.kind == "input") return {step.description, BrowserAction::input(node->index, a.text)};
    pending_.reset();
    ++cursor_;
  }
  auto answer = answer_;
  for (const auto& [k, v] : overrides_) answer[k] = v;
  return {"All steps done; reporting the answer.", BrowserAction::terminate(answer)};
}

// ---- verdicts --------------------------------------------------------------------

std::string failure_mode_name(FailureMode m) {
  switch (m) {
  case FailureMode::GtMismatch:
    return "gt_mismatch";
  case FailureMode::LogicFlaw:
    return "logic_flaw";
  case FailureMode::RepeatedActionFailure:
    return "repeated_action_failure";
  case FailureMode::StepBudgetExceeded:
    return "step_budget_exceeded";
  }
  return "gt_mismatch";
}

std::optional<FailureMode> failure_mode_from_name(const std::string& s) {
  for (auto m : {FailureMode::GtMismatch, FailureMode::LogicFlaw, FailureMode::RepeatedActionFailure,
                 FailureMode::StepBudgetExceeded}) {
    if (failure_mode_name(m) == s) return m;
  }
  return std::nullopt;
}

json TraceStep::to_json() const {
  return {{"step", step},
          {"url", url},
          {"observation", observation_digest},
          {"reasoning", reasoning},
          {"action", action.to_json()},
          {"outcome", {{"ok", outcome.ok}, {"detail", outcome.detail}}}};
}

TraceStep TraceStep::from_json(const json& j) {
  TraceStep t;
  t.step = j.at("step").get<int>();
  t.url = j.value("url", "");
  t.observation_digest = j.value("observation", "");
  t.reasoning = j.value("reasoning", "");
  t.action = BrowserAction::from_json(j.at("action"));
  t.outcome.ok = j.at("outcome").value("ok", false);
  t.outcome.detail = j.at("outcome").value("detail", "");
  return t;
}

json Verdict::to_json() const {
  json t = json::array();
  for (const auto& s : trace) t.push_back(s.to_json());
  json j = {{"solvable", solvable}, {"steps_used", steps_used}, {"detail", detail}, {"answer", answer}, {"trace", t}};
  j["failure_mode"] = failure_mode ? json(failure_mode_name(*failure_mode)) : json();
  return j;
}

Verdict Verdict::from_json(const json& j) {
  Verdict v;
  v.solvable = j.at("solvable").get<bool>();
  v.steps_used = j.at("steps_used").get<int>();
  if (j.contains("failure_mode") && !j.at("failure_mode").is_null()) {
    v.failure_mode = failure_mode_from_name(j.at("failure_mode").get<std::string>());
    if (!v.failure_mode) throw ParseError("unknown failure mode");
  }
  v.detail = j.value("detail", "");
  v.answer = j.value("answer", std::map<std::string, std::string>{});
  for (const auto& s : j.value("trace", json::array())) v.trace.push_back(TraceStep::from_json(s));
  return v;
}

std::string Verdict::digest() const { return util::sha256_hex(to_json().dump()); }

RetryDecision retry_gate(const std::vector<AttemptRecord>& history, int limit) {
  if (limit <= 0 || history.size() < static_cast<std::size_t>(limit)) return RetryDecision::Continue;
  const auto& last = history.back();
  for (std::size_t i = history.size() - static_cast<std::size_t>(limit); i < history.size(); ++i) {
    if (history[i].ok || history[i].action_key != last.action_key) return RetryDecision::Continue;
  }
  return RetryDecision::AbortRepeatedFailure;
}

LogicCheck check_solution_logic(const SolutionFile& solution) {
  LogicCheck out;
  const json& witness = solution.witness_state;
  json derived = json::object();
  if (solution.judge) derived = solution.judge->derive_all(witness);
  const json constants = solution.judge ? solution.judge->constants : json::object();
  for (const auto& [field, source] : solution.answer_map) {
    auto expected = solution.expected_final_state.find(field);
    if (expected == solution.expected_final_state.end()) {
      out.ok = false;
      out.detail = "answer field " + field + " has no expected value";
      return out;
    }
    std::string value;
    if (source == "@code") {
      if (!solution.judge) {
        out.ok = false;
        out.detail = field + " is produced by the judge but the solution carries none";
        return out;
      }
      std::string outcome;
      try {
        outcome = solution.judge->match(witness);
      } catch (const ConfigError& e) {
        out.ok = false;
        out.detail = field + ": " + e.what();
        return out;
      }
      if (outcome != kCorrectOutcome) {
        out.ok = false;
        out.detail = "witness state resolves to outcome " + outcome + " instead of " + kCorrectOutcome;
        return out;
      }
      value = expected->second;
    } else {
      try {
        const expr::Env env{&witness, &constants, &derived};
        value = expr::display(expr::Expr::parse(source).eval(env));
      } catch (const ParseError& e) {
        out.ok = false;
        out.detail = field + ": " + e.what();
        return out;
      }
    }
    out.derived[field] = value;
    if (value != expected->second) {
      out.ok = false;
      out.detail = field + " derives to '" + value + "' but the expected value is '" + expected->second + "'";
      return out;
    }
  }
  return out;
}

Verdict replay_solution(const WebsiteBundle& bundle, BrowserSession& session, Solver& solver,
                        const ReplayOptions& options) {
  Verdict v;
  if (options.check_logic) {
    const LogicCheck logic = check_solution_logic(bundle.solution);
    if (!logic.ok) {
      v.failure_mode = FailureMode::LogicFlaw;
      v.detail = logic.detail;
      return v;
    }
  }
  session.launch();
  std::vector<AttemptRecord> attempts;
  const std::string code_field = bundle.answer.code_field;
  while (v.steps_used < options.budget) {
    const Observation obs = session.observe();
    const SolverTurn turn = solver.next(obs, v.trace);
    ++v.steps_used;
    TraceStep step;
    step.step = v.steps_used;
    step.url = obs.url;
    step.observation_digest = obs.digest();
    step.reasoning = turn.reasoning;
    step.action = turn.action;
    if (turn.action.kind == ActionKind::Terminate) {
      step.outcome = {true, "terminated"};
      v.trace.push_back(step);
      v.answer = turn.action.answer;
      std::vector<std::string> wrong;
      for (const auto& [field, expected] : bundle.solution.expected_final_state) {
        auto it = v.answer.find(field);
        const std::map<std::string, std::string> got = {{field, it == v.answer.end() ? "" : it->second}};
        const std::map<std::string, std::string> want = {{field, expected}};
        const bool ok = it != v.answer.end() && judge_answer(bundle.answer.answer_type, got, want, code_field);
        if (!ok) wrong.push_back(field + "='" + (it == v.answer.end() ? "<missing>" : it->second) + "'");
      }
      if (wrong.empty()) {
        v.solvable = true;
        v.detail = "answer matches the expected final state";
      } else {
        v.failure_mode = FailureMode::GtMismatch;
        v.detail = "mismatched fields: " + [&] {
          std::string s;
          for (const auto& w : wrong) s += (s.empty() ? "" : ", ") + w;
          return s;
        }();
      }
      session.close();
      return v;
    }
    step.outcome = session.dispatch(turn.action);
    v.trace.push_back(step);
    attempts.push_back({turn.action.key(), step.outcome.ok});
    if (retry_gate(attempts, options.retry_limit) == RetryDecision::AbortRepeatedFailure) {
      v.failure_mode = FailureMode::RepeatedActionFailure;
      v.detail = "action failed " + std::to_string(options.retry_limit) + " times in a row: " + turn.action.key() +
                 " (" + step.outcome.detail + ")";
      session.close();
      return v;
    }
  }
  v.failure_mode = FailureMode::StepBudgetExceeded;
  v.detail = "no answer within " + std::to_string(options.budget) + " steps";
  session.close();
  return v;
}

void write_trace(const std::filesystem::path& path, const Verdict& verdict) {
  std::string out;
  for (const auto& s : verdict.trace) out += s.to_json().dump() + "\n";
  util::write_file(path, out);
}

std::vector<TraceStep> read_trace(const std::filesystem::path& path) {
  std::vector<TraceStep> out;
  std::istringstream in(util::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    try {
      out.push_back(TraceStep::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return out;
}

BenchmarkManifest filter_benchmark(const std::vector<TaskVerdict>& tasks, const std::string& benchmark_id) {
  BenchmarkManifest m;
  m.benchmark_id = benchmark_id;
  std::set<std::string> seen;
  for (const auto& t : tasks) {
    if (!seen.insert(t.task_id).second) throw ConfigError("task " + t.task_id + " has more than one verdict");
    if (!t.verdict) continue;
    auto& cell = m.pass_rates.cells[{t.domain, t.level}];
    cell.attempted += 1;
    if (!t.verdict->solvable) continue;
    cell.passed += 1;
    m.tasks.push_back({t.task_id, t.domain, t.level, t.difficulty, t.bundle_path, t.verdict->digest()});
  }
  std::sort(m.tasks.begin(), m.tasks.end(), [](const ManifestTask& a, const ManifestTask& b) { return a.task_id < b.task_id; });
  return m;
}

} // namespace forge
