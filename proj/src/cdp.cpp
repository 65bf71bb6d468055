#include "forge/validation.hpp"

#include "forge/codec.hpp"
#include "forge/errors.hpp"
#include "forge/util.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>

#include <chrono>
#include <csignal>
#include <deque>
#include <fstream>
#include <regex>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>

extern char** environ;

namespace forge {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

// ---- connection ------------------------------------------------------------------

struct CdpConnection::Impl {
  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws{ioc};
  int timeout_ms;
  long long next_id = 1;
  std::deque<json> events;
  bool open = false;
  bool accept_dialogs = false;

  explicit Impl(int t) : timeout_ms(t) {}

  template <class Start>
  void run(Start&& start, const std::string& what) {
    bool done = false;
    beast::error_code ec;
    start([&](beast::error_code e, auto&&...) {
      done = true;
      ec = e;
    });
    ioc.restart();
    ioc.run_for(std::chrono::milliseconds(timeout_ms));
    if (!done) {
      beast::get_lowest_layer(ws).cancel();
      ioc.restart();
      ioc.run();
      open = false;
      throw InfrastructureError("devtools " + what + " timed out after " + std::to_string(timeout_ms) + " ms");
    }
    if (ec) {
      open = false;
      throw InfrastructureError("devtools " + what + ": " + ec.message());
    }
  }

  json read() {
    beast::flat_buffer buffer;
    run([&](auto h) { ws.async_read(buffer, h); }, "read");
    try {
      return json::parse(beast::buffers_to_string(buffer.data()));
    } catch (const json::exception& e) {
      throw InfrastructureError(std::string("devtools sent malformed JSON: ") + e.what());
    }
  }

  void write(const json& message) {
    const std::string text = message.dump();
    run([&](auto h) { ws.async_write(net::buffer(text), h); }, "write");
  }
};

CdpConnection::CdpConnection(const std::string& ws_url, int timeout_ms) : impl_(std::make_unique<Impl>(timeout_ms)) {
  static const std::regex pattern(R"(^ws://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(ws_url, m, pattern)) throw InfrastructureError("unsupported devtools url '" + ws_url + "'");
  const std::string host = m[1];
  const std::string port = m[2].matched ? std::string(m[2]) : "80";
  const std::string path = m[3].matched ? std::string(m[3]) : "/";
  tcp::resolver resolver(impl_->ioc);
  beast::error_code ec;
  const auto endpoints = resolver.resolve(host, port, ec);
  if (ec) throw InfrastructureError("devtools resolve " + host + ": " + ec.message());
  impl_->run([&](auto h) { beast::get_lowest_layer(impl_->ws).async_connect(endpoints, h); }, "connect");
  impl_->run([&](auto h) { impl_->ws.async_handshake(host + ":" + port, path, h); }, "handshake");
  impl_->ws.read_message_max(64 * 1024 * 1024);
  impl_->open = true;
}

CdpConnection::~CdpConnection() {
  try {
    close();
  } catch (const Error&) {
  }
}

json CdpConnection::call(const std::string& method, const json& params) {
  if (!impl_->open) throw InfrastructureError("devtools connection is closed");
  const long long id = impl_->next_id++;
  impl_->write({{"id", id}, {"method", method}, {"params", params}});
  while (true) {
    json message = impl_->read();
    if (!message.contains("id")) {
      if (impl_->accept_dialogs && message.value("method", "") == "Page.javascriptDialogOpening") {
        impl_->write({{"id", impl_->next_id++}, {"method", "Page.handleJavaScriptDialog"}, {"params", {{"accept", true}}}});
      }
      impl_->events.push_back(std::move(message));
      continue;
    }
    if (message.at("id").get<long long>() != id) continue;
    if (message.contains("error")) {
      throw InfrastructureError("devtools " + method + ": " + message.at("error").value("message", "error"));
    }
    return message.value("result", json::object());
  }
}

std::vector<json> CdpConnection::drain_events() {
  std::vector<json> out(impl_->events.begin(), impl_->events.end());
  impl_->events.clear();
  return out;
}

void CdpConnection::auto_accept_dialogs(bool on) { impl_->accept_dialogs = on; }

void CdpConnection::close() {
  if (!impl_->open) return;
  impl_->open = false;
  try {
    impl_->run([&](auto h) { impl_->ws.async_close(websocket::close_code::normal, h); }, "close");
  } catch (const InfrastructureError&) {
  }
}

// ---- browser ---------------------------------------------------------------------

const std::string& CdpBrowser::snapshot_script() {
  static const std::string script = R"JS((() => {
  const SKIP = new Set(['HEAD', 'SCRIPT', 'STYLE', 'TEMPLATE', 'NOSCRIPT', 'META', 'LINK', 'TITLE']);
  const KEEP = new Set(['id', 'class', 'name', 'type', 'href', 'value', 'role', 'placeholder', 'aria-label', 'alt',
    'src', 'for', 'action', 'required', 'min', 'max', 'title', 'data-href', 'selected', 'checked', 'disabled']);
  const FIELDS = ['INPUT', 'SELECT', 'TEXTAREA'];
  const hidden = (el) => {
    if (SKIP.has(el.tagName) || el.hasAttribute('hidden')) return true;
    if (el.tagName === 'INPUT' && (el.getAttribute('type') || '').toLowerCase() === 'hidden') return true;
    const cs = getComputedStyle(el);
    return cs.display === 'none' || cs.visibility === 'hidden';
  };
  const interactive = (el) => {
    if (el.tagName === 'A') return el.hasAttribute('href');
    if (['BUTTON', 'SELECT', 'TEXTAREA', 'INPUT'].includes(el.tagName)) return true;
    return el.hasAttribute('data-href') || el.hasAttribute('data-forge-action') || el.hasAttribute('onclick');
  };
  const layerOf = (el) => el.closest('#forge-popup') ? 'popup' : el.closest('#forge-cookie-banner') ? 'banner' : 'page';
  const collapse = (s) => s.replace(/\s+/g, ' ').trim();
  const fieldValue = (el) => (el.type === 'checkbox' || el.type === 'radio') ? (el.checked ? el.value : '') : el.value;
  document.querySelectorAll('[data-forge-index]').forEach((e) => e.removeAttribute('data-forge-index'));
  let next = 0;
  const elements = [];
  const walk = (el) => {
    const node = { tag: el.tagName.toLowerCase(), attrs: {}, text: '', index: -1, layer: layerOf(el), children: [] };
    for (const a of el.attributes) if (KEEP.has(a.name) || a.name.startsWith('data-forge')) node.attrs[a.name] = a.value;
    const field = FIELDS.includes(el.tagName);
    if (field) node.attrs.value = fieldValue(el);
    if (interactive(el)) {
      node.index = next++;
      el.setAttribute('data-forge-index', String(node.index));
    }
    let raw = '';
    if (el.tagName === 'SELECT') {
      raw = el.selectedIndex >= 0 ? el.options[el.selectedIndex].text : '';
    } else if (el.tagName !== 'TEXTAREA') {
      for (const c of el.childNodes) {
        if (c.nodeType === 3) raw += c.nodeValue;
        else if (c.nodeType === 1 && !hidden(c)) {
          const k = walk(c);
          raw += ' ' + k.text + ' ';
          node.children.push(k);
        }
      }
    }
    node.text = collapse(raw);
    if (node.index >= 0) {
      elements.push({ index: node.index, tag: node.tag, attrs: node.attrs, text: node.text,
        value: field ? node.attrs.value : '',
        options: el.tagName === 'SELECT' ? Array.from(el.options).map((o) => [o.value, o.text]) : [],
        layer: node.layer });
    }
    return node;
  };
  window.__forgeAct = (kind, index, text) => {
    if (kind === 'scroll') {
      if (index < 0) { window.scrollBy(0, (text === 'up' ? -0.8 : 0.8) * window.innerHeight); return JSON.stringify({ ok: true, detail: 'scrolled' }); }
    }
    const el = document.querySelector('[data-forge-index="' + index + '"]');
    if (!el) return JSON.stringify({ ok: false, detail: 'no element with index ' + index });
    el.scrollIntoView({ block: 'center' });
    if (kind === 'scroll') return JSON.stringify({ ok: true, detail: 'scrolled to element' });
    const popup = document.getElementById('forge-popup');
    if (popup && !popup.contains(el) && getComputedStyle(popup).display !== 'none') {
      return JSON.stringify({ ok: false, detail: kind + ' intercepted by #forge-popup' });
    }
    if (el.disabled) return JSON.stringify({ ok: false, detail: 'element is disabled' });
    if (kind === 'click') { el.click(); return JSON.stringify({ ok: true, detail: 'clicked <' + el.tagName.toLowerCase() + '>' }); }
    if (!FIELDS.includes(el.tagName)) return JSON.stringify({ ok: false, detail: 'element does not accept input' });
    if (el.tagName === 'SELECT') {
      const want = String(text).trim().toLowerCase();
      const opt = Array.from(el.options).find((o) => o.value === text) ||
        Array.from(el.options).find((o) => o.text.trim().toLowerCase() === want);
      if (!opt) return JSON.stringify({ ok: false, detail: "no option '" + text + "'" });
      el.value = opt.value;
    } else if (el.type === 'checkbox' || el.type === 'radio') {
      el.checked = ['true', 'on', 'yes', '1'].includes(String(text).trim().toLowerCase());
    } else {
      el.focus();
      el.value = text;
    }
    el.dispatchEvent(new Event('input', { bubbles: true }));
    el.dispatchEvent(new Event('change', { bubbles: true }));
    return JSON.stringify({ ok: true, detail: 'value set' });
  };
  const storage = {};
  try {
    for (let i = 0; i < localStorage.length; i++) { const k = localStorage.key(i); storage[k] = localStorage.getItem(k); }
  } catch (e) { /* storage unavailable */ }
  const dom = document.body ? walk(document.body) : { tag: 'body', attrs: {}, text: '', index: -1, layer: 'page', children: [] };
  dom.tag = 'body';
  elements.sort((a, b) => a.index - b.index);
  return JSON.stringify({ url: location.href, title: document.title, dom, elements, storage });
})())JS";
  return script;
}

struct CdpBrowser::Impl {
  CdpOptions options;
  std::unique_ptr<CdpConnection> conn;
  pid_t child = 0;
  std::filesystem::path profile;
  std::optional<std::string> dialog;
  std::chrono::steady_clock::time_point started;

  explicit Impl(CdpOptions o) : options(std::move(o)) {}

  void absorb_events() {
    for (const auto& e : conn->drain_events()) {
      if (e.value("method", "") == "Page.javascriptDialogOpening") {
        dialog = e.at("params").value("message", "");
      }
    }
  }

  json call(const std::string& method, const json& params = json::object()) {
    json r = conn->call(method, params);
    absorb_events();
    return r;
  }

  json evaluate(const std::string& expression) {
    const json r = call("Runtime.evaluate", {{"expression", expression}, {"returnByValue", true}, {"awaitPromise", false}});
    if (r.contains("exceptionDetails")) {
      throw InfrastructureError("page script failed: " + r.at("exceptionDetails").value("text", "exception"));
    }
    return r.contains("result") ? r.at("result").value("value", json()) : json();
  }

  json act(const std::string& kind, int index, const std::string& text) {
    const json v = evaluate("window.__forgeAct(" + json(kind).dump() + ", " + std::to_string(index) + ", " +
                            json(text).dump() + ")");
    if (!v.is_string()) throw InfrastructureError("page action returned no result");
    return json::parse(v.get<std::string>());
  }

  // Lets the page settle after an action: a short pause, then wait for load.
  void settle() {
    std::this_thread::sleep_for(std::chrono::milliseconds(std::min(options.session.action_ms, 300)));
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(options.session.timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
      if (dialog) return;
      const json state = evaluate("document.readyState");
      if (state == "complete") return;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    throw InfrastructureError("page did not finish loading");
  }

  std::string absolute(const std::string& url) const {
    if (url.find("://") != std::string::npos) return url;
    std::string base = options.start_url.empty() ? options.session.base_url : options.start_url;
    const auto slash = base.find_last_of('/');
    if (slash != std::string::npos && slash > base.find("://") + 2) base = base.substr(0, slash + 1);
    if (!url.empty() && url[0] == '/') {
      const auto root = base.find('/', base.find("://") + 3);
      return (root == std::string::npos ? base : base.substr(0, root)) + url;
    }
    return base + url;
  }

  void spawn_chrome() {
    if (options.chrome_path.empty()) throw InfrastructureError("no browser executable configured");
    profile = std::filesystem::temp_directory_path() /
              ("forge-cdp-" + std::to_string(::getpid()) + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(profile);
    std::vector<std::string> args = {options.chrome_path, "--remote-debugging-port=0",
                                     "--user-data-dir=" + profile.string(), "--no-first-run",
                                     "--no-default-browser-check", "--disable-extensions", "about:blank"};
    if (options.session.headless) args.insert(args.begin() + 1, "--headless=new");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    if (posix_spawn(&child, options.chrome_path.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
      child = 0;
      throw InfrastructureError("cannot start " + options.chrome_path);
    }
    const auto port_file = profile / "DevToolsActivePort";
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(options.session.timeout_ms);
    std::string port;
    while (std::chrono::steady_clock::now() < deadline) {
      std::ifstream in(port_file);
      if (in && std::getline(in, port) && !port.empty()) break;
      int status = 0;
      if (::waitpid(child, &status, WNOHANG) == child) {
        child = 0;
        throw InfrastructureError(options.chrome_path + " exited during startup");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    if (port.empty()) throw InfrastructureError("browser did not publish a debugging port");
    httplib::Client client("127.0.0.1", std::stoi(port));
    client.set_connection_timeout(std::chrono::milliseconds(options.session.timeout_ms));
    auto res = client.Get("/json/list");
    if (!res || res->status != 200) throw InfrastructureError("cannot list devtools targets");
    for (const auto& target : json::parse(res->body)) {
      if (target.value("type", "") == "page") {
        options.ws_url = target.value("webSocketDebuggerUrl", "");
        break;
      }
    }
    if (options.ws_url.empty()) throw InfrastructureError("browser exposes no page target");
  }

  void shutdown() {
    if (conn) {
      conn->close();
      conn.reset();
    }
    if (child > 0) {
      ::kill(child, SIGTERM);
      int status = 0;
      ::waitpid(child, &status, 0);
      child = 0;
    }
    if (!profile.empty()) {
      std::error_code ec;
      std::filesystem::remove_all(profile, ec);
      profile.clear();
    }
  }
};

CdpBrowser::CdpBrowser(CdpOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

CdpBrowser::~CdpBrowser() { impl_->shutdown(); }

void CdpBrowser::launch() {
  if (impl_->options.ws_url.empty()) impl_->spawn_chrome();
  impl_->conn = std::make_unique<CdpConnection>(impl_->options.ws_url, impl_->options.session.timeout_ms);
  impl_->conn->auto_accept_dialogs(true);
  impl_->call("Page.enable");
  impl_->call("Runtime.enable");
  impl_->started = std::chrono::steady_clock::now();
  if (!impl_->options.start_url.empty()) {
    impl_->call("Page.navigate", {{"url", impl_->options.start_url}});
    impl_->settle();
  }
}

Observation CdpBrowser::observe() {
  if (!impl_->conn) throw InfrastructureError("browser used before launch");
  const json v = impl_->evaluate(snapshot_script());
  if (!v.is_string()) throw InfrastructureError("snapshot script returned no result");
  Observation o = Observation::from_json(json::parse(v.get<std::string>()));
  if (impl_->options.session.screenshots) {
    const json shot = impl_->call("Page.captureScreenshot", {{"format", "png"}});
    if (shot.contains("data")) o.screenshot = Base64Codec().decode(shot.at("data").get<std::string>());
  }
  o.dialog = impl_->dialog;
  o.clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - impl_->started).count();
  return o;
}

ActionOutcome CdpBrowser::dispatch(const BrowserAction& a) {
  if (!impl_->conn) throw InfrastructureError("browser used before launch");
  if (impl_->dialog) {
    const std::string text = *impl_->dialog;
    impl_->dialog.reset();
    return {false, "blocked by dialog: " + text};
  }
  ActionOutcome out;
  switch (a.kind) {
  case ActionKind::Navigate: {
    const json r = impl_->call("Page.navigate", {{"url", impl_->absolute(a.url)}});
    if (r.contains("errorText")) return {false, r.at("errorText").get<std::string>()};
    out = {true, "loaded " + a.url};
    break;
  }
  case ActionKind::Click:
  case ActionKind::Input:
  case ActionKind::Scroll: {
    const std::string kind = a.kind == ActionKind::Click ? "click" : a.kind == ActionKind::Input ? "input" : "scroll";
    const json r = impl_->act(kind, a.index, a.kind == ActionKind::Scroll ? a.direction : a.text);
    out = {r.value("ok", false), r.value("detail", "")};
    break;
  }
  case ActionKind::Back:
    impl_->evaluate("history.back()");
    out = {true, "went back"};
    break;
  case ActionKind::Terminate:
    return {true, "terminated"};
  }
  impl_->settle();
  return out;
}

void CdpBrowser::close() { impl_->shutdown(); }

} // namespace forge
