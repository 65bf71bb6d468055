#include <gtest/gtest.h>

#include "forge/bundle.hpp"
#include "forge/codec.hpp"
#include "forge/errors.hpp"
#include "forge/harness.hpp"
#include "forge/refinement.hpp"
#include "forge/util.hpp"
#include "forge/validation.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <random>
#include <thread>

using namespace forge;
using nlohmann::json;

namespace {

std::string fixture(const std::string& name) {
  return util::read_file(std::string(FORGE_FIXTURE_DIR) + "/" + name);
}

const WebsiteBundle& wedding() {
  static const WebsiteBundle b = [] {
    auto p = std::make_shared<ScriptedProvider>("mock");
    p->add("generate:", fixture("wedding/generation.md"));
    StubAssetProvider assets;
    return assemble_bundle(parse_blueprint(fixture("wedding/refined.md")), ProviderProfile::precision(p), assets,
                           "D1-L3-000");
  }();
  return b;
}

const WebsiteBundle& refined() {
  static const WebsiteBundle b = refine_bundle(wedding(), NoiseConfig{}).first;
  return b;
}

Verdict replay(const WebsiteBundle& bundle, Solver& solver, ReplayOptions options = {}, std::uint32_t seed = 7) {
  SessionOptions so;
  so.seed = seed;
  SimulatedBrowser browser(bundle, so);
  browser.set_page_seed(seed);
  return replay_solution(bundle, browser, solver, options);
}

int find_index(const Observation& o, const std::string& selector) {
  const SnapshotNode* n = snapshot_select(o.dom, selector);
  return n ? n->index : -1;
}

bool has_text(const SnapshotNode& n, const std::string& needle) {
  if (util::contains(n.text, needle)) return true;
  for (const auto& c : n.children) {
    if (has_text(c, needle)) return true;
  }
  return false;
}

} // namespace

// ---- selectors and observations -------------------------------------------------

TEST(SnapshotSelect, CompoundSelectors) {
  SnapshotNode root{"body", {}, "", -1, "page", {}};
  root.children.push_back({"a", {{"href", "venue book.html"}, {"class", "btn primary"}}, "Book", 0, "page", {}});
  root.children.push_back({"strong", {{"id", "confirmation-code"}}, "GEG", -1, "page", {}});
  EXPECT_EQ(snapshot_select(root, "#confirmation-code")->text, "GEG");
  EXPECT_EQ(snapshot_select(root, "a[href=\"venue book.html\"]")->index, 0);
  EXPECT_EQ(snapshot_select(root, "a.btn.primary")->text, "Book");
  EXPECT_EQ(snapshot_select(root, "[href]")->tag, "a");
  EXPECT_EQ(snapshot_select(root, "#missing"), nullptr);
  EXPECT_THROW(snapshot_select(root, "main a"), ParseError);
  EXPECT_THROW(snapshot_select(root, "a:hover"), ParseError);
  EXPECT_THROW(snapshot_select(root, "a[href"), ParseError);
  EXPECT_THROW(snapshot_select(root, ""), ParseError);
}

TEST(Observation, JsonRoundTrip) {
  SimulatedBrowser b(refined());
  b.launch();
  b.dispatch(BrowserAction::navigate("venue_book.html"));
  Observation o = b.observe();
  o.screenshot = std::string("\x89PNG\r\n", 6);
  const Observation back = Observation::from_json(o.to_json(true));
  EXPECT_EQ(back.dom, o.dom);
  EXPECT_EQ(back.elements, o.elements);
  EXPECT_EQ(back.screenshot, o.screenshot);
  EXPECT_EQ(back.digest(), o.digest());
  EXPECT_FALSE(o.to_json(false).contains("screenshot"));
  EXPECT_TRUE(o.to_json(false).contains("screenshot_sha256"));
}

TEST(BrowserAction, JsonRoundTrip) {
  for (const auto& a : {BrowserAction::navigate("index.html"), BrowserAction::click(4), BrowserAction::input(2, "80"),
                        BrowserAction::scroll("up"), BrowserAction::back(),
                        BrowserAction::terminate({{"total_cost", "11440.00"}})}) {
    EXPECT_EQ(BrowserAction::from_json(a.to_json()), a);
  }
  EXPECT_NE(BrowserAction::click(1).key(), BrowserAction::click(2).key());
  EXPECT_THROW(BrowserAction::from_json({{"kind", "hover"}}), ParseError);
}

// ---- simulated browser ----------------------------------------------------------

TEST(SimulatedBrowser, ControlFilesAreNotReachable) {
  SimulatedBrowser b(refined());
  b.launch();
  for (const char* f : {"solution.json", "/solution.json", "metadata.json", "task.json"}) {
    const auto out = b.dispatch(BrowserAction::navigate(f));
    EXPECT_FALSE(out.ok) << f;
    EXPECT_TRUE(util::contains(out.detail, "404")) << out.detail;
  }
  EXPECT_FALSE(b.dispatch(BrowserAction::navigate("https://example.com/")).ok);
  EXPECT_TRUE(b.dispatch(BrowserAction::navigate("/")).ok);
  EXPECT_EQ(b.observe().url, "http://forge.local/index.html");
}

TEST(SimulatedBrowser, CookieBannerAfterOneSecondAndAcceptPersists) {
  SessionOptions so;
  so.action_ms = 200;
  SimulatedBrowser b(refined(), so);
  b.launch();
  ASSERT_TRUE(b.dispatch(BrowserAction::navigate("index.html")).ok);
  const long long loaded = b.observe().clock_ms - 200;
  Observation o = b.observe();
  while (!o.has_layer("banner")) {
    ASSERT_LT(o.clock_ms - loaded, 5000);
    b.dispatch(BrowserAction::scroll("down"));
    o = b.observe();
  }
  EXPECT_GE(o.clock_ms - loaded, 1000);
  EXPECT_LT(o.clock_ms - loaded, 1200);
  int accept = -1;
  for (const auto& e : o.elements) {
    if (e.layer == "banner") accept = e.index;
  }
  ASSERT_TRUE(b.dispatch(BrowserAction::click(accept)).ok);
  EXPECT_EQ(b.storage().at("forge_cookie_consent"), "1");
  b.dispatch(BrowserAction::navigate("search.html"));
  for (int i = 0; i < 10; ++i) {
    EXPECT_FALSE(b.observe().has_layer("banner"));
    b.dispatch(BrowserAction::scroll("down"));
  }
}

TEST(SimulatedBrowser, PopupDelayWithinWindowAndDismissalSuppresses) {
  for (std::uint32_t seed = 0; seed < 200; ++seed) {
    SessionOptions so;
    so.action_ms = 100;
    so.seed = seed;
    SimulatedBrowser b(refined(), so);
    b.set_page_seed(seed * 2654435761u);
    b.launch();
    ASSERT_TRUE(b.dispatch(BrowserAction::navigate("index.html")).ok);
    const long long loaded = b.observe().clock_ms - 100;
    Observation o = b.observe();
    while (!o.has_layer("popup")) {
      ASSERT_LE(o.clock_ms - loaded, 15000) << "seed " << seed;
      b.dispatch(BrowserAction::scroll("down"));
      o = b.observe();
    }
    const long long shown = o.clock_ms - loaded;
    ASSERT_GE(shown, 5000) << "seed " << seed;
    ASSERT_LT(shown, 15100) << "seed " << seed;
    if (seed % 20 != 0) continue;
    // Page content is covered while the popup is up.
    const int link = find_index(o, "a[href=\"search.html\"]");
    if (link >= 0) EXPECT_FALSE(b.dispatch(BrowserAction::click(link)).ok);
    o = b.observe();
    int dismiss = -1;
    for (const auto& e : o.elements) {
      if (e.layer == "popup" && e.attrs.count("data-forge-action")) dismiss = e.index;
    }
    ASSERT_GE(dismiss, 0);
    ASSERT_TRUE(b.dispatch(BrowserAction::click(dismiss)).ok);
    for (int reload = 0; reload < 3; ++reload) {
      ASSERT_TRUE(b.dispatch(BrowserAction::navigate("index.html")).ok);
      for (int i = 0; i < 170; ++i) {
        ASSERT_FALSE(b.observe().has_layer("popup"));
        b.dispatch(BrowserAction::scroll("down"));
      }
    }
  }
}

TEST(SimulatedBrowser, InlineErrorAfterRefinement) {
  SimulatedBrowser b(refined());
  b.launch();
  b.dispatch(BrowserAction::navigate("venue_book.html"));
  Observation o = b.observe();
  const auto out = b.dispatch(BrowserAction::click(find_index(o, "#review-button")));
  EXPECT_FALSE(out.ok);
  o = b.observe();
  EXPECT_FALSE(o.dialog.has_value());
  EXPECT_TRUE(has_text(o.dom, "\xE2\x8A\x98 Please choose an event date."));
  EXPECT_EQ(o.url, "http://forge.local/venue_book.html");
  ASSERT_TRUE(b.dispatch(BrowserAction::input(find_index(o, "#date"), "2026-05-16")).ok);
  EXPECT_FALSE(has_text(b.observe().dom, "Please choose an event date."));
  const json state = json::parse(b.storage().at("geg_booking"));
  EXPECT_EQ(state.at("date"), "2026-05-16");
}

TEST(SimulatedBrowser, BlockingDialogBeforeRefinement) {
  SimulatedBrowser b(wedding());
  b.launch();
  b.dispatch(BrowserAction::navigate("venue_book.html"));
  Observation o = b.observe();
  EXPECT_FALSE(o.has_layer("banner"));
  const int review = find_index(o, "#review-button");
  b.dispatch(BrowserAction::click(review));
  o = b.observe();
  ASSERT_TRUE(o.dialog.has_value());
  const auto blocked = b.dispatch(BrowserAction::input(find_index(o, "#date"), "2026-05-16"));
  EXPECT_FALSE(blocked.ok);
  EXPECT_TRUE(util::starts_with(blocked.detail, "blocked by dialog"));
  EXPECT_FALSE(b.observe().dialog.has_value());
}

TEST(SimulatedBrowser, BindingsShowDerivedValues) {
  SimulatedBrowser b(refined());
  b.launch();
  b.dispatch(BrowserAction::navigate("venue_book.html"));
  Observation o = b.observe();
  b.dispatch(BrowserAction::input(find_index(o, "#guests"), "80"));
  b.dispatch(BrowserAction::input(find_index(o, "#catering"), "premium"));
  b.dispatch(BrowserAction::input(find_index(o, "#date"), "2026-05-16"));
  b.dispatch(BrowserAction::input(find_index(o, "#contact_name"), "Jordan Lee"));
  b.dispatch(BrowserAction::click(find_index(o, "#review-button")));
  o = b.observe();
  EXPECT_EQ(o.url, "http://forge.local/venue_review.html");
  b.dispatch(BrowserAction::click(find_index(o, "#confirm-pay")));
  o = b.observe();
  EXPECT_EQ(snapshot_select(o.dom, "#confirmation-code")->text, "GEG-2026-05841");
  EXPECT_EQ(snapshot_select(o.dom, "#total-charged")->text, "11440.00");
  EXPECT_EQ(snapshot_select(o.dom, "#booked-date")->text, "2026-05-16");
}

TEST(SimulatedBrowser, DeterministicForSeed) {
  auto run = [](std::uint32_t seed) {
    SessionOptions so;
    so.seed = seed;
    SimulatedBrowser b(refined(), so);
    b.set_page_seed(seed);
    b.launch();
    std::vector<std::string> digests;
    for (const char* page : {"index.html", "search.html", "venue_book.html", "index.html"}) {
      b.dispatch(BrowserAction::navigate(page));
      for (int i = 0; i < 5; ++i) {
        digests.push_back(b.observe().digest());
        b.dispatch(BrowserAction::scroll("down"));
      }
    }
    return digests;
  };
  EXPECT_EQ(run(11), run(11));
  EXPECT_NE(run(11), run(12));
}

// ---- retry gate and logic check -------------------------------------------------

TEST(RetryGate, Examples) {
  const std::string a = BrowserAction::click(1).key();
  const std::string b = BrowserAction::click(2).key();
  EXPECT_EQ(retry_gate({}), RetryDecision::Continue);
  EXPECT_EQ(retry_gate({{a, false}, {a, false}}), RetryDecision::Continue);
  EXPECT_EQ(retry_gate({{a, false}, {a, false}, {a, false}}), RetryDecision::AbortRepeatedFailure);
  EXPECT_EQ(retry_gate({{a, false}, {b, false}, {a, false}}), RetryDecision::Continue);
  EXPECT_EQ(retry_gate({{a, false}, {a, true}, {a, false}, {a, false}}), RetryDecision::Continue);
  EXPECT_EQ(retry_gate({{b, true}, {a, false}, {a, false}, {a, false}}), RetryDecision::AbortRepeatedFailure);
  EXPECT_EQ(retry_gate({{a, false}, {a, false}}, 2), RetryDecision::AbortRepeatedFailure);
}

TEST(RetryGate, MatchesBruteForceOverRandomHistories) {
  std::mt19937 rng(5);
  const std::vector<std::string> keys = {"x", "y"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<AttemptRecord> h(rng() % 8);
    for (auto& r : h) r = {keys[rng() % 2], rng() % 3 != 0};
    const int limit = 1 + static_cast<int>(rng() % 4);
    bool abort = static_cast<int>(h.size()) >= limit;
    for (int i = 0; abort && i < limit; ++i) {
      const auto& r = h[h.size() - 1 - static_cast<std::size_t>(i)];
      abort = !r.ok && r.action_key == h.back().action_key;
    }
    EXPECT_EQ(retry_gate(h, limit), abort ? RetryDecision::AbortRepeatedFailure : RetryDecision::Continue);
  }
}

TEST(LogicCheck, WeddingSolutionIsConsistent) {
  const LogicCheck c = check_solution_logic(refined().solution);
  EXPECT_TRUE(c.ok) << c.detail;
  EXPECT_EQ(c.derived.at("total_cost"), "11440.00");
  EXPECT_EQ(c.derived.at("confirmation_code"), "GEG-2026-05841");
  EXPECT_EQ(c.derived.at("correct_date"), "2026-05-16");
}

TEST(LogicCheck, DetectsFlaws) {
  SolutionFile s = refined().solution;
  s.expected_final_state["total_cost"] = "10400.00";
  LogicCheck c = check_solution_logic(s);
  EXPECT_FALSE(c.ok);
  EXPECT_TRUE(util::contains(c.detail, "total_cost")) << c.detail;

  s = refined().solution;
  s.witness_state["guests"] = "90";
  c = check_solution_logic(s);
  EXPECT_FALSE(c.ok);

  s = refined().solution;
  s.answer_map.clear();
  EXPECT_TRUE(check_solution_logic(s).ok);

  WebsiteBundle bad = refined();
  bad.solution.expected_final_state["total_cost"] = "10400.00";
  ScriptedSolver solver(bad.solution);
  const Verdict v = replay(bad, solver);
  EXPECT_EQ(v.failure_mode, FailureMode::LogicFlaw);
  EXPECT_EQ(v.steps_used, 0);
}

// ---- replay ---------------------------------------------------------------------

TEST(Replay, RefinedWeddingIsSolvable) {
  ScriptedSolver solver(refined().solution);
  const Verdict v = replay(refined(), solver);
  ASSERT_TRUE(v.solvable) << v.detail << "\n" << v.to_json().dump(1);
  EXPECT_FALSE(v.failure_mode.has_value());
  EXPECT_LE(v.steps_used, kMaxSolutionSteps);
  EXPECT_EQ(v.steps_used, static_cast<int>(v.trace.size()));
  EXPECT_EQ(v.answer.at("confirmation_code"), "GEG-2026-05841");
  EXPECT_EQ(v.answer.at("total_cost"), "11440.00");
  EXPECT_EQ(v.answer.at("correct_date"), "2026-05-16");
  EXPECT_EQ(v.trace.back().action.kind, ActionKind::Terminate);
}

TEST(Replay, SolvableAcrossSeeds) {
  for (std::uint32_t seed = 0; seed < 25; ++seed) {
    ScriptedSolver solver(refined().solution);
    const Verdict v = replay(refined(), solver, {}, seed);
    EXPECT_TRUE(v.solvable) << "seed " << seed << ": " << v.detail;
    EXPECT_LE(v.steps_used, kMaxSolutionSteps);
  }
}

TEST(Replay, FeeOmittedTotalIsGtMismatch) {
  ScriptedSolver solver(refined().solution);
  solver.override_answer("total_cost", "10400.00");
  const Verdict v = replay(refined(), solver);
  EXPECT_FALSE(v.solvable);
  EXPECT_EQ(v.failure_mode, FailureMode::GtMismatch);
  EXPECT_TRUE(util::contains(v.detail, "total_cost='10400.00'")) << v.detail;
}

TEST(Replay, DeceptiveCodeIsGtMismatch) {
  ScriptedSolver solver(refined().solution);
  solver.override_answer("confirmation_code", "GEG-2026-05842");
  EXPECT_EQ(replay(refined(), solver).failure_mode, FailureMode::GtMismatch);
}

TEST(Replay, RepeatedFailureAborts) {
  RepeatingSolver solver(BrowserAction::click(9999));
  const Verdict v = replay(refined(), solver);
  EXPECT_EQ(v.failure_mode, FailureMode::RepeatedActionFailure);
  EXPECT_EQ(v.steps_used, 3);
  for (const auto& s : v.trace) EXPECT_FALSE(s.outcome.ok);
}

TEST(Replay, ZeroBudget) {
  ScriptedSolver solver(refined().solution);
  ReplayOptions o;
  o.budget = 0;
  const Verdict v = replay(refined(), solver, o);
  EXPECT_EQ(v.failure_mode, FailureMode::StepBudgetExceeded);
  EXPECT_EQ(v.steps_used, 0);
  EXPECT_TRUE(v.trace.empty());
}

TEST(Replay, SmallBudgetRunsOut) {
  ScriptedSolver solver(refined().solution);
  ReplayOptions o;
  o.budget = 5;
  const Verdict v = replay(refined(), solver, o);
  EXPECT_EQ(v.failure_mode, FailureMode::StepBudgetExceeded);
  EXPECT_EQ(v.steps_used, 5);
}

TEST(Replay, PreRefinementBundleFails) {
  ScriptedSolver solver(wedding().solution);
  const Verdict v = replay(wedding(), solver);
  EXPECT_FALSE(v.solvable);
  EXPECT_EQ(v.failure_mode, FailureMode::GtMismatch);
  EXPECT_EQ(v.answer.at("confirmation_code"), "Processing");
}

TEST(Replay, DeterministicVerdict) {
  ScriptedSolver s1(refined().solution);
  ScriptedSolver s2(refined().solution);
  const Verdict a = replay(refined(), s1);
  const Verdict b = replay(refined(), s2);
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(Verdict::from_json(a.to_json()).digest(), a.digest());
}

TEST(Trace, JsonlRoundTrip) {
  ScriptedSolver solver(refined().solution);
  const Verdict v = replay(refined(), solver);
  const auto path = std::filesystem::temp_directory_path() / "forge_trace_test.jsonl";
  write_trace(path, v);
  const auto back = read_trace(path);
  EXPECT_EQ(back, v.trace);
  std::size_t lines = 0;
  for (char c : util::read_file(path)) lines += c == '\n';
  EXPECT_EQ(lines, v.trace.size());
  std::filesystem::remove(path);
}

// ---- benchmark filter -----------------------------------------------------------

namespace {

// Passes per domain at L1/L2/L3 out of 60 attempts each.
const int kPassCounts[7][3] = {{39, 41, 35}, {39, 48, 38}, {43, 42, 46}, {53, 58, 49},
                               {41, 50, 40}, {42, 51, 48}, {44, 50, 37}};

std::vector<TaskVerdict> pass_rate_fixture() {
  std::vector<TaskVerdict> out;
  for (Domain d : kAllDomains) {
    for (int level = 1; level <= 3; ++level) {
      const int passed = kPassCounts[domain_index(d)][level - 1];
      for (int i = 0; i < 60; ++i) {
        TaskVerdict t;
        t.task_id = domain_code(d) + "-L" + std::to_string(level) + "-" + std::to_string(1000 + i).substr(1);
        t.domain = d;
        t.level = level;
        t.difficulty = DifficultyVector::uniform(level);
        t.bundle_path = "tasks/" + t.task_id;
        Verdict v;
        v.solvable = i < passed;
        v.steps_used = 20;
        if (!v.solvable) v.failure_mode = FailureMode::GtMismatch;
        t.verdict = v;
        out.push_back(std::move(t));
      }
    }
  }
  return out;
}

} // namespace

TEST(FilterBenchmark, PassRateTable) {
  const auto m = filter_benchmark(pass_rate_fixture());
  EXPECT_EQ(m.tasks.size(), 934u);
  EXPECT_EQ(PassRateTable::render(m.pass_rates.overall()), "74.1");
  EXPECT_EQ(PassRateTable::render(m.pass_rates.domain_total(Domain::InfoRetrieval)), "88.9");
  for (Domain d : kAllDomains) {
    for (int level = 1; level <= 3; ++level) {
      const int passed = kPassCounts[domain_index(d)][level - 1];
      const CellCount c = m.pass_rates.cell(d, level);
      EXPECT_EQ(c.attempted, 60);
      EXPECT_EQ(c.passed, passed);
      // Independent rounding: tenths of a percent, half-up.
      const long long tenths = (passed * 1000 * 2 + 60) / 120;
      const std::string want = std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
      EXPECT_EQ(PassRateTable::render(c), want);
      EXPECT_EQ(m.counts().at({d, level}), passed);
    }
  }
  EXPECT_TRUE(std::is_sorted(m.tasks.begin(), m.tasks.end(),
                             [](const ManifestTask& a, const ManifestTask& b) { return a.task_id < b.task_id; }));
  for (const auto& t : m.tasks) EXPECT_EQ(t.verdict_digest.size(), 64u);
  EXPECT_TRUE(util::contains(m.pass_rates.to_markdown(), "| D4 | 53/60 (88.3%) | 58/60 (96.7%) | 49/60 (81.7%) | 160/180 (88.9%) |"));
}

TEST(FilterBenchmark, AllPassAndInfrastructureExclusion) {
  auto tasks = pass_rate_fixture();
  for (auto& t : tasks) {
    t.verdict->solvable = true;
    t.verdict->failure_mode.reset();
  }
  auto m = filter_benchmark(tasks);
  EXPECT_EQ(PassRateTable::render(m.pass_rates.overall()), "100.0");
  EXPECT_EQ(m.tasks.size(), 1260u);

  tasks[0].verdict.reset();
  tasks[0].infrastructure_error = "browser crashed";
  m = filter_benchmark(tasks);
  EXPECT_EQ(m.pass_rates.overall().attempted, 1259);
  EXPECT_EQ(m.tasks.size(), 1259u);

  tasks.push_back(tasks[1]);
  EXPECT_THROW(filter_benchmark(tasks), ConfigError);
  EXPECT_EQ(PassRateTable::render(CellCount{}), "-");
}

TEST(FilterBenchmark, ManifestJsonAndDigest) {
  auto m = filter_benchmark(pass_rate_fixture(), "published-counts");
  m.created_at = "2026-01-01T00:00:00Z";
  const auto back = BenchmarkManifest::from_json(m.to_json());
  EXPECT_EQ(back.digest(), m.digest());
  EXPECT_EQ(back.counts(), m.counts());
  auto later = m;
  later.created_at = "2027-01-01T00:00:00Z";
  EXPECT_EQ(later.digest(), m.digest());
  later.tasks.pop_back();
  EXPECT_NE(later.digest(), m.digest());
}

// ---- devtools driver ------------------------------------------------------------

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

// Speaks just enough of the protocol for the driver: canned snapshot, screenshot,
// a dialog opened by clicking index 3 and a method that never answers.
class FakeDevtools {
public:
  FakeDevtools() : acceptor_(ioc_, tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), 0)) {
    port_ = acceptor_.local_endpoint().port();
    thread_ = std::thread([this] { serve(); });
  }
  ~FakeDevtools() {
    thread_.join();
  }
  std::string url() const { return "ws://127.0.0.1:" + std::to_string(port_) + "/devtools/page/FAKE"; }
  std::vector<std::string> methods() {
    std::lock_guard<std::mutex> lock(mu_);
    return methods_;
  }

private:
  static std::string snapshot() {
    json dom = {{"tag", "body"},
                {"text", "Search Go"},
                {"children",
                 json::array({{{"tag", "input"}, {"attrs", {{"id", "q"}, {"value", ""}}}, {"index", 0}},
                              {{"tag", "button"}, {"attrs", {{"id", "go"}}}, {"text", "Go"}, {"index", 1}}})}};
    json els = json::array({{{"index", 0}, {"tag", "input"}, {"text", ""}, {"layer", "page"}, {"attrs", {{"id", "q"}}}},
                            {{"index", 1}, {"tag", "button"}, {"text", "Go"}, {"layer", "page"}, {"attrs", {{"id", "go"}}}}});
    return json{{"url", "http://127.0.0.1/index.html"}, {"title", "Home"}, {"dom", dom}, {"elements", els},
                {"storage", {{"forge_runtime_loads", "1"}}}}
        .dump();
  }

  void serve() {
    tcp::socket socket(ioc_);
    acceptor_.accept(socket);
    websocket::stream<tcp::socket> ws(std::move(socket));
    ws.accept();
    beast::error_code ec;
    while (true) {
      beast::flat_buffer buf;
      ws.read(buf, ec);
      if (ec) return;
      const json msg = json::parse(beast::buffers_to_string(buf.data()));
      const std::string method = msg.value("method", "");
      {
        std::lock_guard<std::mutex> lock(mu_);
        methods_.push_back(method);
      }
      json result = json::object();
      if (method == "Never.reply") continue;
      if (method == "Runtime.evaluate") {
        const std::string expr = msg.at("params").at("expression");
        std::string value;
        if (expr == "document.readyState") {
          value = "complete";
        } else if (util::contains(expr, "__forgeAct(\"click\", 3")) {
          send(ws, {{"method", "Page.javascriptDialogOpening"}, {"params", {{"message", "Please enter a contact name."}}}});
          beast::flat_buffer b2;
          ws.read(b2, ec);
          if (ec) return;
          const json handle = json::parse(beast::buffers_to_string(b2.data()));
          {
            std::lock_guard<std::mutex> lock(mu_);
            methods_.push_back(handle.value("method", ""));
          }
          send(ws, {{"id", handle.at("id")}, {"result", json::object()}});
          value = R"({"ok":true,"detail":"clicked <button>"})";
        } else if (util::contains(expr, "__forgeAct(")) {
          value = R"({"ok":true,"detail":"value set"})";
        } else {
          value = snapshot();
        }
        result = {{"result", {{"type", "string"}, {"value", value}}}};
      } else if (method == "Page.navigate") {
        result = {{"frameId", "F1"}};
      } else if (method == "Page.captureScreenshot") {
        result = {{"data", encode_secret("PNGDATA")}};
      }
      send(ws, {{"id", msg.at("id")}, {"result", result}});
    }
  }

  static void send(websocket::stream<tcp::socket>& ws, const json& j) {
    const std::string text = j.dump();
    ws.write(boost::asio::buffer(text));
  }

  boost::asio::io_context ioc_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<std::string> methods_;
};

} // namespace

TEST(CdpBrowser, DrivesAFakeDevtoolsEndpoint) {
  FakeDevtools server;
  {
    CdpOptions opts;
    opts.ws_url = server.url();
    opts.start_url = "http://127.0.0.1:1/index.html";
    opts.session.action_ms = 5;
    opts.session.timeout_ms = 5000;
    CdpBrowser b(opts);
    b.launch();
    Observation o = b.observe();
    EXPECT_EQ(o.title, "Home");
    ASSERT_EQ(o.elements.size(), 2u);
    EXPECT_EQ(snapshot_select(o.dom, "#go")->index, 1);
    EXPECT_EQ(o.screenshot, "PNGDATA");
    EXPECT_EQ(o.storage.at("forge_runtime_loads"), "1");
    EXPECT_TRUE(b.dispatch(BrowserAction::input(0, "Grand Estate Gardens")).ok);
    EXPECT_TRUE(b.dispatch(BrowserAction::click(3)).ok);
    o = b.observe();
    ASSERT_TRUE(o.dialog.has_value());
    EXPECT_EQ(*o.dialog, "Please enter a contact name.");
    const auto blocked = b.dispatch(BrowserAction::click(1));
    EXPECT_FALSE(blocked.ok);
    EXPECT_TRUE(util::starts_with(blocked.detail, "blocked by dialog"));
    EXPECT_FALSE(b.observe().dialog.has_value());
    b.close();
  }
  const auto m = server.methods();
  EXPECT_EQ(m.at(0), "Page.enable");
  EXPECT_EQ(m.at(1), "Runtime.enable");
  EXPECT_EQ(m.at(2), "Page.navigate");
  EXPECT_NE(std::find(m.begin(), m.end(), "Page.handleJavaScriptDialog"), m.end());
  EXPECT_NE(std::find(m.begin(), m.end(), "Page.captureScreenshot"), m.end());
}

TEST(CdpConnection, TimeoutsAndRefusedConnections) {
  {
    FakeDevtools server;
    CdpConnection conn(server.url(), 300);
    EXPECT_TRUE(conn.call("Page.enable").is_object());
    EXPECT_THROW(conn.call("Never.reply"), InfrastructureError);
    EXPECT_THROW(conn.call("Page.enable"), InfrastructureError);
    conn.close();
  }
  EXPECT_THROW(CdpConnection("ws://127.0.0.1:1/x", 500), InfrastructureError);
  EXPECT_THROW(CdpConnection("http://127.0.0.1/", 500), InfrastructureError);
  CdpOptions none;
  CdpBrowser b(none);
  EXPECT_THROW(b.launch(), InfrastructureError);
}

TEST(CdpBrowser, SnapshotScriptParses) {
  const std::string node = FORGE_NODE;
  if (node.empty()) GTEST_SKIP() << "node not available";
  const auto path = std::filesystem::temp_directory_path() / "forge_snapshot_check.js";
  util::write_file(path, "const f = () => " + CdpBrowser::snapshot_script() + ";\n");
  const int rc = std::system((node + " --check " + path.string()).c_str());
  EXPECT_EQ(rc, 0);
  std::filesystem::remove(path);
}
