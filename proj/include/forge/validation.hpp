#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/bundle.hpp"
#include "forge/manifest.hpp"

namespace forge {

// ---- observations ----------------------------------------------------------------

// Visible element tree. Text nodes are folded into `text`, which holds the
// element's rendered text content (bindings applied). `index` is the
// interactive index or -1; `layer` is "page", "popup" or "banner".
struct SnapshotNode {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::string text;
  int index = -1;
  std::string layer = "page";
  std::vector<SnapshotNode> children;
  bool operator==(const SnapshotNode&) const = default;
};

nlohmann::json to_json(const SnapshotNode& n);
SnapshotNode snapshot_from_json(const nlohmann::json& j);

// First node in document order matching a compound selector: tag, #id,
// .class, [attr], [attr=value] or [attr="value"], combined without spaces.
// Throws ParseError on unsupported syntax.
const SnapshotNode* snapshot_select(const SnapshotNode& root, const std::string& selector);

struct InteractiveElement {
  int index = 0;
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::string text;
  std::string value;
  std::vector<std::pair<std::string, std::string>> options;  // select: (value, label)
  std::string layer = "page";
  bool operator==(const InteractiveElement&) const = default;
};

struct Observation {
  std::string url;
  std::string title;
  SnapshotNode dom;
  std::vector<InteractiveElement> elements;  // dense, index == position
  std::optional<std::string> screenshot;     // image bytes
  std::map<std::string, std::string> storage;
  std::optional<std::string> dialog;         // open blocking dialog text
  long long clock_ms = 0;

  const InteractiveElement* element(int index) const;
  bool has_layer(const std::string& layer) const;
  nlohmann::json to_json(bool include_screenshot = false) const;
  static Observation from_json(const nlohmann::json& j);
  // sha256 over the canonical JSON; screenshots contribute their own hash.
  std::string digest() const;
};

// ---- actions ---------------------------------------------------------------------

enum class ActionKind { Navigate, Click, Input, Scroll, Back, Terminate };
std::string action_kind_name(ActionKind k);
std::optional<ActionKind> action_kind_from_name(const std::string& s);

struct BrowserAction {
  ActionKind kind = ActionKind::Scroll;
  std::string url;        // navigate
  int index = -1;         // click, input, scroll to element
  std::string text;       // input
  std::string direction;  // scroll: "up", "down" or empty when scrolling to `index`
  std::map<std::string, std::string> answer;  // terminate

  static BrowserAction navigate(std::string url);
  static BrowserAction click(int index);
  static BrowserAction input(int index, std::string text);
  static BrowserAction scroll(std::string direction);
  static BrowserAction back();
  static BrowserAction terminate(std::map<std::string, std::string> answer);

  // Kind plus parameters; equal keys mean "the same action" for the retry gate.
  std::string key() const;
  nlohmann::json to_json() const;
  static BrowserAction from_json(const nlohmann::json& j);
  bool operator==(const BrowserAction&) const = default;
};

struct ActionOutcome {
  bool ok = true;
  std::string detail;
  bool operator==(const ActionOutcome&) const = default;
};

// ---- sessions --------------------------------------------------------------------

struct SessionOptions {
  std::string base_url = "http://forge.local/";
  std::uint32_t seed = 0;       // drives latency draws; the page seed comes from the island
  bool headless = true;
  bool screenshots = true;
  int action_ms = 1500;         // virtual time spent per action
  int timeout_ms = 30000;       // real drivers: per-command timeout
};

// One browser, owned by one replay loop. Errors talking to the browser raise
// InfrastructureError.
class BrowserSession {
public:
  virtual ~BrowserSession() = default;
  virtual void launch() = 0;
  virtual Observation observe() = 0;
  virtual ActionOutcome dispatch(const BrowserAction& action) = 0;
  virtual void close() {}
  virtual std::string driver_name() const = 0;
};

// In-process driver: parses the bundle's pages and models links, forms, the
// state store, bindings, the cookie banner, the popup, inline errors and
// blocking dialogs on a virtual clock. Deterministic for a fixed seed.
class SimulatedBrowser : public BrowserSession {
public:
  SimulatedBrowser(const WebsiteBundle& bundle, SessionOptions options = {});
  ~SimulatedBrowser() override;

  void launch() override;
  Observation observe() override;
  ActionOutcome dispatch(const BrowserAction& action) override;
  std::string driver_name() const override { return "simulated"; }

  // Local storage as seen by the pages.
  const std::map<std::string, std::string>& storage() const;
  // Seed written into every page's runtime-config island, as the server does.
  void set_page_seed(std::uint32_t seed);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Minimal DevTools-protocol client over a WebSocket.
class CdpConnection {
public:
  // ws://host:port/path
  CdpConnection(const std::string& ws_url, int timeout_ms);
  ~CdpConnection();

  // Sends a command and waits for its response; events received meanwhile
  // are queued. Throws InfrastructureError on protocol errors or timeouts.
  nlohmann::json call(const std::string& method, const nlohmann::json& params = nlohmann::json::object());
  std::vector<nlohmann::json> drain_events();
  // Accepts JavaScript dialogs as soon as they open so a pending command can
  // complete; the opening events stay queued.
  void auto_accept_dialogs(bool on);
  void close();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CdpOptions {
  std::string chrome_path;   // launched with remote debugging when ws_url is empty
  std::string ws_url;        // page target to attach to
  std::string start_url;     // site root served by the workbench server
  SessionOptions session;
};

// Driver over a Chromium-family browser. Element indexing runs in the page
// with the same rules as the simulated driver.
class CdpBrowser : public BrowserSession {
public:
  explicit CdpBrowser(CdpOptions options);
  ~CdpBrowser() override;

  void launch() override;
  Observation observe() override;
  ActionOutcome dispatch(const BrowserAction& action) override;
  void close() override;
  std::string driver_name() const override { return "cdp"; }

  // The in-page script that indexes elements and returns the snapshot.
  static const std::string& snapshot_script();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---- solvers ---------------------------------------------------------------------

struct TraceStep {
  int step = 0;
  std::string url;
  std::string observation_digest;
  std::string reasoning;
  BrowserAction action;
  ActionOutcome outcome;

  nlohmann::json to_json() const;
  static TraceStep from_json(const nlohmann::json& j);
  bool operator==(const TraceStep&) const = default;
};

struct SolverTurn {
  std::string reasoning;
  BrowserAction action;
};

// Token and turn accounting reported by an agent gateway.
struct SolverUsage {
  int turns = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  bool step_logging = true;
};

// Observe -> (reasoning, action).
class Solver {
public:
  virtual ~Solver() = default;
  virtual std::string id() const = 0;
  virtual SolverTurn next(const Observation& observation, const std::vector<TraceStep>& history) = 0;
  // Defaults to one turn per action taken so far.
  virtual std::optional<SolverUsage> usage() const { return std::nullopt; }
};

// Follows a solution's concrete actions, clearing overlays first and
// collecting read steps into the answer it terminates with.
class ScriptedSolver : public Solver {
public:
  explicit ScriptedSolver(SolutionFile solution, std::string start_url = "index.html");
  std::string id() const override { return "scripted"; }
  SolverTurn next(const Observation& observation, const std::vector<TraceStep>& history) override;

  // Fields replaced in the terminate answer, e.g. a total that omits the fee.
  void override_answer(const std::string& field, const std::string& value);

private:
  SolutionFile solution_;
  std::string start_url_;
  std::size_t cursor_ = 0;
  std::optional<std::size_t> pending_;  // step whose action was last issued
  bool started_ = false;
  std::map<std::string, std::string> answer_;
  std::map<std::string, std::string> overrides_;
};

// Repeats one action forever.
class RepeatingSolver : public Solver {
public:
  explicit RepeatingSolver(BrowserAction action) : action_(std::move(action)) {}
  std::string id() const override { return "repeating"; }
  SolverTurn next(const Observation&, const std::vector<TraceStep>&) override {
    return {"trying again", action_};
  }

private:
  BrowserAction action_;
};

// ---- verdicts --------------------------------------------------------------------

enum class FailureMode { GtMismatch, LogicFlaw, RepeatedActionFailure, StepBudgetExceeded };
std::string failure_mode_name(FailureMode m);
std::optional<FailureMode> failure_mode_from_name(const std::string& s);

struct Verdict {
  bool solvable = false;
  int steps_used = 0;
  std::optional<FailureMode> failure_mode;
  std::string detail;
  std::map<std::string, std::string> answer;
  std::vector<TraceStep> trace;

  nlohmann::json to_json() const;
  static Verdict from_json(const nlohmann::json& j);
  std::string digest() const;
};

enum class RetryDecision { Continue, AbortRepeatedFailure };

struct AttemptRecord {
  std::string action_key;
  bool ok = true;
};

// Abort iff the last `limit` attempts are failures of the same action.
RetryDecision retry_gate(const std::vector<AttemptRecord>& history, int limit = 3);

struct LogicCheck {
  bool ok = true;
  std::string detail;
  std::map<std::string, std::string> derived;  // answer field -> value from the witness
};

// Runs the solution's answer map over its witness state and compares the
// result with the expected final state. "@code" fields require the witness to
// match the correct outcome.
LogicCheck check_solution_logic(const SolutionFile& solution);

struct ReplayOptions {
  int budget = kMaxSolutionSteps;
  int retry_limit = 3;
  bool check_logic = true;
};

// Observe-reason-act until terminate, budget exhaustion or retry exhaustion.
// The terminate answer is compared field by field with the expected final state.
Verdict replay_solution(const WebsiteBundle& bundle, BrowserSession& session, Solver& solver,
                        const ReplayOptions& options = {});

// JSONL, one step per line.
void write_trace(const std::filesystem::path& path, const Verdict& verdict);
std::vector<TraceStep> read_trace(const std::filesystem::path& path);

struct TaskVerdict {
  std::string task_id;
  Domain domain = Domain::ConsumerTransaction;
  int level = 1;
  DifficultyVector difficulty;
  std::string bundle_path;
  std::optional<Verdict> verdict;  // absent after an infrastructure error
  std::string infrastructure_error;
};

// Solvable tasks enter the manifest; infrastructure failures are left out of
// the attempt counts.
BenchmarkManifest filter_benchmark(const std::vector<TaskVerdict>& tasks, const std::string& benchmark_id = "forge");

} // namespace forge
