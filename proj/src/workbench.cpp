#include "forge/workbench.hpp"

#include "forge/assets.hpp"
#include "forge/errors.hpp"
#include "forge/util.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace forge {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- configuration ---------------------------------------------------------------

bool overrides_satisfiable(const std::map<Dimension, int>& overrides, int level) {
  std::array<int, kDimensionCount> levels{};
  for (int code = 0; code < 2187; ++code) {
    int rest = code;
    bool fits = true;
    for (std::size_t i = 0; i < kDimensionCount; ++i) {
      levels[i] = rest % 3 + 1;
      rest /= 3;
      auto it = overrides.find(kAllDimensions[i]);
      if (it != overrides.end() && it->second != levels[i]) fits = false;
    }
    if (fits && check_composition(OverallLevel(level), DifficultyVector(levels))) return true;
  }
  return false;
}

std::uint32_t task_seed(std::uint64_t run_seed, const std::string& task_id) {
  const std::uint64_t h = util::fnv1a64(std::to_string(run_seed) + "/" + task_id);
  return static_cast<std::uint32_t>(h ^ (h >> 32));
}

std::string make_task_id(Domain domain, int level, int index) {
  std::ostringstream out;
  out << domain_code(domain) << "-L" << level << "-" << std::setw(3) << std::setfill('0') << index;
  return out.str();
}

namespace {

std::string overrides_text(const std::map<Dimension, int>& overrides) {
  std::string out;
  for (const auto& [d, l] : overrides) {
    if (!out.empty()) out += ", ";
    out += std::string(dimension_key(d)) + "=" + std::to_string(l);
  }
  return "{" + out + "}";
}

bool valid_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

} // namespace

void RunConfig::validate() const {
  if (!valid_id(benchmark_id)) throw ConfigError("benchmark_id '" + benchmark_id + "' is not a plain name");
  if (domains.empty()) throw ConfigError("no domains selected");
  if (std::set<Domain>(domains.begin(), domains.end()).size() != domains.size()) {
    throw ConfigError("domains listed twice");
  }
  if (levels.empty()) throw ConfigError("no levels selected");
  for (int l : levels) {
    if (l < 1 || l > 3) throw ConfigError("level " + std::to_string(l) + " is outside 1..3");
  }
  if (std::set<int>(levels.begin(), levels.end()).size() != levels.size()) throw ConfigError("levels listed twice");
  if (tasks_per_cell < 1 || tasks_per_cell > 999) throw ConfigError("tasks_per_cell must be in 1..999");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (budget < 0) throw ConfigError("budget must not be negative");
  for (const auto& [d, l] : dimension_overrides) {
    if (l < 1 || l > 3) throw ConfigError("override " + std::string(dimension_key(d)) + " must be in 1..3");
  }
  for (int l : levels) {
    if (!overrides_satisfiable(dimension_overrides, l)) {
      throw ConfigError("dimension overrides " + overrides_text(dimension_overrides) + " cannot be satisfied at L" +
                        std::to_string(l));
    }
  }
  noise.validate();
}

json RunConfig::to_json() const {
  json doms = json::array();
  for (Domain d : domains) doms.push_back(domain_code(d));
  json overrides = json::object();
  for (const auto& [d, l] : dimension_overrides) overrides[std::string(dimension_key(d))] = l;
  json j = {{"benchmark_id", benchmark_id},
            {"domains", doms},
            {"levels", levels},
            {"tasks_per_cell", tasks_per_cell},
            {"seed", seed},
            {"workers", workers},
            {"providers", providers_file.generic_string()},
            {"bindings",
             {{"planner", bindings.planner},
              {"refiner", bindings.refiner},
              {"generator", bindings.generator},
              {"reviewer", bindings.reviewer}}},
            {"dimension_overrides", overrides},
            {"noise", noise.to_json()},
            {"budget", budget}};
  return j;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  static const std::set<std::string> known = {"benchmark_id", "domains",   "levels",   "tasks_per_cell",
                                              "seed",         "workers",   "providers", "bindings",
                                              "dimension_overrides", "noise", "budget"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown run config key '" + k + "'");
  }
  RunConfig c;
  try {
    c.benchmark_id = j.value("benchmark_id", c.benchmark_id);
    for (const auto& d : j.value("domains", json::array())) {
      const auto dom = domain_from_string(d.get<std::string>());
      if (!dom) throw ConfigError("unknown domain '" + d.get<std::string>() + "'");
      c.domains.push_back(*dom);
    }
    c.levels = j.value("levels", std::vector<int>{});
    c.tasks_per_cell = j.value("tasks_per_cell", c.tasks_per_cell);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.budget = j.value("budget", c.budget);
    if (j.contains("providers")) {
      fs::path p = j.at("providers").get<std::string>();
      if (!p.empty() && p.is_relative() && !base.empty()) p = base / p;
      c.providers_file = p;
    }
    if (j.contains("bindings")) {
      const json& b = j.at("bindings");
      c.bindings.planner = b.value("planner", c.bindings.planner);
      c.bindings.refiner = b.value("refiner", c.bindings.refiner);
      c.bindings.generator = b.value("generator", c.bindings.generator);
      c.bindings.reviewer = b.value("reviewer", c.bindings.reviewer);
    }
    const json overrides = j.value("dimension_overrides", json::object());
    for (const auto& [k, v] : overrides.items()) {
      const auto d = dimension_from_key(k);
      if (!d) throw ConfigError("unknown dimension '" + k + "' in overrides");
      c.dimension_overrides[*d] = v.get<int>();
    }
    if (j.contains("noise")) c.noise = NoiseConfig::from_json(j.at("noise"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

// ---- storage ---------------------------------------------------------------------

BenchmarkStore::BenchmarkStore(fs::path root, std::string benchmark_id)
    : root_(std::move(root)), id_(std::move(benchmark_id)) {}

fs::path BenchmarkStore::dir() const { return root_ / id_; }
fs::path BenchmarkStore::task_dir(const std::string& task_id) const { return dir() / "tasks" / task_id; }
fs::path BenchmarkStore::site_dir(const std::string& task_id) const { return task_dir(task_id) / "site"; }
fs::path BenchmarkStore::manifest_path() const { return dir() / "manifest.json"; }
fs::path BenchmarkStore::results_path() const { return dir() / "results.jsonl"; }
std::string BenchmarkStore::site_relpath(const std::string& task_id) const { return "tasks/" + task_id + "/site"; }

namespace {

json read_json(const fs::path& path) {
  try {
    return json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void require(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw PipelineError(what + " missing: " + path.string());
}

} // namespace

void BenchmarkStore::save_plan(const std::string& task_id, const TaskBlueprint& draft, const TaskBlueprint& plan) const {
  util::write_file(task_dir(task_id) / "draft.json", forge::to_json(draft).dump(2));
  util::write_file(task_dir(task_id) / "plan.json", forge::to_json(plan).dump(2));
}

TaskBlueprint BenchmarkStore::load_plan(const std::string& task_id) const {
  const fs::path p = task_dir(task_id) / "plan.json";
  require(p, "plan");
  return blueprint_from_json(read_json(p));
}

void BenchmarkStore::save_generated(const std::string& task_id, const WebsiteBundle& bundle) const {
  const fs::path d = task_dir(task_id) / "generated";
  fs::remove_all(d);
  bundle.save(d);
}

WebsiteBundle BenchmarkStore::load_generated(const std::string& task_id) const {
  const fs::path d = task_dir(task_id) / "generated";
  require(d, "generated bundle");
  return WebsiteBundle::load(d);
}

void BenchmarkStore::save_site(const std::string& task_id, const WebsiteBundle& bundle,
                               const RefinementReport& report) const {
  const fs::path d = site_dir(task_id);
  fs::remove_all(d);
  bundle.save(d);
  util::write_file(task_dir(task_id) / "refinement.json", report.to_json().dump(2));
}

WebsiteBundle BenchmarkStore::load_site(const std::string& task_id) const {
  require(site_dir(task_id), "refined site");
  return WebsiteBundle::load(site_dir(task_id));
}

void BenchmarkStore::save_verdict(const std::string& task_id, const Verdict& verdict) const {
  util::write_file(task_dir(task_id) / "verdict.json", verdict.to_json().dump(2));
  write_trace(task_dir(task_id) / "trace.jsonl", verdict);
}

std::optional<Verdict> BenchmarkStore::load_verdict(const std::string& task_id) const {
  const fs::path p = task_dir(task_id) / "verdict.json";
  if (!fs::exists(p)) return std::nullopt;
  return Verdict::from_json(read_json(p));
}

json BenchmarkStore::load_status(const std::string& task_id) const {
  const fs::path p = task_dir(task_id) / "status.json";
  return fs::exists(p) ? read_json(p) : json::object();
}

void BenchmarkStore::save_status(const std::string& task_id, const json& status) const {
  util::write_file(task_dir(task_id) / "status.json", status.dump(2));
}

std::vector<std::string> BenchmarkStore::task_ids() const {
  std::vector<std::string> out;
  const fs::path d = dir() / "tasks";
  if (!fs::is_directory(d)) return out;
  for (const auto& e : fs::directory_iterator(d)) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void BenchmarkStore::write_manifest(const BenchmarkManifest& manifest) const {
  util::write_file(manifest_path(), manifest.to_json().dump(2));
  util::write_file(dir() / "pass_rates.md", manifest.pass_rates.to_markdown());
}

BenchmarkManifest BenchmarkStore::read_manifest() const {
  if (!fs::exists(manifest_path())) throw ConfigError("no manifest at " + manifest_path().string());
  return BenchmarkManifest::from_json(read_json(manifest_path()));
}

// ---- pipeline --------------------------------------------------------------------

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::Plan: return "plan";
    case Stage::Generate: return "generate";
    case Stage::Refine: return "refine";
    case Stage::Validate: return "validate";
  }
  return "plan";
}

std::optional<Stage> stage_from_name(const std::string& s) {
  for (Stage st : {Stage::Plan, Stage::Generate, Stage::Refine, Stage::Validate}) {
    if (stage_name(st) == s) return st;
  }
  return std::nullopt;
}

bool PipelineRun::all_ok() const {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const StageOutcome& o) { return o.ok; });
}

bool PipelineRun::any_infrastructure_error() const {
  return std::any_of(outcomes.begin(), outcomes.end(), [](const StageOutcome& o) { return o.infrastructure; });
}

Workbench::Workbench(RunConfig config, std::map<std::string, ProviderProfile> providers, fs::path root)
    : config_(std::move(config)), providers_(std::move(providers)), store_(std::move(root), config_.benchmark_id) {
  config_.validate();
}

std::vector<TaskSlot> Workbench::slots() const {
  std::vector<TaskSlot> out;
  for (Domain d : config_.domains) {
    for (int l : config_.levels) {
      for (int i = 0; i < config_.tasks_per_cell; ++i) {
        TaskSlot s{make_task_id(d, l, i), d, l, 0};
        s.seed = task_seed(config_.seed, s.task_id);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::optional<TaskSlot> Workbench::slot(const std::string& task_id) const {
  for (auto& s : slots()) {
    if (s.task_id == task_id) return s;
  }
  return std::nullopt;
}

const ProviderProfile& Workbench::provider(const std::string& id) const {
  auto it = providers_.find(id);
  if (it == providers_.end()) throw ConfigError("no provider configured with id '" + id + "'");
  return it->second;
}

namespace {

const std::vector<Stage> kStages = {Stage::Plan, Stage::Generate, Stage::Refine, Stage::Validate};

template <typename Fn>
StageOutcome run_stage(const BenchmarkStore& store, const TaskSlot& slot, Stage stage, Fn&& fn) {
  StageOutcome out{slot.task_id, stage, true, false, ""};
  try {
    fn(out);
  } catch (const InfrastructureError& e) {
    out = {slot.task_id, stage, false, true, e.what()};
  } catch (const TransportError& e) {
    out = {slot.task_id, stage, false, true, e.what()};
  } catch (const fs::filesystem_error& e) {
    out = {slot.task_id, stage, false, true, e.what()};
  } catch (const std::exception& e) {
    out = {slot.task_id, stage, false, false, e.what()};
  }
  json status = store.load_status(slot.task_id);
  status["task_id"] = slot.task_id;
  status["domain"] = domain_code(slot.domain);
  status["level"] = slot.level;
  status["seed"] = slot.seed;
  json stages = status.value("stages", json::object());
  for (auto it = std::find(kStages.begin(), kStages.end(), stage) + 1; it != kStages.end(); ++it) {
    stages.erase(stage_name(*it));
  }
  stages[stage_name(stage)] = {{"ok", out.ok}, {"infrastructure", out.infrastructure}, {"error", out.error}};
  status["stages"] = stages;
  store.save_status(slot.task_id, status);
  if (stage != Stage::Validate) {
    fs::remove(store.task_dir(slot.task_id) / "verdict.json");
    fs::remove(store.task_dir(slot.task_id) / "trace.jsonl");
  }
  return out;
}

template <typename Fn>
void for_each_parallel(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
}

} // namespace

StageOutcome Workbench::plan(const TaskSlot& slot) const {
  return run_stage(store_, slot, Stage::Plan, [&](StageOutcome&) {
    const DraftResult draft = draft_plan(slot.domain, slot.level, provider(config_.bindings.planner));
    const RefineResult refined = refine_plan(draft.blueprint, provider(config_.bindings.refiner));
    for (const auto& [d, l] : config_.dimension_overrides) {
      const int got = refined.blueprint.difficulty.level(d).value();
      if (got != l) {
        throw PipelineError("plan sets " + std::string(dimension_key(d)) + " to L" + std::to_string(got) +
                            " but the run forces L" + std::to_string(l));
      }
    }
    store_.save_plan(slot.task_id, draft.blueprint, refined.blueprint);
  });
}

StageOutcome Workbench::generate(const TaskSlot& slot) const {
  return run_stage(store_, slot, Stage::Generate, [&](StageOutcome&) {
    const TaskBlueprint plan = store_.load_plan(slot.task_id);
    StubAssetProvider assets;
    store_.save_generated(slot.task_id,
                          assemble_bundle(plan, provider(config_.bindings.generator), assets, slot.task_id));
  });
}

StageOutcome Workbench::refine(const TaskSlot& slot) const {
  return run_stage(store_, slot, Stage::Refine, [&](StageOutcome&) {
    NoiseConfig noise = config_.noise;
    noise.seed = slot.seed;
    const ProviderProfile* reviewer = config_.bindings.reviewer.empty() ? nullptr : &provider(config_.bindings.reviewer);
    auto [bundle, report] = refine_bundle(store_.load_generated(slot.task_id), noise, RuleSet::defaults(), reviewer);
    if (!report.clean()) {
      std::string names;
      for (const auto& f : report.residual) names += (names.empty() ? "" : ", ") + f.rule_id;
      throw RepairError("blockers remain after refinement: " + names);
    }
    store_.save_site(slot.task_id, bundle, report);
  });
}

StageOutcome Workbench::validate(const TaskSlot& slot, BrowserSession* session) const {
  return run_stage(store_, slot, Stage::Validate, [&](StageOutcome& out) {
    const WebsiteBundle bundle = store_.load_site(slot.task_id);
    ScriptedSolver solver(bundle.solution);
    ReplayOptions options;
    options.budget = config_.budget;
    Verdict verdict;
    if (session) {
      verdict = replay_solution(bundle, *session, solver, options);
    } else {
      SessionOptions so;
      so.seed = slot.seed;
      SimulatedBrowser browser(bundle, so);
      browser.set_page_seed(slot.seed);
      verdict = replay_solution(bundle, browser, solver, options);
    }
    store_.save_verdict(slot.task_id, verdict);
    if (!verdict.solvable) {
      out.ok = false;
      out.error = (verdict.failure_mode ? failure_mode_name(*verdict.failure_mode) + ": " : "") + verdict.detail;
    }
  });
}

std::vector<StageOutcome> Workbench::run_stages(const std::vector<Stage>& stages) const {
  const std::vector<TaskSlot> all = slots();
  std::vector<StageOutcome> out(all.size());
  for_each_parallel(all.size(), config_.workers, [&](std::size_t i) {
    for (Stage s : stages) {
      switch (s) {
        case Stage::Plan: out[i] = plan(all[i]); break;
        case Stage::Generate: out[i] = generate(all[i]); break;
        case Stage::Refine: out[i] = refine(all[i]); break;
        case Stage::Validate: out[i] = validate(all[i]); break;
      }
      if (!out[i].ok) break;
    }
  });
  std::sort(out.begin(), out.end(), [](const StageOutcome& a, const StageOutcome& b) { return a.task_id < b.task_id; });
  return out;
}

std::vector<TaskVerdict> Workbench::collect_verdicts() const {
  std::vector<TaskVerdict> out;
  for (const TaskSlot& s : slots()) {
    const json status = store_.load_status(s.task_id);
    if (!status.contains("stages")) continue;
    TaskVerdict tv;
    tv.task_id = s.task_id;
    tv.domain = s.domain;
    tv.level = s.level;
    tv.bundle_path = store_.site_relpath(s.task_id);
    if (fs::exists(store_.task_dir(s.task_id) / "plan.json")) tv.difficulty = store_.load_plan(s.task_id).difficulty;
    std::string failure;
    for (Stage st : kStages) {
      const json stage = status.at("stages").value(stage_name(st), json());
      if (stage.is_null() || stage.at("ok").get<bool>()) continue;
      if (stage.at("infrastructure").get<bool>()) tv.infrastructure_error = stage.at("error").get<std::string>();
      failure = stage_name(st) + ": " + stage.at("error").get<std::string>();
      break;
    }
    if (tv.infrastructure_error.empty()) {
      if (auto v = store_.load_verdict(s.task_id)) {
        tv.verdict = std::move(*v);
      } else if (!failure.empty()) {
        Verdict v2;
        v2.detail = failure;
        tv.verdict = v2;
      } else {
        continue;  // pipeline not finished for this task
      }
    }
    out.push_back(std::move(tv));
  }
  return out;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace

BenchmarkManifest Workbench::build_manifest() const {
  BenchmarkManifest m = filter_benchmark(collect_verdicts(), config_.benchmark_id);
  m.created_at = utc_now();
  store_.write_manifest(m);
  return m;
}

PipelineRun Workbench::run() const {
  util::write_file(store_.dir() / "config.json", config_.to_json().dump(2));
  PipelineRun r;
  r.outcomes = run_stages(kStages);
  r.manifest = build_manifest();
  return r;
}

PipelineRun run_pipeline(const RunConfig& config, const std::map<std::string, ProviderProfile>& providers,
                         const fs::path& root) {
  return Workbench(config, providers, root).run();
}

// ---- server ----------------------------------------------------------------------

namespace {

std::string content_type(const std::string& file) {
  static const std::map<std::string, std::string> types = {
      {".html", "text/html; charset=utf-8"}, {".css", "text/css"},     {".js", "application/javascript"},
      {".json", "application/json"},         {".png", "image/png"},    {".svg", "image/svg+xml"},
      {".jpg", "image/jpeg"},                {".jpeg", "image/jpeg"},  {".txt", "text/plain; charset=utf-8"}};
  auto it = types.find(fs::path(file).extension().string());
  return it == types.end() ? "application/octet-stream" : it->second;
}

std::optional<std::string> resolve_file(const WebsiteBundle& bundle, std::string path) {
  if (const auto q = path.find_first_of("?#"); q != std::string::npos) path.resize(q);
  for (const auto& p : bundle.pages) {
    if (p.route == path && p.route != "/") return p.file;
  }
  while (!path.empty() && path.front() == '/') path.erase(0, 1);
  if (path.empty() || path.back() == '/') path += "index.html";
  if (is_control_file(path) || !bundle.files.count(path)) return std::nullopt;
  return path;
}

} // namespace

std::optional<std::pair<std::string, std::string>> serve_lookup(const WebsiteBundle& bundle, const std::string& path,
                                                                std::uint32_t seed) {
  const auto file = resolve_file(bundle, path);
  if (!file) return std::nullopt;
  std::string body = bundle.files.at(*file);
  if (util::ends_with(*file, ".html") && read_runtime_config(body)) body = rewrite_runtime_seed(body, seed);
  return std::make_pair(content_type(*file), std::move(body));
}

struct BundleServer::Impl {
  WebsiteBundle bundle;
  ServeOptions options;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<long long> requests{0};
  std::mutex rng_mu;
  Mulberry32 rng;

  Impl(const WebsiteBundle& b, ServeOptions o) : bundle(b), options(std::move(o)), rng(options.seed ^ 0x5eedu) {
    for (auto& [file, content] : bundle.files) {
      if (util::ends_with(file, ".html") && read_runtime_config(content)) {
        content = rewrite_runtime_seed(content, options.seed);
      }
    }
  }

  long long delay_for(const std::string& file) {
    if (!options.latency) return 0;
    const auto range = latency_range(bundle, file);
    if (!range) return 0;
    std::lock_guard<std::mutex> lock(rng_mu);
    return static_cast<long long>(range->first + std::floor(rng.next() * (range->second - range->first)));
  }
};

BundleServer::BundleServer(const WebsiteBundle& bundle, ServeOptions options)
    : impl_(std::make_unique<Impl>(bundle, std::move(options))) {
  Impl* impl = impl_.get();
  // No SO_REUSEPORT: a second server on a taken port must fail to bind.
  impl->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  impl->server.Get(".*", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->requests++;
    const auto file = resolve_file(impl->bundle, req.path);
    if (!file) {
      res.status = 404;
      res.set_content("404 Not Found", "text/plain");
      return;
    }
    if (const long long ms = impl->delay_for(*file); ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
    res.set_header("Cache-Control", "no-store");
    res.set_content(impl->bundle.files.at(*file), content_type(*file));
  });
  if (impl->options.port == 0) {
    impl->port = impl->server.bind_to_any_port(impl->options.host);
    if (impl->port <= 0) throw InfrastructureError("cannot bind an ephemeral port on " + impl->options.host);
  } else {
    if (!impl->server.bind_to_port(impl->options.host, impl->options.port)) {
      throw InfrastructureError("cannot bind " + impl->options.host + ":" + std::to_string(impl->options.port) +
                                " (port in use?)");
    }
    impl->port = impl->options.port;
  }
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

BundleServer::~BundleServer() { stop(); }

int BundleServer::port() const { return impl_->port; }

std::string BundleServer::base_url() const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->port) + "/";
}

long long BundleServer::requests() const { return impl_->requests.load(); }

void BundleServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void BundleServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

// ---- evaluation and reporting ----------------------------------------------------

std::unique_ptr<Solver> make_agent(const std::string& model, const WebsiteBundle& bundle,
                                   const std::map<std::string, ProviderProfile>& providers) {
  if (model == "reference") return std::make_unique<ScriptedSolver>(bundle.solution);
  auto it = providers.find(model);
  if (it == providers.end()) throw ConfigError("unknown model '" + model + "': not a configured provider");
  auto task = bundle.files.find(kTaskFile);
  const std::string instruction = task == bundle.files.end() ? bundle.task.user_query : task->second;
  return std::make_unique<ProviderAgent>(it->second, instruction, model);
}

std::vector<EvaluationRecord> evaluate_benchmark(const BenchmarkStore& store, const BenchmarkManifest& manifest,
                                                 const EvaluateConfig& config,
                                                 const std::map<std::string, ProviderProfile>& providers) {
  if (config.models.empty()) throw ConfigError("no models to evaluate");
  if (config.budget < 0) throw ConfigError("budget must not be negative");
  for (const auto& m : config.models) {
    if (m != "reference" && !providers.count(m)) throw ConfigError("unknown model '" + m + "'");
  }
  std::vector<std::pair<std::string, const ManifestTask*>> jobs;
  for (const auto& m : config.models) {
    for (const auto& t : manifest.tasks) jobs.emplace_back(m, &t);
  }
  std::vector<EvaluationRecord> out(jobs.size());
  std::mutex error_mu;
  std::optional<std::string> config_error;
  for_each_parallel(jobs.size(), config.workers, [&](std::size_t i) {
    const auto& [model, task] = jobs[i];
    EvaluateOptions options;
    options.modality = config.modality;
    options.budget = config.budget;
    options.model_id = model;
    try {
      const WebsiteBundle bundle = WebsiteBundle::load(store.dir() / task->bundle_path);
      auto agent = make_agent(model, bundle, providers);
      SessionOptions so;
      so.seed = task_seed(config.seed, task->task_id);
      so.screenshots = config.modality == Modality::ScreenshotDom;
      so.headless = config.headless;
      if (config.chrome_path.empty()) {
        SimulatedBrowser browser(bundle, so);
        browser.set_page_seed(so.seed);
        out[i] = evaluate_task(bundle, browser, *agent, options);
      } else {
        ServeOptions serve;
        serve.seed = so.seed;
        BundleServer server(bundle, serve);
        CdpOptions cdp;
        cdp.chrome_path = config.chrome_path;
        cdp.start_url = server.base_url();
        cdp.session = so;
        cdp.session.base_url = server.base_url();
        CdpBrowser browser(cdp);
        out[i] = evaluate_task(bundle, browser, *agent, options);
      }
    } catch (const InfrastructureError& e) {
      out[i].model_id = model;
      out[i].task_id = task->task_id;
      out[i].modality = config.modality;
      out[i].infrastructure_error = e.what();
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!config_error) config_error = task->task_id + ": " + e.what();
    }
  });
  if (config_error) throw PipelineError("evaluation failed: " + *config_error);
  return out;
}

std::vector<fs::path> write_report(const BenchmarkManifest& manifest, const std::vector<EvaluationRecord>& results,
                                   const fs::path& out_dir) {
  if (results.empty()) throw ConfigError("no evaluation results to report");
  ResultSet rs;
  rs.records = results;
  rs.index = ResultSet::index_from(manifest);
  rs.validate();
  const ReportTables tables = aggregate(rs);
  const DimensionTable dims = per_dimension_table(rs);
  const RuntimeReport runtime = runtime_report(rs);
  const SolvabilityReport solved = solvability(rs);
  const std::vector<std::pair<std::string, std::string>> files = {
      {"accuracy.md", tables.to_markdown()}, {"accuracy.csv", tables.to_csv()},
      {"dimensions.md", dims.to_markdown()}, {"dimensions.csv", dims.to_csv()},
      {"runtime.md", runtime.to_markdown()}, {"runtime.csv", runtime.to_csv()},
      {"solvability.md", solved.to_markdown()}};
  std::vector<fs::path> out;
  for (const auto& [name, content] : files) {
    util::write_file(out_dir / name, content);
    out.push_back(out_dir / name);
  }
  return out;
}

std::string stats_markdown(const BenchmarkManifest& manifest) {
  std::ostringstream out;
  out << "# " << manifest.benchmark_id << "\n\n";
  out << "Tasks: " << manifest.tasks.size() << "\n\n";
  out << "## Tasks per domain and level\n\n| Domain | L1 | L2 | L3 | Total |\n| --- | ---: | ---: | ---: | ---: |\n";
  const auto counts = manifest.counts();
  std::map<int, long long> level_totals;
  for (Domain d : kAllDomains) {
    long long total = 0;
    std::string row = "| " + domain_code(d) + " |";
    for (int l = 1; l <= 3; ++l) {
      auto it = counts.find({d, l});
      const long long n = it == counts.end() ? 0 : it->second;
      total += n;
      level_totals[l] += n;
      row += " " + std::to_string(n) + " |";
    }
    if (total > 0) out << row << " " << total << " |\n";
  }
  out << "| Total | " << level_totals[1] << " | " << level_totals[2] << " | " << level_totals[3] << " | "
      << manifest.tasks.size() << " |\n";
  if (!manifest.tasks.empty()) {
    std::vector<DifficultyVector> vectors;
    for (const auto& t : manifest.tasks) vectors.push_back(t.difficulty);
    const DistributionTable table = dimension_distribution(vectors);
    out << "\n## Dimension levels\n\n| Dimension | L1 | L2 | L3 |\n| --- | ---: | ---: | ---: |\n";
    for (Dimension d : kAllDimensions) {
      out << "| " << dimension_label(d) << " |";
      for (int l = 1; l <= 3; ++l) {
        const DistributionCell& c = table.at(d, l);
        out << " " << c.count << " (" << c.percent << "%) |";
      }
      out << "\n";
    }
  }
  if (manifest.pass_rates.overall().attempted > 0) {
    out << "\n## Pass rates\n\n" << manifest.pass_rates.to_markdown();
  }
  return out.str();
}

} // namespace forge
