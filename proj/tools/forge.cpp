#include <CLI11.hpp>

#include "forge/errors.hpp"
#include "forge/util.hpp"
#include "forge/workbench.hpp"

#include <csignal>
#include <iostream>
#include <thread>

using namespace forge;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kTaskFailures = 1, kConfigError = 2, kInfrastructureError = 3 };

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string providers;
  bool headless = true;
  std::string root = "benchmarks";
  std::string benchmark;
};

RunConfig load_config(const Globals& g) {
  RunConfig c;
  if (!g.config.empty()) {
    c = RunConfig::load(g.config);
  } else if (g.benchmark.empty()) {
    throw ConfigError("--config is required");
  }
  if (!g.benchmark.empty()) c.benchmark_id = g.benchmark;
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  if (!g.providers.empty()) c.providers_file = g.providers;
  return c;
}

std::map<std::string, ProviderProfile> load_provider_map(const RunConfig& c) {
  if (c.providers_file.empty()) throw ConfigError("no providers file: set \"providers\" in the config or pass --providers");
  if (!fs::exists(c.providers_file)) throw ConfigError("providers file not found: " + c.providers_file.string());
  return load_providers(c.providers_file);
}

BenchmarkStore store_for(const Globals& g) {
  if (!g.benchmark.empty()) return BenchmarkStore(g.root, g.benchmark);
  return BenchmarkStore(g.root, load_config(g).benchmark_id);
}

int outcome_exit(const std::vector<StageOutcome>& outcomes) {
  int code = kOk;
  for (const auto& o : outcomes) {
    std::cout << o.task_id << "\t" << stage_name(o.stage) << "\t" << (o.ok ? "ok" : "FAILED");
    if (!o.error.empty()) std::cout << "\t" << o.error;
    std::cout << "\n";
    if (o.infrastructure) code = kInfrastructureError;
    else if (!o.ok && code == kOk) code = kTaskFailures;
  }
  return code;
}

std::vector<TaskSlot> selected_slots(const Workbench& wb, const std::vector<std::string>& tasks) {
  if (tasks.empty()) return wb.slots();
  std::vector<TaskSlot> out;
  for (const auto& id : tasks) {
    auto s = wb.slot(id);
    if (!s) throw ConfigError("task " + id + " is not part of this run configuration");
    out.push_back(*s);
  }
  return out;
}

int run_stage_verb(const Globals& g, Stage stage, const std::vector<std::string>& tasks, const std::string& browser) {
  const RunConfig config = load_config(g);
  config.validate();
  Workbench wb(config, load_provider_map(config), g.root);
  std::vector<StageOutcome> outcomes;
  for (const TaskSlot& slot : selected_slots(wb, tasks)) {
    switch (stage) {
      case Stage::Plan: outcomes.push_back(wb.plan(slot)); break;
      case Stage::Generate: outcomes.push_back(wb.generate(slot)); break;
      case Stage::Refine: outcomes.push_back(wb.refine(slot)); break;
      case Stage::Validate:
        if (browser.empty()) {
          outcomes.push_back(wb.validate(slot));
        } else {
          ServeOptions so;
          so.seed = slot.seed;
          BundleServer server(wb.store().load_site(slot.task_id), so);
          CdpOptions cdp;
          cdp.chrome_path = browser;
          cdp.start_url = server.base_url();
          cdp.session.base_url = server.base_url();
          cdp.session.seed = slot.seed;
          cdp.session.headless = g.headless;
          CdpBrowser session(cdp);
          outcomes.push_back(wb.validate(slot, &session));
        }
        break;
    }
  }
  const int code = outcome_exit(outcomes);
  if (stage == Stage::Validate) {
    const BenchmarkManifest m = wb.build_manifest();
    std::cout << "manifest: " << m.tasks.size() << " tasks, digest " << m.digest() << "\n";
  }
  return code;
}

int run_all(const Globals& g) {
  const RunConfig config = load_config(g);
  config.validate();
  const PipelineRun r = run_pipeline(config, load_provider_map(config), g.root);
  const int code = outcome_exit(r.outcomes);
  std::cout << "manifest: " << r.manifest.tasks.size() << " tasks, digest " << r.manifest.digest() << "\n";
  return code;
}

int serve_verb(const Globals& g, const std::string& task, const std::string& bundle_dir, int port, bool latency) {
  WebsiteBundle bundle;
  std::uint32_t seed = g.seed ? static_cast<std::uint32_t>(*g.seed) : 0;
  if (!bundle_dir.empty()) {
    bundle = WebsiteBundle::load(bundle_dir);
  } else {
    const BenchmarkStore store = store_for(g);
    const BenchmarkManifest m = store.read_manifest();
    if (m.tasks.empty()) throw ConfigError("manifest lists no tasks");
    const ManifestTask* chosen = &m.tasks.front();
    if (!task.empty()) {
      chosen = nullptr;
      for (const auto& t : m.tasks) {
        if (t.task_id == task) chosen = &t;
      }
      if (!chosen) throw ConfigError("task " + task + " is not in the manifest");
    }
    bundle = WebsiteBundle::load(store.dir() / chosen->bundle_path);
    if (!g.seed) seed = task_seed(0, chosen->task_id);
  }
  ServeOptions o;
  o.port = port;
  o.seed = seed;
  o.latency = latency;
  BundleServer server(bundle, o);
  std::cout << "serving " << bundle.task.task_id << " at " << server.base_url() << " (seed " << seed << ")" << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return kOk;
}

int evaluate_verb(const Globals& g, const std::vector<std::string>& models, const std::string& modality, int budget,
                  const std::string& browser, const std::string& out) {
  const BenchmarkStore store = store_for(g);
  const BenchmarkManifest manifest = store.read_manifest();
  EvaluateConfig ec;
  ec.models = models;
  const auto mod = modality_from_name(modality);
  if (!mod) throw ConfigError("unknown modality '" + modality + "'");
  ec.modality = *mod;
  ec.budget = budget;
  ec.seed = g.seed.value_or(0);
  ec.workers = g.workers.value_or(1);
  ec.chrome_path = browser;
  ec.headless = g.headless;
  std::map<std::string, ProviderProfile> providers;
  const bool need_providers =
      std::any_of(models.begin(), models.end(), [](const std::string& m) { return m != "reference"; });
  if (need_providers) {
    RunConfig c;
    if (!g.config.empty()) c = RunConfig::load(g.config);
    if (!g.providers.empty()) c.providers_file = g.providers;
    providers = load_provider_map(c);
  }
  const auto records = evaluate_benchmark(store, manifest, ec, providers);
  const fs::path path = out.empty() ? store.results_path() : fs::path(out);
  write_results(path, records);
  int correct = 0, infra = 0;
  for (const auto& r : records) {
    correct += r.correct ? 1 : 0;
    infra += r.attempted() ? 0 : 1;
  }
  std::cout << records.size() << " records, " << correct << " correct, " << infra << " infrastructure errors -> "
            << path.string() << "\n";
  return infra > 0 ? kInfrastructureError : kOk;
}

int report_verb(const Globals& g, const std::string& results, const std::string& out) {
  const BenchmarkStore store = store_for(g);
  const BenchmarkManifest manifest = store.read_manifest();
  const fs::path rpath = results.empty() ? store.results_path() : fs::path(results);
  if (!fs::exists(rpath)) throw ConfigError("results file not found: " + rpath.string());
  const fs::path dir = out.empty() ? store.dir() / "report" : fs::path(out);
  for (const auto& p : write_report(manifest, read_results(rpath), dir)) std::cout << p.string() << "\n";
  return kOk;
}

int stats_verb(const Globals& g) {
  std::cout << stats_markdown(store_for(g).read_manifest());
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark task workbench: plan, generate, refine, validate, serve, evaluate and report."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--providers", g.providers, "Providers file");
  app.add_flag("--headless,!--no-headless", g.headless, "Run real browsers headless (default on)");
  app.add_option("--root", g.root, "Benchmark storage root")->capture_default_str();
  app.add_option("--benchmark", g.benchmark, "Benchmark id (defaults to the config's)");

  std::vector<std::string> tasks;
  std::string browser;
  auto add_stage = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--task", tasks, "Restrict to these task ids");
    return sub;
  };
  auto* plan = add_stage("plan", "Draft and refine task plans");
  auto* generate = add_stage("generate", "Generate sites from plans");
  auto* refine = add_stage("refine", "Run quality repairs and inject noise");
  auto* validate = add_stage("validate", "Replay solutions and rebuild the manifest");
  validate->add_option("--browser", browser, "Chromium binary; validates over DevTools instead of the simulator");
  auto* run = app.add_subcommand("run", "plan, generate, refine and validate every task");

  auto* serve = app.add_subcommand("serve", "Serve one task's site");
  std::string serve_task, serve_bundle;
  int port = 8000;
  bool no_latency = false;
  serve->add_option("--task", serve_task, "Manifest task id (default: first)");
  serve->add_option("--bundle", serve_bundle, "Serve a bundle directory instead");
  serve->add_option("--port", port, "Port (0 picks one)")->capture_default_str();
  serve->add_flag("--no-latency", no_latency, "Disable artificial latency");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate agents on the manifest");
  std::vector<std::string> models = {"reference"};
  std::string modality = "screenshot_dom";
  int budget = kMaxSolutionSteps;
  std::string eval_out;
  evaluate->add_option("--models", models, "Agent ids: 'reference' or provider ids")->delimiter(',');
  evaluate->add_option("--modality", modality, "screenshot_dom | dom_only")->capture_default_str();
  evaluate->add_option("--budget", budget, "Action budget")->check(CLI::NonNegativeNumber)->capture_default_str();
  evaluate->add_option("--browser", browser, "Chromium binary; evaluates over DevTools");
  evaluate->add_option("--out", eval_out, "results.jsonl path");

  auto* report = app.add_subcommand("report", "Render Markdown and CSV tables from results");
  std::string results, report_out;
  report->add_option("--results", results, "results.jsonl (default: benchmark's)");
  report->add_option("--out", report_out, "Output directory");

  auto* stats = app.add_subcommand("stats", "Summarize the manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*plan) return run_stage_verb(g, Stage::Plan, tasks, "");
    if (*generate) return run_stage_verb(g, Stage::Generate, tasks, "");
    if (*refine) return run_stage_verb(g, Stage::Refine, tasks, "");
    if (*validate) return run_stage_verb(g, Stage::Validate, tasks, browser);
    if (*run) return run_all(g);
    if (*serve) return serve_verb(g, serve_task, serve_bundle, port, !no_latency);
    if (*evaluate) return evaluate_verb(g, models, modality, budget, browser, eval_out);
    if (*report) return report_verb(g, results, report_out);
    if (*stats) return stats_verb(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InfrastructureError& e) {
    std::cerr << "infrastructure error: " << e.what() << "\n";
    return kInfrastructureError;
  } catch (const TransportError& e) {
    std::cerr << "infrastructure error: " << e.what() << "\n";
    return kInfrastructureError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "infrastructure error: " << e.what() << "\n";
    return kInfrastructureError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTaskFailures;
  }
  return kOk;
}
