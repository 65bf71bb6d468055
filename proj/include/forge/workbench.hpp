#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/blueprint.hpp"
#include "forge/bundle.hpp"
#include "forge/difficulty.hpp"
#include "forge/harness.hpp"
#include "forge/manifest.hpp"
#include "forge/provider.hpp"
#include "forge/refinement.hpp"
#include "forge/validation.hpp"

namespace forge {

// ---- configuration ---------------------------------------------------------------

// Provider ids (sections of the providers file) bound to each stage.
struct ProviderBindings {
  std::string planner = "planner";      // draft plans, creative
  std::string refiner = "refiner";      // plan refinement, precision
  std::string generator = "generator";  // site generation, precision
  std::string reviewer;                 // optional layout review
};

struct RunConfig {
  std::string benchmark_id = "forge";
  std::vector<Domain> domains;
  std::vector<int> levels;
  int tasks_per_cell = 60;
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path providers_file;
  ProviderBindings bindings;
  std::map<Dimension, int> dimension_overrides;
  NoiseConfig noise;
  int budget = kMaxSolutionSteps;

  // Throws ConfigError on an empty selection, a bad count or level, or an
  // override that no vector at a requested level can satisfy.
  void validate() const;
  nlohmann::json to_json() const;
  // Relative providers_file paths resolve against `base`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  static RunConfig load(const std::filesystem::path& path);
};

// Some vector with the forced dimensions fixed satisfies the level's composition rule.
bool overrides_satisfiable(const std::map<Dimension, int>& overrides, int level);

// Per-task seed: stable hash of the run seed and the task id.
std::uint32_t task_seed(std::uint64_t run_seed, const std::string& task_id);

// "D1-L3-007"
std::string make_task_id(Domain domain, int level, int index);

// ---- storage ---------------------------------------------------------------------

// <root>/<benchmark_id>/
//   manifest.json, pass_rates.md, config.json
//   tasks/<task_id>/ status.json, draft.json, plan.json, generated/, site/,
//                    refinement.json, verdict.json, trace.jsonl
class BenchmarkStore {
public:
  BenchmarkStore(std::filesystem::path root, std::string benchmark_id);

  const std::string& benchmark_id() const { return id_; }
  std::filesystem::path dir() const;
  std::filesystem::path task_dir(const std::string& task_id) const;
  std::filesystem::path site_dir(const std::string& task_id) const;
  std::filesystem::path manifest_path() const;
  std::filesystem::path results_path() const;
  // Bundle path recorded in the manifest, relative to dir().
  std::string site_relpath(const std::string& task_id) const;

  void save_plan(const std::string& task_id, const TaskBlueprint& draft, const TaskBlueprint& plan) const;
  TaskBlueprint load_plan(const std::string& task_id) const;
  void save_generated(const std::string& task_id, const WebsiteBundle& bundle) const;
  WebsiteBundle load_generated(const std::string& task_id) const;
  void save_site(const std::string& task_id, const WebsiteBundle& bundle, const RefinementReport& report) const;
  WebsiteBundle load_site(const std::string& task_id) const;
  void save_verdict(const std::string& task_id, const Verdict& verdict) const;
  std::optional<Verdict> load_verdict(const std::string& task_id) const;

  nlohmann::json load_status(const std::string& task_id) const;  // empty object when absent
  void save_status(const std::string& task_id, const nlohmann::json& status) const;

  // Task directories present on disk, sorted.
  std::vector<std::string> task_ids() const;

  void write_manifest(const BenchmarkManifest& manifest) const;
  BenchmarkManifest read_manifest() const;

private:
  std::filesystem::path root_;
  std::string id_;
};

// ---- pipeline --------------------------------------------------------------------

enum class Stage { Plan, Generate, Refine, Validate };
std::string stage_name(Stage s);
std::optional<Stage> stage_from_name(const std::string& s);

struct TaskSlot {
  std::string task_id;
  Domain domain = Domain::ConsumerTransaction;
  int level = 1;
  std::uint32_t seed = 0;
};

struct StageOutcome {
  std::string task_id;
  Stage stage = Stage::Plan;
  bool ok = true;
  bool infrastructure = false;  // the failure came from the environment, not the task
  std::string error;
};

struct PipelineRun {
  BenchmarkManifest manifest;
  std::vector<StageOutcome> outcomes;  // last stage reached per task, sorted by task id

  bool all_ok() const;
  bool any_infrastructure_error() const;
};

class Workbench {
public:
  // Validates the config; throws ConfigError before touching providers or storage.
  Workbench(RunConfig config, std::map<std::string, ProviderProfile> providers, std::filesystem::path root);

  const RunConfig& config() const { return config_; }
  const BenchmarkStore& store() const { return store_; }

  // One slot per (domain, level, index) in config order.
  std::vector<TaskSlot> slots() const;
  std::optional<TaskSlot> slot(const std::string& task_id) const;

  // Single stages; each reads the previous stage's output from storage and
  // records its outcome in status.json. Errors are caught and reported.
  StageOutcome plan(const TaskSlot& slot) const;
  StageOutcome generate(const TaskSlot& slot) const;
  StageOutcome refine(const TaskSlot& slot) const;
  // Replays the stored solution on the simulated driver, or on `session` when given.
  StageOutcome validate(const TaskSlot& slot, BrowserSession* session = nullptr) const;

  // Runs `stages` for every slot on a bounded worker pool.
  std::vector<StageOutcome> run_stages(const std::vector<Stage>& stages) const;

  // Rebuilds the manifest from stored verdicts and writes it with the pass-rate table.
  BenchmarkManifest build_manifest() const;

  // plan -> generate -> refine -> validate for every slot, then the manifest.
  PipelineRun run() const;

private:
  const ProviderProfile& provider(const std::string& id) const;
  std::vector<TaskVerdict> collect_verdicts() const;

  RunConfig config_;
  std::map<std::string, ProviderProfile> providers_;
  BenchmarkStore store_;
};

PipelineRun run_pipeline(const RunConfig& config, const std::map<std::string, ProviderProfile>& providers,
                         const std::filesystem::path& root);

// ---- server ----------------------------------------------------------------------

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 0;              // 0 picks an ephemeral port
  std::uint32_t seed = 0;    // written into every page's runtime-config island
  bool latency = true;       // apply the bundle's network_delay ranges
};

// Read-only static server for one bundle. Control files are never served.
class BundleServer {
public:
  // Throws InfrastructureError when the port cannot be bound.
  BundleServer(const WebsiteBundle& bundle, ServeOptions options = {});
  ~BundleServer();
  BundleServer(const BundleServer&) = delete;
  BundleServer& operator=(const BundleServer&) = delete;

  int port() const;
  std::string base_url() const;  // "http://127.0.0.1:<port>/"
  long long requests() const;
  // Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Bytes the server answers for a request path, or nullopt for a 404.
std::optional<std::pair<std::string, std::string>> serve_lookup(const WebsiteBundle& bundle, const std::string& path,
                                                                std::uint32_t seed);  // (content type, body)

// ---- evaluation and reporting ----------------------------------------------------

struct EvaluateConfig {
  std::vector<std::string> models = {"reference"};
  Modality modality = Modality::ScreenshotDom;
  int budget = kMaxSolutionSteps;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string chrome_path;  // non-empty: evaluate in a real browser over DevTools
  bool headless = true;
};

// "reference" replays the task's stored solution; any other name must be a
// provider id and is driven through ProviderAgent.
std::unique_ptr<Solver> make_agent(const std::string& model, const WebsiteBundle& bundle,
                                   const std::map<std::string, ProviderProfile>& providers);

// Every (model, manifest task) pair. Infrastructure failures are recorded on
// the record; any other error propagates.
std::vector<EvaluationRecord> evaluate_benchmark(const BenchmarkStore& store, const BenchmarkManifest& manifest,
                                                 const EvaluateConfig& config,
                                                 const std::map<std::string, ProviderProfile>& providers);

// Writes accuracy, per-dimension, runtime and solvability tables as Markdown
// and CSV under `out_dir`; returns the paths in write order. Throws ConfigError
// on empty results or task ids missing from the manifest.
std::vector<std::filesystem::path> write_report(const BenchmarkManifest& manifest,
                                                const std::vector<EvaluationRecord>& results,
                                                const std::filesystem::path& out_dir);

// Task counts, difficulty-level distribution and pass rates of a manifest.
std::string stats_markdown(const BenchmarkManifest& manifest);

} // namespace forge
