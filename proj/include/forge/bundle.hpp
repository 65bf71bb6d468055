#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/assets.hpp"
#include "forge/blueprint.hpp"
#include "forge/judge.hpp"

namespace forge {

inline constexpr const char* kDataFile = "data.json";
inline constexpr const char* kSolutionFile = "solution.json";
inline constexpr const char* kMetadataFile = "metadata.json";
inline constexpr const char* kTaskFile = "task.json";
inline constexpr const char* kStyleFile = "css/style.css";
inline constexpr const char* kScriptFile = "js/main.js";
inline constexpr int kMaxSolutionSteps = 50;

// Files written next to the site but never served to a browser.
bool is_control_file(const std::string& path);

struct PageEntry {
  std::string page_id;
  std::string route;  // "/" or "/pricing"
  std::string file;   // "index.html"
  bool operator==(const PageEntry&) const = default;
};

enum class AssetKind { Image, Chart, Stylesheet, Script, Data };
std::string asset_kind_name(AssetKind k);
std::optional<AssetKind> asset_kind_from_name(const std::string& s);

struct AssetEntry {
  AssetKind kind = AssetKind::Image;
  std::string file;
  bool operator==(const AssetEntry&) const = default;
};

enum class EdgeTarget { Page, External, Dead };

struct NavEdge {
  std::string from;         // page id
  std::string text;         // link text
  std::string href;         // raw target
  EdgeTarget target = EdgeTarget::Dead;
  std::string to;           // page id when target == Page
  bool operator==(const NavEdge&) const = default;
};

struct NavGraph {
  std::vector<std::string> nodes;
  std::vector<NavEdge> edges;

  std::size_t dead_count() const;
  bool operator==(const NavGraph&) const = default;
};

struct EncodedAnswerConfig {
  AnswerType answer_type = AnswerType::DirectAnswer;
  std::map<std::string, std::string> ground_truth;     // name -> encoded
  std::map<std::string, std::string> deceptive_codes;  // pattern id -> encoded
  std::string code_field;                              // ground-truth field carrying the code
  bool operator==(const EncodedAnswerConfig&) const = default;
};

// Throws DecodeError / ConfigError when an invariant fails: empty plaintext,
// duplicate codes, or a deceptive code whose shape differs from the real one.
void check_answer_config(const EncodedAnswerConfig& config);

// Code format used for the "same shape" check: letters map to A, digits to 9.
std::string code_shape(const std::string& code);

struct SchemaField {
  std::string name;
  std::string type;  // "date", "integer", "number", "string"
  std::vector<std::string> options;
  bool operator==(const SchemaField&) const = default;
};

using SubmissionState = nlohmann::json;

// Problems with a state against a schema; empty when it conforms.
std::vector<std::string> check_submission_state(const SubmissionState& state,
                                                const std::vector<SchemaField>& schema);

// A concrete browser action attached to a solution step.
struct ActionSpec {
  std::string kind;      // navigate | click | input | read | scroll | back
  std::string url;       // navigate
  std::string selector;  // click, input, read
  std::string text;      // input
  std::string field;     // read: answer field receiving the element text
  bool operator==(const ActionSpec&) const = default;
};

struct SolutionAction {
  int ordinal = 1;
  std::string description;
  StepKind kind = StepKind::Navigate;
  std::optional<ActionSpec> action;
  bool operator==(const SolutionAction&) const = default;
};

struct SolutionFile {
  std::vector<SolutionAction> steps;
  std::map<std::string, std::string> expected_final_state;
  std::vector<SchemaField> submission_schema;
  SubmissionState witness_state = nlohmann::json::object();
  // Answer field -> expression over the witness state, or "@code" for the
  // field produced by the judge.
  std::map<std::string, std::string> answer_map;
  std::optional<JudgeProgram> judge;
};

nlohmann::json to_json(const SolutionFile& s);
SolutionFile solution_from_json(const nlohmann::json& j);

struct TaskInfo {
  std::string task_id;
  std::string title;
  std::string user_query;
  Domain domain = Domain::ConsumerTransaction;
  int level = 1;
  DifficultyVector difficulty;
};

nlohmann::json to_json(const TaskInfo& t);
TaskInfo task_info_from_json(const nlohmann::json& j);

// A self-contained static site plus its control files, held in memory.
// `files` maps bundle-relative paths to bytes and is the source of truth for
// content; save/load mirror it to a directory.
struct WebsiteBundle {
  std::filesystem::path root;
  std::map<std::string, std::string> files;
  std::vector<PageEntry> pages;
  std::vector<AssetEntry> assets;
  NavGraph nav;
  EncodedAnswerConfig answer;
  SolutionFile solution;
  TaskInfo task;
  // Per-route added latency for the server: {"default": [lo, hi], "/book": [lo, hi]}.
  nlohmann::json network_delay = nlohmann::json::object();
  // Judge program as shipped (obfuscated, encoded literals); absent for direct answers.
  std::optional<JudgeProgram> shipped_judge;

  // Served files only (control files excluded).
  std::vector<std::string> served_files() const;
  const PageEntry* page_by_file(const std::string& file) const;
  const PageEntry* page_by_id(const std::string& id) const;

  // Rewrites data.json, metadata.json, solution.json and task.json from the
  // structured fields.
  void sync_control_files();
  void save(const std::filesystem::path& dir) const;
  static WebsiteBundle load(const std::filesystem::path& dir);
};

std::string render_data_json(const WebsiteBundle& bundle);

// Added latency range in ms for a served file: the page's route, then
// "/<file>", then "default". nullopt when nothing applies.
std::optional<std::pair<double, double>> latency_range(const WebsiteBundle& bundle, const std::string& file);

// First matching rule wins. CORRECT yields the decoded ground-truth code,
// any other outcome the decoded deceptive code. Unknown outcomes raise ConfigError.
std::string resolve_submission(const SubmissionState& state, const EncodedAnswerConfig& config,
                               const JudgeProgram& rules);

// Targets of every anchor, data-href button and form action, classified.
// Throws ExtractionError naming the file when a page does not parse.
NavGraph extract_nav_graph(const WebsiteBundle& bundle);

// Resolves an href found on `from_file` to a bundle file path, or nullopt for
// external, fragment-only and script targets.
std::optional<std::string> resolve_href(const std::string& from_file, const std::string& href);
bool is_external_href(const std::string& href);

struct AuditFlag {
  char code = 'a';  // a: ground truth in plaintext, b: deceptive code in plaintext,
                    // c: external reference, d: unencoded answer-bearing data field
  std::string file;
  std::string detail;
  bool operator==(const AuditFlag&) const = default;
};

struct AuditReport {
  std::vector<AuditFlag> flags;
  bool passed() const { return flags.empty(); }
  bool has(char code) const;
};

AuditReport audit_bundle(const WebsiteBundle& bundle);

// Whole-word occurrence: the match must not be flanked by letters or digits.
bool contains_token(std::string_view haystack, std::string_view needle);

// Parsed Generation output: fenced ```html path=..., ```css path=...,
// ```js path=... blocks plus ```json role=answer|judge|solution|assets blocks.
struct GenerationOutput {
  std::map<std::string, std::string> files;
  nlohmann::json answer = nlohmann::json::object();
  std::optional<nlohmann::json> judge;
  nlohmann::json solution = nlohmann::json::object();
  std::vector<AssetRequest> assets;
};

GenerationOutput parse_generation_output(const std::string& text);

std::string generation_system_prompt();
std::string generation_user_prompt(const TaskBlueprint& plan);

// Calls the provider, fetches assets, encodes answers, writes the control
// files and runs the anti-cheat audit. Raises GenerationError for unusable
// output and AssemblyError for missing pages, asset failures or audit flags.
WebsiteBundle assemble_bundle(const TaskBlueprint& plan, const ProviderProfile& provider,
                              AssetProvider& asset_provider, const std::string& task_id = "");

// Names of derived values referenced by data-forge-show bindings in served pages.
std::set<std::string> bound_names(const WebsiteBundle& bundle);

} // namespace forge
