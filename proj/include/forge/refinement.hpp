#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forge/bundle.hpp"
#include "forge/provider.hpp"

namespace forge {

enum class RuleCategory {
  FunctionalCompleteness,
  VisualCorrectness,
  StateDeterminism,
  EnvironmentRealism,
  TaskSecurity,
  InteractionFeedback,
};
std::string rule_category_name(RuleCategory c);
std::optional<RuleCategory> rule_category_from_name(const std::string& s);

enum class Checker { Static, Llm };
enum class Severity { Blocker = 0, Major = 1, Minor = 2 };
std::string severity_name(Severity s);
std::optional<Severity> severity_from_name(const std::string& s);

struct QualityRule {
  std::string rule_id;
  RuleCategory category = RuleCategory::FunctionalCompleteness;
  Checker checker = Checker::Static;
  Severity severity = Severity::Major;
  std::string check;  // built-in static check name, or the review topic for llm rules
  std::string description;
  bool operator==(const QualityRule&) const = default;
};

// Built-in static checks, by name.
const std::vector<std::string>& static_check_names();

struct RuleSet {
  std::vector<QualityRule> rules;

  // Throws ConfigError on duplicate ids or unknown static checks.
  void validate() const;
  const QualityRule* find(const std::string& rule_id) const;

  nlohmann::json to_json() const;
  static RuleSet from_json(const nlohmann::json& j);
  static RuleSet load(const std::filesystem::path& path);
  // The catalog shipped as data/rules.json.
  static RuleSet defaults();
};

struct Finding {
  std::string rule_id;
  std::string file;
  std::string detail;
  Severity severity = Severity::Major;
  bool operator==(const Finding&) const = default;
};

nlohmann::json to_json(const Finding& f);

struct Assessment {
  std::vector<Finding> findings;
  std::vector<std::string> skipped;  // llm rules not run for lack of a provider
};

// Static rules always run; llm rules consult `reviewer` when given and are
// listed as skipped otherwise. Findings are sorted by severity, then rule_id,
// then file and detail.
Assessment assess(const WebsiteBundle& bundle, const RuleSet& rules, const ProviderProfile* reviewer = nullptr);

enum class RepairAction { ResolveDeadLinks, ReplaceBlockingDialogs, InjectNoise, Manual };
std::string repair_action_name(RepairAction a);
RepairAction repair_action_for(const std::string& check);

struct RepairStep {
  Finding finding;
  RepairAction action = RepairAction::Manual;
};

using RepairPlan = std::vector<RepairStep>;

// Blockers, then major, then minor; stable by rule_id within a class.
RepairPlan plan_repairs(const std::vector<Finding>& findings, const RuleSet& rules = RuleSet::defaults());

struct NoiseConfig {
  int cookie_banner_delay = 1000;
  int popup_delay_min = 5000;
  int popup_delay_max = 15000;
  std::vector<std::string> suppression_keys = {"forge_cookie_consent", "forge_popup_dismissed"};
  // {"default": [lo, hi], "/route": [lo, hi]} in milliseconds.
  nlohmann::json network_delay = {{"default", {100, 400}}};
  std::uint32_t seed = 0;

  // Throws ConfigError when a delay is negative, min > max, or a latency range is malformed.
  void validate() const;
  nlohmann::json to_json() const;
  static NoiseConfig from_json(const nlohmann::json& j);
};

// Mirror of the runtime-config island.
struct RuntimeConfig {
  int cookie_delay_ms = 1000;
  int popup_delay_min_ms = 5000;
  int popup_delay_max_ms = 15000;
  std::vector<std::string> suppression_keys;
  nlohmann::json judge_rules;  // null when the task has no operation code
  std::uint32_t seed = 0;

  std::string cookie_key() const;
  std::string popup_key() const;

  nlohmann::json to_json() const;
  static RuntimeConfig from_json(const nlohmann::json& j);
};

inline constexpr const char* kRuntimeConfigId = "forge-runtime-config";
inline constexpr const char* kRuntimeLoadsKey = "forge_runtime_loads";
inline constexpr const char* kRuntimeBegin = "/* forge-runtime:begin */";
inline constexpr const char* kRuntimeEnd = "/* forge-runtime:end */";

// The in-page runtime script.
const std::string& page_runtime_source();

// Island payload for a bundle: noise settings plus the shipped judge and its
// encoded outcome codes.
RuntimeConfig runtime_config_for(const WebsiteBundle& bundle, const NoiseConfig& config);

// Reads the island from a page; nullopt when absent or malformed.
std::optional<RuntimeConfig> read_runtime_config(std::string_view page_html);
// Replaces the island payload on a page, keeping everything else byte-identical.
std::string rewrite_runtime_seed(std::string_view page_html, std::uint32_t seed);

// Same generator and per-load seeding as the runtime.
class Mulberry32 {
public:
  explicit Mulberry32(std::uint32_t seed) : state_(seed) {}
  double next();

private:
  std::uint32_t state_;
};

std::uint32_t runtime_load_seed(std::uint32_t seed, std::uint32_t load);
int popup_delay_ms(const RuntimeConfig& config, std::uint32_t load);

// Occurrences of alert/confirm/prompt calls not preceded by an identifier character.
struct BlockingCall {
  std::size_t offset = 0;
  std::string name;
};
std::vector<BlockingCall> find_blocking_calls(std::string_view script);
// Script text served by a bundle: js files plus inline scripts and on* handlers of pages.
std::vector<std::pair<std::string, std::string>> served_scripts(const WebsiteBundle& bundle);

WebsiteBundle inject_noise(WebsiteBundle bundle, const NoiseConfig& config);
WebsiteBundle replace_blocking_dialogs(WebsiteBundle bundle);
WebsiteBundle resolve_dead_links(WebsiteBundle bundle);

// Re-runs assess for the rules that failed before; returns what still fails.
std::vector<Finding> verify_repairs(const WebsiteBundle& bundle, const std::vector<Finding>& findings,
                                    const RuleSet& rules = RuleSet::defaults(),
                                    const ProviderProfile* reviewer = nullptr);

struct RefinementReport {
  std::vector<Finding> before;
  RepairPlan plan;
  std::vector<std::string> applied;  // repair action names in execution order
  std::vector<Finding> residual;
  std::vector<std::string> skipped;
  std::size_t pages_before = 0;
  std::size_t pages_after = 0;
  std::size_t files_before = 0;
  std::size_t files_after = 0;

  bool clean() const;  // no blocker left
  nlohmann::json to_json() const;
};

// Assess, plan, execute, verify. Noise injection always runs last so pages
// created by earlier repairs carry the runtime.
std::pair<WebsiteBundle, RefinementReport> refine_bundle(WebsiteBundle bundle, const NoiseConfig& config,
                                                         const RuleSet& rules = RuleSet::defaults(),
                                                         const ProviderProfile* reviewer = nullptr);

} // namespace forge
