#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/difficulty.hpp"
#include "forge/provider.hpp"

namespace forge {

enum class Domain {
  ConsumerTransaction,   // D1
  ContentModeration,     // D2
  EnterpriseProcess,     // D3
  InfoRetrieval,         // D4
  PlatformManagement,    // D5
  ToolUsage,             // D6
  ContentCreation,       // D7
};

inline constexpr std::array<Domain, 7> kAllDomains = {
    Domain::ConsumerTransaction, Domain::ContentModeration, Domain::EnterpriseProcess,
    Domain::InfoRetrieval,       Domain::PlatformManagement, Domain::ToolUsage,
    Domain::ContentCreation,
};

std::string domain_key(Domain d);    // "consumer_transaction"
std::string domain_code(Domain d);   // "D1"
std::string domain_label(Domain d);  // "Consumer Transaction/Service"
// Accepts snake_case keys and D1..D7.
std::optional<Domain> domain_from_string(const std::string& s);
constexpr std::size_t domain_index(Domain d) { return static_cast<std::size_t>(d); }

struct PageDesign {
  std::string page_id;
  std::string route;
  std::string purpose;
  std::string key_content;
  std::vector<std::string> distractors;
  bool operator==(const PageDesign&) const = default;
};

enum class StepKind { Navigate, Observe, VisualAnalysis, Reasoning, FormInput, Click, Verify, ReadAnswer };
std::string step_kind_name(StepKind k);
std::optional<StepKind> step_kind_from_name(const std::string& s);

struct SolutionStep {
  int ordinal = 1;
  std::string description;
  StepKind kind = StepKind::Navigate;
  bool operator==(const SolutionStep&) const = default;
};

enum class AnswerType { DirectAnswer, OperationCode, Mixed };
std::string answer_type_name(AnswerType t);
std::optional<AnswerType> answer_type_from_name(const std::string& s);

struct GradingTier {
  std::string condition;
  double credit = 1.0;
  bool operator==(const GradingTier&) const = default;
};

struct AnswerSpec {
  AnswerType answer_type = AnswerType::DirectAnswer;
  // Ordered by field name.
  std::map<std::string, std::string> ground_truth_fields;
  // Fields judged by exact match (workflow-derived codes). Every other field
  // is a direct answer judged with normalization.
  std::vector<std::string> code_fields;
  std::vector<GradingTier> grading_tiers;
  bool operator==(const AnswerSpec&) const = default;
};

struct TaskBlueprint {
  std::string title;
  std::string user_query;
  Domain domain = Domain::ConsumerTransaction;
  int overall_level = 1;
  DifficultyVector difficulty;
  std::vector<PageDesign> pages;
  std::vector<SolutionStep> solution;
  AnswerSpec answer;
  std::string qa_notes;
  bool operator==(const TaskBlueprint&) const = default;
};

nlohmann::json to_json(const TaskBlueprint& bp);
// Structural validation only: composition is not enforced here so drafts
// that break the level rules still parse. Throws ParseError naming the section.
TaskBlueprint blueprint_from_json(const nlohmann::json& j);

// Extracts the first fenced ```json block from provider output and parses it.
TaskBlueprint parse_blueprint(const std::string& text);
// Pretty JSON inside a ```json fence; parse_blueprint inverts it exactly.
std::string serialize_blueprint(const TaskBlueprint& bp);

// Normalized token-level Levenshtein distance between the serialized plans.
double modification_ratio(const TaskBlueprint& a, const TaskBlueprint& b);

struct DraftResult {
  TaskBlueprint blueprint;
  bool composition_ok = false;
  int attempts = 0;
};

// Stage 1. Composition is recorded, not enforced. Transport errors propagate;
// three unparseable responses raise GenerationError with the last raw text.
DraftResult draft_plan(Domain domain, int level, const ProviderProfile& provider);

struct RefineResult {
  TaskBlueprint blueprint;
  double modification_ratio = 0.0;
  std::vector<std::string> warnings;
  int attempts = 0;
};

inline constexpr double kMinModificationRatio = 0.30;

// Stage 2. The overall level is held at the draft's value; a refined plan that
// still violates composition after two further attempts raises PipelineError.
RefineResult refine_plan(const TaskBlueprint& draft, const ProviderProfile& provider);

// Prompts sent to providers, exposed for logging and fixtures.
std::string plan_system_prompt();
std::string draft_user_prompt(Domain domain, int level);
std::string refine_user_prompt(const TaskBlueprint& draft);

} // namespace forge
