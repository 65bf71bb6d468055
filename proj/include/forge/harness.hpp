#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/blueprint.hpp"
#include "forge/bundle.hpp"
#include "forge/difficulty.hpp"
#include "forge/manifest.hpp"
#include "forge/util.hpp"
#include "forge/validation.hpp"

namespace forge {

// ---- answer judging --------------------------------------------------------------

// Trim, case-fold, drop currency symbols and thousands separators.
std::string normalize_answer(const std::string& text);
// Parses a normalized answer as a finite number.
std::optional<double> parse_answer_number(const std::string& normalized);
// Normalized equality; numbers compare at 1e-9 relative tolerance.
bool direct_answer_equal(const std::string& submitted, const std::string& expected);

// Every ground-truth field must be present and pass. Operation codes (all
// fields for OperationCode, `code_field` for Mixed) compare exactly.
bool judge_answer(AnswerType type, const std::map<std::string, std::string>& submitted,
                  const std::map<std::string, std::string>& ground_truth, const std::string& code_field = "");

// Plaintext ground truth from a bundle's answer config.
std::map<std::string, std::string> decoded_ground_truth(const EncodedAnswerConfig& config);

// ---- records ---------------------------------------------------------------------

enum class Modality { ScreenshotDom, DomOnly };
std::string modality_name(Modality m);
std::optional<Modality> modality_from_name(const std::string& s);

struct EvaluationRecord {
  std::string model_id;
  std::string task_id;
  Modality modality = Modality::ScreenshotDom;
  bool correct = false;
  int turns = 0;
  int acts = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  bool step_logging = true;
  std::map<std::string, std::string> submitted_answer;
  double elapsed = 0.0;  // seconds
  std::string infrastructure_error;  // non-empty: excluded from every denominator

  bool attempted() const { return infrastructure_error.empty(); }
  nlohmann::json to_json() const;
  static EvaluationRecord from_json(const nlohmann::json& j);
  bool operator==(const EvaluationRecord&) const = default;
};

struct TaskIndexEntry {
  Domain domain = Domain::ConsumerTransaction;
  int level = 1;
  DifficultyVector difficulty;
};

struct ResultSet {
  std::vector<EvaluationRecord> records;
  std::map<std::string, TaskIndexEntry> index;

  // Throws ConfigError listing record task ids missing from the index.
  void validate() const;
  std::vector<std::string> models() const;  // in first-appearance order

  static std::map<std::string, TaskIndexEntry> index_from(const BenchmarkManifest& manifest);
};

// results.jsonl: one record per line.
void write_results(const std::filesystem::path& path, const std::vector<EvaluationRecord>& records);
std::vector<EvaluationRecord> read_results(const std::filesystem::path& path);

// ---- evaluation ------------------------------------------------------------------

struct EvaluateOptions {
  Modality modality = Modality::ScreenshotDom;
  int budget = kMaxSolutionSteps;
  std::string model_id = "agent";
};

// Runs the agent until it terminates or spends the action budget and judges
// only its final answer. InfrastructureError from the session is recorded on
// the returned record.
EvaluationRecord evaluate_task(const WebsiteBundle& bundle, BrowserSession& session, Solver& agent,
                               const EvaluateOptions& options = {});

// Drives a text-completion provider as the agent under test. Each turn sends
// the task instruction, the indexed elements and recent history; the reply is
// one JSON action, e.g. {"action": "click", "index": 3} or
// {"action": "terminate", "answer": {"total_cost": "11440.00"}}, optionally
// with a "reasoning" string. Unparseable replies become a scroll and count
// against the budget.
class ProviderAgent : public Solver {
public:
  ProviderAgent(ProviderProfile provider, std::string instruction, std::string model_id);
  std::string id() const override { return model_id_; }
  SolverTurn next(const Observation& observation, const std::vector<TraceStep>& history) override;
  std::optional<SolverUsage> usage() const override { return usage_; }

  static std::string system_prompt();
  static std::string turn_prompt(const std::string& instruction, const Observation& observation,
                                 const std::vector<TraceStep>& history);
  // Throws ParseError when no JSON object with a known action is found.
  static SolverTurn parse_reply(const std::string& text);

private:
  ProviderProfile provider_;
  std::string instruction_;
  std::string model_id_;
  SolverUsage usage_;
};

// ---- aggregation -----------------------------------------------------------------

struct Tally {
  long long correct = 0;
  long long total = 0;
  std::optional<util::Rational> rate() const;  // absent when total == 0
};

// Columns "L1", "L2", "L3", "ALL", "D1".."D7".
struct AccuracyRow {
  std::string model_id;
  std::map<std::string, Tally> tallies;                        // empty for the Average row
  std::map<std::string, std::optional<util::Rational>> rates;
};

struct ReportTables {
  std::vector<AccuracyRow> models;
  AccuracyRow average;

  static const std::vector<std::string>& columns();
  std::string to_markdown() const;
  std::string to_csv() const;
};

// Rendered: the Average row is the mean of the per-model rates as displayed
// (one decimal), so it agrees with a table read off the rendered rows.
// Exact: the mean of the unrounded per-model rates.
enum class AverageMode { Rendered, Exact };

// Throws ConfigError on an empty or inconsistent result set.
ReportTables aggregate(const ResultSet& results, AverageMode mode = AverageMode::Rendered);

struct DimensionRow {
  std::string model_id;
  std::map<std::pair<Dimension, int>, Tally> cells;
  std::optional<util::Rational> rate(Dimension d, int level) const;
};

struct DimensionTable {
  std::vector<DimensionRow> models;
  std::string to_markdown() const;
  std::string to_csv() const;
};

DimensionTable per_dimension_table(const ResultSet& results);

struct SolvabilityReport {
  std::map<int, Tally> by_level;   // correct = solved by at least one model
  Tally overall;
  std::map<std::string, int> solver_counts;             // task -> models that solved it
  std::map<int, util::Rational> mean_solvers;           // per level
  int models = 0;

  std::string to_markdown() const;
};

// Throws ConfigError when no model has records.
SolvabilityReport solvability(const ResultSet& results);

// Rank correlation with average ranks for ties; absent when either side has
// zero variance or fewer than two points.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);
// Average ranks (1-based).
std::vector<double> average_ranks(const std::vector<double>& values);

struct SpearmanMatrix {
  std::array<std::array<std::optional<double>, kDimensionCount>, kDimensionCount> rho{};
  std::optional<double> mean_abs_off_diagonal;
  std::array<std::optional<double>, kDimensionCount> mean_abs_per_dimension{};

  std::string to_markdown() const;
};

// Throws ConfigError with fewer than three annotations.
SpearmanMatrix spearman_matrix(const std::vector<DifficultyVector>& annotations);

struct RuntimeCell {
  long long tasks = 0;
  util::Rational turns;
  util::Rational acts;
  util::Rational prompt_k;      // thousands of tokens per task
  util::Rational completion_k;
};

struct RuntimeRow {
  std::string model_id;
  bool step_logging = true;
  std::map<int, RuntimeCell> by_level;
};

struct RuntimeReport {
  std::vector<RuntimeRow> models;
  std::string to_markdown() const;  // models without step logging carry a dagger
  std::string to_csv() const;
};

RuntimeReport runtime_report(const ResultSet& results);

} // namespace forge
