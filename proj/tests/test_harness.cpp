#include <gtest/gtest.h>

#include "forge/bundle.hpp"
#include "forge/errors.hpp"
#include "forge/harness.hpp"
#include "forge/refinement.hpp"
#include "forge/util.hpp"
#include "forge/validation.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace forge;
using nlohmann::json;

namespace {

std::string fixture(const std::string& name) {
  return util::read_file(std::string(FORGE_FIXTURE_DIR) + "/" + name);
}

json published(const std::string& name) { return json::parse(fixture("published/" + name)); }

const WebsiteBundle& refined() {
  static const WebsiteBundle b = [] {
    auto p = std::make_shared<ScriptedProvider>("mock");
    p->add("generate:", fixture("wedding/generation.md"));
    StubAssetProvider assets;
    const WebsiteBundle raw = assemble_bundle(parse_blueprint(fixture("wedding/refined.md")),
                                              ProviderProfile::precision(p), assets, "D1-L3-000");
    return refine_bundle(raw, NoiseConfig{}).first;
  }();
  return b;
}

Domain domain_of(const std::string& code) { return *domain_from_string(code); }

// Records from per-model bitstrings; per-level runtime totals are spread
// over the attempted tasks of that level.
ResultSet accuracy_results() {
  const json j = published("accuracy.json");
  ResultSet rs;
  std::vector<std::string> ids;
  std::map<int, long long> per_level;
  for (const auto& t : j.at("tasks")) {
    const std::string id = t.at("task_id");
    ids.push_back(id);
    TaskIndexEntry e;
    e.domain = domain_of(t.at("domain"));
    e.level = t.at("level");
    rs.index[id] = e;
    per_level[e.level] += 1;
  }
  for (const auto& m : j.at("models")) {
    const std::string bits = m.at("correct");
    std::map<int, long long> seen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      EvaluationRecord r;
      r.model_id = m.at("model_id");
      r.task_id = ids[i];
      r.correct = bits[i] == '1';
      r.step_logging = m.at("step_logging");
      const int level = rs.index[ids[i]].level;
      const long long k = seen[level]++;
      const long long n = per_level[level];
      const json& tot = m.at("runtime_totals").at("L" + std::to_string(level));
      auto share = [&](const char* key) {
        const long long total = tot.at(key).get<long long>();
        return total / n + (k < total % n ? 1 : 0);
      };
      r.turns = static_cast<int>(share("turns"));
      r.acts = static_cast<int>(share("acts"));
      r.prompt_tokens = share("prompt_tokens");
      r.completion_tokens = share("completion_tokens");
      rs.records.push_back(std::move(r));
    }
  }
  return rs;
}

ResultSet solvability_results() {
  const json j = published("solvability.json");
  ResultSet rs;
  const auto models = j.at("models").get<std::vector<std::string>>();
  for (const auto& t : j.at("tasks")) {
    const std::string id = t.at("task_id");
    TaskIndexEntry e;
    e.level = t.at("level");
    rs.index[id] = e;
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (const auto& t : j.at("tasks")) {
      EvaluationRecord r;
      r.model_id = models[m];
      r.task_id = t.at("task_id");
      r.correct = t.at("solvers").get<std::string>()[m] == '1';
      rs.records.push_back(std::move(r));
    }
  }
  return rs;
}

EvaluationRecord record(const std::string& model, const std::string& task, bool correct) {
  EvaluationRecord r;
  r.model_id = model;
  r.task_id = task;
  r.correct = correct;
  return r;
}

// Agent that follows the reference solution then submits a fixed answer.
class FixedAnswerAgent : public Solver {
public:
  FixedAnswerAgent(SolutionFile solution, std::map<std::string, std::string> overrides)
      : inner_(std::move(solution)) {
    for (const auto& [k, v] : overrides) inner_.override_answer(k, v);
  }
  std::string id() const override { return "fixed"; }
  SolverTurn next(const Observation& o, const std::vector<TraceStep>& h) override { return inner_.next(o, h); }

private:
  ScriptedSolver inner_;
};

} // namespace

// ---- judging ---------------------------------------------------------------------

TEST(JudgeAnswer, NormalizesDirectAnswers) {
  EXPECT_EQ(normalize_answer("  $11,440.00 "), "11440.00");
  EXPECT_TRUE(direct_answer_equal("$11,440.00", "11440.00"));
  EXPECT_TRUE(direct_answer_equal("11440", "11440.00"));
  EXPECT_TRUE(direct_answer_equal("The  Grand HALL", "the grand hall"));
  EXPECT_FALSE(direct_answer_equal("11441", "11440.00"));
}

TEST(JudgeAnswer, CodesAreExact) {
  const std::map<std::string, std::string> gt = {{"code", "GEG-2026-05841"}};
  EXPECT_TRUE(judge_answer(AnswerType::OperationCode, {{"code", "GEG-2026-05841"}}, gt));
  EXPECT_FALSE(judge_answer(AnswerType::OperationCode, {{"code", "geg-2026-05841"}}, gt));
  EXPECT_FALSE(judge_answer(AnswerType::OperationCode, {{"code", " GEG-2026-05841"}}, gt));
}

TEST(JudgeAnswer, MixedUsesCodeFieldExactly) {
  const std::map<std::string, std::string> gt = {{"booking_code", "GEG-2026-05841"}, {"total_cost", "11440.00"}};
  EXPECT_TRUE(judge_answer(AnswerType::Mixed, {{"booking_code", "GEG-2026-05841"}, {"total_cost", "$11,440"}}, gt,
                           "booking_code"));
  EXPECT_FALSE(judge_answer(AnswerType::Mixed, {{"booking_code", "geg-2026-05841"}, {"total_cost", "11440"}}, gt,
                            "booking_code"));
}

TEST(JudgeAnswer, MissingFieldFails) {
  const std::map<std::string, std::string> gt = {{"a", "1"}, {"b", "2"}};
  EXPECT_FALSE(judge_answer(AnswerType::DirectAnswer, {{"a", "1"}}, gt));
  EXPECT_TRUE(judge_answer(AnswerType::DirectAnswer, {{"a", "1"}, {"b", "2"}, {"extra", "x"}}, gt));
}

TEST(JudgeAnswer, DirectEqualityIsSymmetric) {
  std::mt19937 rng(11);
  const std::vector<std::string> pool = {"11440.00", "$11,440", "11440", "1,144.0", "Grand Hall", "grand  hall",
                                         "€5",       "5.000",   "05",    "",        "1e3",        "1000"};
  for (int i = 0; i < 500; ++i) {
    const auto& a = pool[rng() % pool.size()];
    const auto& b = pool[rng() % pool.size()];
    EXPECT_EQ(direct_answer_equal(a, b), direct_answer_equal(b, a)) << a << " | " << b;
    EXPECT_TRUE(direct_answer_equal(a, a));
  }
}

// ---- records ---------------------------------------------------------------------

TEST(Results, JsonlRoundTrip) {
  auto rs = accuracy_results();
  rs.records.resize(20);
  rs.records[3].infrastructure_error = "browser crashed";
  rs.records[4].modality = Modality::DomOnly;
  rs.records[5].submitted_answer = {{"total_cost", "11440.00"}};
  const auto path = std::filesystem::temp_directory_path() / "forge_results_test.jsonl";
  write_results(path, rs.records);
  EXPECT_EQ(read_results(path), rs.records);
  std::filesystem::remove(path);
}

TEST(Results, RejectsNegativeActs) {
  json j = record("m", "t", true).to_json();
  j["acts"] = -1;
  EXPECT_THROW(EvaluationRecord::from_json(j), ParseError);
}

TEST(Results, DanglingTaskIsConfigError) {
  ResultSet rs;
  rs.records.push_back(record("m", "missing", true));
  EXPECT_THROW(rs.validate(), ConfigError);
  EXPECT_THROW(aggregate(rs), ConfigError);
}

// ---- aggregation -----------------------------------------------------------------

TEST(Aggregate, ReproducesPublishedTable) {
  const json expected = published("accuracy_expected.json");
  const ReportTables t = aggregate(accuracy_results());
  ASSERT_EQ(t.models.size(), expected.at("rows").size());
  for (std::size_t i = 0; i < t.models.size(); ++i) {
    const json& row = expected.at("rows")[i];
    EXPECT_EQ(t.models[i].model_id, row.at("model_id"));
    for (const auto& c : ReportTables::columns()) {
      EXPECT_EQ(t.models[i].rates.at(c)->render(1), row.at(c).get<std::string>()) << t.models[i].model_id << " " << c;
    }
  }
  for (const auto& c : ReportTables::columns()) {
    const auto& v = expected.at("average_value").at(c);
    EXPECT_EQ(*t.average.rates.at(c), util::Rational(v[0].get<long long>(), v[1].get<long long>())) << c;
    EXPECT_EQ(t.average.rates.at(c)->render(1), expected.at("published_average").at(c).get<std::string>()) << c;
  }
}

TEST(Aggregate, ExactModeMatchesOracle) {
  const json expected = published("accuracy_expected.json");
  const ReportTables t = aggregate(accuracy_results(), AverageMode::Exact);
  for (const auto& c : ReportTables::columns()) {
    const auto& v = expected.at("average_exact").at(c);
    EXPECT_EQ(*t.average.rates.at(c), util::Rational(v[0].get<long long>(), v[1].get<long long>())) << c;
  }
}

TEST(Aggregate, AllIsWeightedMeanOfLevels) {
  const ReportTables t = aggregate(accuracy_results());
  for (const auto& m : t.models) {
    long long correct = 0, total = 0;
    for (const char* l : {"L1", "L2", "L3"}) {
      correct += m.tallies.at(l).correct;
      total += m.tallies.at(l).total;
    }
    EXPECT_EQ(m.tallies.at("ALL").correct, correct);
    EXPECT_EQ(m.tallies.at("ALL").total, total);
    long long dcorrect = 0;
    for (int d = 1; d <= 7; ++d) dcorrect += m.tallies.at("D" + std::to_string(d)).correct;
    EXPECT_EQ(dcorrect, correct);
  }
}

TEST(Aggregate, SingleRecord) {
  ResultSet rs;
  rs.index["t"] = TaskIndexEntry{Domain::ConsumerTransaction, 2, {}};
  rs.records.push_back(record("m", "t", true));
  const ReportTables t = aggregate(rs);
  EXPECT_EQ(t.models.at(0).rates.at("L2")->render(1), "100.0");
  EXPECT_EQ(t.models.at(0).rates.at("ALL")->render(1), "100.0");
  EXPECT_FALSE(t.models.at(0).rates.at("L1").has_value());
  EXPECT_TRUE(util::contains(t.to_markdown(), "| m |"));
}

TEST(Aggregate, EmptyIsError) { EXPECT_THROW(aggregate(ResultSet{}), ConfigError); }

TEST(Aggregate, InfrastructureErrorsExcluded) {
  ResultSet rs;
  rs.index["a"] = TaskIndexEntry{Domain::ConsumerTransaction, 1, {}};
  rs.index["b"] = TaskIndexEntry{Domain::ConsumerTransaction, 1, {}};
  rs.records.push_back(record("m", "a", true));
  rs.records.push_back(record("m", "b", false));
  rs.records.back().infrastructure_error = "timeout";
  const ReportTables t = aggregate(rs);
  EXPECT_EQ(t.models.at(0).tallies.at("L1").total, 1);
  EXPECT_EQ(t.models.at(0).rates.at("L1")->render(1), "100.0");
}

TEST(Aggregate, RatesStayInRange) {
  std::mt19937 rng(5);
  for (int round = 0; round < 30; ++round) {
    ResultSet rs;
    for (int i = 0; i < 40; ++i) {
      const std::string id = "t" + std::to_string(i);
      rs.index[id] = TaskIndexEntry{kAllDomains[rng() % kAllDomains.size()], static_cast<int>(rng() % 3) + 1, {}};
      for (int m = 0; m < 3; ++m) rs.records.push_back(record("m" + std::to_string(m), id, rng() % 2 == 0));
    }
    const ReportTables t = aggregate(rs);
    for (const auto& m : t.models) {
      for (const auto& [c, r] : m.rates) {
        if (!r) continue;
        EXPECT_GE(r->to_double(), 0.0);
        EXPECT_LE(r->to_double(), 100.0);
      }
    }
  }
}

TEST(Aggregate, CsvHasHeaderAndAverage) {
  const std::string csv = aggregate(accuracy_results()).to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,L1,L2,L3,ALL,D1,D2,D3,D4,D5,D6,D7");
  EXPECT_TRUE(util::contains(csv, "Average,73.9,54.8,28.1,52.6,"));
}

// ---- per dimension ---------------------------------------------------------------

TEST(PerDimension, VisualComplexityRow) {
  const json j = published("visual_complexity.json");
  const json expected = published("visual_complexity_expected.json");
  ResultSet rs;
  for (const auto& t : j.at("tasks")) {
    TaskIndexEntry e;
    e.difficulty.set_level(Dimension::VisualComplexity, Level(t.at("visual_complexity").get<int>()));
    rs.index[t.at("task_id")] = e;
    rs.records.push_back(record(j.at("model_id"), t.at("task_id"), t.at("correct")));
  }
  const DimensionTable table = per_dimension_table(rs);
  ASSERT_EQ(table.models.size(), 1u);
  for (int l = 1; l <= 3; ++l) {
    EXPECT_EQ(table.models[0].rate(Dimension::VisualComplexity, l)->render(1),
              expected.at("L" + std::to_string(l)).get<std::string>());
  }
}

TEST(PerDimension, EmptyCellIsAbsent) {
  ResultSet rs;
  rs.index["t"] = TaskIndexEntry{};
  rs.records.push_back(record("m", "t", true));
  const DimensionTable table = per_dimension_table(rs);
  EXPECT_FALSE(table.models.at(0).rate(Dimension::RiskFactor, 3).has_value());
  EXPECT_EQ(table.models.at(0).rate(Dimension::RiskFactor, 1)->render(1), "100.0");
  EXPECT_TRUE(util::contains(table.to_markdown(), "-"));
}

// ---- solvability -----------------------------------------------------------------

TEST(Solvability, ReproducesPublishedCounts) {
  const json expected = published("solvability_expected.json");
  const SolvabilityReport s = solvability(solvability_results());
  EXPECT_EQ(s.models, 14);
  for (int l = 1; l <= 3; ++l) {
    const json& e = expected.at("levels").at("L" + std::to_string(l));
    EXPECT_EQ(s.by_level.at(l).correct, e.at("solved").get<long long>());
    EXPECT_EQ(s.by_level.at(l).total, e.at("tasks").get<long long>());
    EXPECT_EQ(s.by_level.at(l).rate()->render(1), e.at("rate").get<std::string>());
    EXPECT_EQ(s.mean_solvers.at(l).render(1), e.at("mean_solvers").get<std::string>());
  }
  EXPECT_EQ(s.overall.rate()->render(1), expected.at("overall").at("rate").get<std::string>());
}

TEST(Solvability, MonotoneInModels) {
  ResultSet all = solvability_results();
  ResultSet fewer = all;
  fewer.records.erase(std::remove_if(fewer.records.begin(), fewer.records.end(),
                                     [](const EvaluationRecord& r) { return r.model_id == "Gemini-3-Pro"; }),
                      fewer.records.end());
  const SolvabilityReport a = solvability(all);
  const SolvabilityReport b = solvability(fewer);
  EXPECT_GE(a.overall.correct, b.overall.correct);
  for (int l = 1; l <= 3; ++l) {
    EXPECT_GE(a.by_level.at(l).correct, b.by_level.at(l).correct);
    EXPECT_FALSE(a.mean_solvers.at(l) < b.mean_solvers.at(l));
  }
}

TEST(Solvability, SingleModelAllCorrect) {
  ResultSet rs;
  for (int i = 0; i < 6; ++i) {
    const std::string id = "t" + std::to_string(i);
    rs.index[id] = TaskIndexEntry{Domain::ConsumerTransaction, i % 3 + 1, {}};
    rs.records.push_back(record("m", id, true));
  }
  const SolvabilityReport s = solvability(rs);
  EXPECT_EQ(s.overall.rate()->render(1), "100.0");
  for (int l = 1; l <= 3; ++l) EXPECT_EQ(s.mean_solvers.at(l), util::Rational(1));
  EXPECT_THROW(solvability(ResultSet{}), ConfigError);
}

// ---- rank correlation ------------------------------------------------------------

TEST(Spearman, MatchesOracle) {
  std::vector<DifficultyVector> annotations;
  const json input = published("spearman.json");
  for (const auto& a : input.at("annotations")) {
    annotations.emplace_back(a.get<std::array<int, kDimensionCount>>());
  }
  const json expected = published("spearman_expected.json").at("rho");
  const SpearmanMatrix m = spearman_matrix(annotations);
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    for (std::size_t k = 0; k < kDimensionCount; ++k) {
      ASSERT_TRUE(m.rho[i][k].has_value());
      EXPECT_NEAR(*m.rho[i][k], expected[i][k].get<double>(), 1e-12) << i << "," << k;
    }
  }
}

TEST(Spearman, IdenticalAndReversed) {
  const std::vector<double> x = {1, 3, 2, 5, 4, 4};
  std::vector<double> rev;
  for (double v : x) rev.push_back(-v);
  EXPECT_EQ(*spearman(x, x), 1.0);
  EXPECT_EQ(*spearman(x, rev), -1.0);
}

TEST(Spearman, ZeroVarianceUndefined) {
  EXPECT_FALSE(spearman({1, 2, 3}, {2, 2, 2}).has_value());
  EXPECT_FALSE(spearman({1}, {1}).has_value());
  EXPECT_THROW(spearman_matrix({DifficultyVector{}, DifficultyVector{}}), ConfigError);
  const SpearmanMatrix m = spearman_matrix({DifficultyVector::uniform(1), DifficultyVector::uniform(2),
                                            DifficultyVector::uniform(3)});
  EXPECT_TRUE(m.rho[0][1].has_value());
  EXPECT_NEAR(*m.rho[0][1], 1.0, 1e-12);
}

TEST(Spearman, AverageRanks) {
  EXPECT_EQ(average_ranks({10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Spearman, BoundedAndSymmetric) {
  std::mt19937 rng(3);
  for (int round = 0; round < 200; ++round) {
    std::vector<double> a, b;
    for (int i = 0; i < 8; ++i) {
      a.push_back(static_cast<double>(rng() % 4));
      b.push_back(static_cast<double>(rng() % 4));
    }
    const auto ab = spearman(a, b);
    const auto ba = spearman(b, a);
    ASSERT_EQ(ab.has_value(), ba.has_value());
    if (!ab) continue;
    EXPECT_NEAR(*ab, *ba, 1e-12);
    EXPECT_LE(std::fabs(*ab), 1.0 + 1e-12);
  }
}

// ---- runtime ---------------------------------------------------------------------

TEST(Runtime, PerLevelMeans) {
  const json expected = published("accuracy_expected.json").at("runtime");
  const RuntimeReport r = runtime_report(accuracy_results());
  ASSERT_EQ(r.models.size(), 14u);
  for (const auto& row : r.models) {
    for (int l = 1; l <= 3; ++l) {
      const json& e = expected.at(row.model_id).at("L" + std::to_string(l));
      const RuntimeCell& c = row.by_level.at(l);
      EXPECT_EQ(c.turns.render(1), e.at("turns").get<std::string>()) << row.model_id;
      EXPECT_EQ(c.acts.render(1), e.at("acts").get<std::string>()) << row.model_id;
      EXPECT_EQ(c.prompt_k.render(1), e.at("prompt_tokens").get<std::string>()) << row.model_id;
      EXPECT_EQ(c.completion_k.render(1), e.at("completion_tokens").get<std::string>()) << row.model_id;
    }
  }
  const auto& gemini = r.models.at(0);
  EXPECT_EQ(gemini.model_id, "Gemini-3-Pro");
  EXPECT_EQ(gemini.by_level.at(1).turns.render(1), "7.9");
  EXPECT_EQ(gemini.by_level.at(1).acts.render(1), "12.2");
}

TEST(Runtime, DaggerMarksMissingStepLogging) {
  const std::string md = runtime_report(accuracy_results()).to_markdown();
  EXPECT_TRUE(util::contains(md, "GPT-5.2†"));
  EXPECT_FALSE(util::contains(md, "Gemini-3-Pro†"));
}

TEST(Runtime, SingleRecord) {
  ResultSet rs;
  rs.index["t"] = TaskIndexEntry{Domain::ConsumerTransaction, 3, {}};
  auto r = record("m", "t", false);
  r.turns = 4;
  r.acts = 6;
  r.prompt_tokens = 2500;
  rs.records.push_back(r);
  const RuntimeReport rep = runtime_report(rs);
  const RuntimeCell& c = rep.models.at(0).by_level.at(3);
  EXPECT_EQ(c.tasks, 1);
  EXPECT_EQ(c.turns.render(1), "4.0");
  EXPECT_EQ(c.acts.render(1), "6.0");
  EXPECT_EQ(c.prompt_k.render(1), "2.5");
  EXPECT_EQ(rep.models.at(0).by_level.count(1), 0u);
}

// ---- evaluation ------------------------------------------------------------------

TEST(Evaluate, ReferenceAgentIsCorrect) {
  SimulatedBrowser browser(refined());
  ScriptedSolver agent(refined().solution);
  const EvaluationRecord r = evaluate_task(refined(), browser, agent);
  EXPECT_TRUE(r.correct) << r.to_json().dump();
  EXPECT_GT(r.acts, 0);
  EXPECT_LE(r.acts, kMaxSolutionSteps);
  EXPECT_EQ(r.task_id, refined().task.task_id);
}

TEST(Evaluate, WrongCodeIsIncorrect) {
  const auto gt = decoded_ground_truth(refined().answer);
  const std::string code_field = refined().answer.code_field;
  ASSERT_FALSE(code_field.empty());
  SimulatedBrowser browser(refined());
  FixedAnswerAgent agent(refined().solution, {{code_field, "GEG-2026-05842"}});
  const EvaluationRecord r = evaluate_task(refined(), browser, agent);
  EXPECT_FALSE(r.correct);
  EXPECT_EQ(r.submitted_answer.at(code_field), "GEG-2026-05842");
  EXPECT_NE(gt.at(code_field), "GEG-2026-05842");
}

TEST(Evaluate, ZeroBudget) {
  SimulatedBrowser browser(refined());
  ScriptedSolver agent(refined().solution);
  EvaluateOptions o;
  o.budget = 0;
  const EvaluationRecord r = evaluate_task(refined(), browser, agent, o);
  EXPECT_FALSE(r.correct);
  EXPECT_EQ(r.acts, 0);
}

TEST(Evaluate, DomOnlyHasNoScreenshots) {
  class Probe : public Solver {
  public:
    explicit Probe(SolutionFile s) : inner_(std::move(s)) {}
    std::string id() const override { return "probe"; }
    SolverTurn next(const Observation& o, const std::vector<TraceStep>& h) override {
      saw_screenshot = saw_screenshot || o.screenshot.has_value();
      return inner_.next(o, h);
    }
    bool saw_screenshot = false;

  private:
    ScriptedSolver inner_;
  };
  SimulatedBrowser browser(refined());
  Probe agent(refined().solution);
  EvaluateOptions o;
  o.modality = Modality::DomOnly;
  const EvaluationRecord r = evaluate_task(refined(), browser, agent, o);
  EXPECT_FALSE(agent.saw_screenshot);
  EXPECT_EQ(r.modality, Modality::DomOnly);
  EXPECT_TRUE(r.correct);
}
