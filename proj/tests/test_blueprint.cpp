#include <gtest/gtest.h>

#include "forge/blueprint.hpp"
#include "forge/errors.hpp"
#include "forge/util.hpp"

#include <random>

using namespace forge;

namespace {

std::string fixture(const std::string& name) {
  return util::read_file(std::string(FORGE_FIXTURE_DIR) + "/" + name);
}

std::shared_ptr<ScriptedProvider> wedding_provider() {
  auto p = std::make_shared<ScriptedProvider>("mock");
  p->add("draft:", fixture("wedding/draft.md"));
  p->add("refine:", fixture("wedding/refined.md"));
  return p;
}

std::string random_word(std::mt19937& rng) {
  static const char* kWords[] = {"venue", "price", "tier", "\"quoted\"", "caf\xC3\xA9", "80", "$3,200",
                                 "line\nbreak", "tab\there", "rose", "", "May 16"};
  return kWords[rng() % 12];
}

TaskBlueprint random_blueprint(std::mt19937& rng) {
  TaskBlueprint bp;
  bp.title = random_word(rng) + " " + random_word(rng);
  bp.user_query = "query " + random_word(rng);
  bp.domain = kAllDomains[rng() % 7];
  std::array<int, 7> lv{};
  for (int& x : lv) x = 1 + static_cast<int>(rng() % 3);
  bp.difficulty = DifficultyVector(lv);
  if (rng() % 2) bp.difficulty.set_justification(Dimension::RiskFactor, random_word(rng));
  bp.overall_level = 1 + static_cast<int>(rng() % 3);
  const int pages = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < pages; ++i) {
    PageDesign p;
    p.page_id = "p" + std::to_string(i);
    p.route = "/r" + std::to_string(i);
    p.purpose = random_word(rng);
    p.key_content = random_word(rng);
    for (unsigned k = 0; k < rng() % 3; ++k) p.distractors.push_back(random_word(rng));
    bp.pages.push_back(p);
  }
  const int steps = 1 + static_cast<int>(rng() % 20);
  for (int i = 1; i <= steps; ++i) {
    bp.solution.push_back({i, random_word(rng), static_cast<StepKind>(rng() % 8)});
  }
  bp.answer.answer_type = static_cast<AnswerType>(rng() % 3);
  bp.answer.ground_truth_fields["code"] = "X-" + std::to_string(rng() % 1000);
  bp.answer.ground_truth_fields["total"] = std::to_string(rng() % 100000) + ".00";
  if (bp.answer.answer_type != AnswerType::DirectAnswer) bp.answer.code_fields = {"code"};
  if (rng() % 2) bp.answer.grading_tiers.push_back({random_word(rng), 0.5});
  bp.qa_notes = random_word(rng);
  return bp;
}

} // namespace

TEST(ParseBlueprint, WeddingDraft) {
  const auto bp = parse_blueprint(fixture("wedding/draft.md"));
  EXPECT_EQ(bp.pages.size(), 7u);
  EXPECT_EQ(bp.answer.answer_type, AnswerType::Mixed);
  EXPECT_EQ(bp.answer.ground_truth_fields.at("total_cost"), "10300.00");
  EXPECT_EQ(bp.difficulty.level(Dimension::JumpBreadth).value(), 1);
}

TEST(ParseBlueprint, WeddingRefinedHasSeventeenSteps) {
  const auto bp = parse_blueprint(fixture("wedding/refined.md"));
  EXPECT_EQ(bp.solution.size(), 17u);
  EXPECT_EQ(bp.pages.size(), 8u);
  EXPECT_TRUE(check_composition(Level(3), bp.difficulty));
  EXPECT_EQ(bp.difficulty.count_at(3), 3);
  EXPECT_EQ(bp.difficulty.count_at(2), 4);
}

TEST(ParseBlueprint, MissingSectionsNamed) {
  auto j = to_json(parse_blueprint(fixture("wedding/refined.md")));
  j.erase("difficulty");
  try {
    blueprint_from_json(j);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_STREQ(e.what(), "difficulty configuration missing");
  }
  EXPECT_THROW(parse_blueprint("no fence here"), ParseError);
  EXPECT_THROW(parse_blueprint("```json\n{not json}\n```\n"), ParseError);
}

TEST(ParseBlueprint, RejectsInvariantViolations) {
  const auto base = to_json(parse_blueprint(fixture("wedding/refined.md")));
  auto dup = base;
  dup["pages"][1]["route"] = "/";
  EXPECT_THROW(blueprint_from_json(dup), ParseError);
  auto gap = base;
  gap["solution"][3]["ordinal"] = 9;
  EXPECT_THROW(blueprint_from_json(gap), ParseError);
  auto credit = base;
  credit["answer"]["grading_tiers"][0]["credit"] = 1.5;
  EXPECT_THROW(blueprint_from_json(credit), ParseError);
  auto mixed = base;
  mixed["answer"]["ground_truth_fields"] = {{"confirmation_code", "X"}};
  EXPECT_THROW(blueprint_from_json(mixed), ParseError);
}

TEST(ParseBlueprint, RoundTripProperty) {
  std::mt19937 rng(50);
  for (int i = 0; i < 50; ++i) {
    const auto bp = random_blueprint(rng);
    const std::string text = serialize_blueprint(bp);
    const auto back = parse_blueprint(text);
    EXPECT_EQ(back, bp);
    EXPECT_EQ(serialize_blueprint(back), text);
  }
}

TEST(DraftPlan, WeddingDraftRecordsComposition) {
  const auto r = draft_plan(Domain::ConsumerTransaction, 3,
                            ProviderProfile::creative(wedding_provider()));
  EXPECT_EQ(r.blueprint.pages.size(), 7u);
  EXPECT_TRUE(r.composition_ok);
  EXPECT_EQ(r.attempts, 1);
}

TEST(DraftPlan, MinimalLookupPlanAtLevelOne) {
  auto p = std::make_shared<ScriptedProvider>("mock");
  p->add("draft:info_retrieval:1", fixture("library/plan.md"));
  const auto r = draft_plan(Domain::InfoRetrieval, 1, ProviderProfile::creative(p));
  EXPECT_EQ(r.blueprint.difficulty, DifficultyVector::uniform(1));
  EXPECT_EQ(admissible_levels(r.blueprint.difficulty), (std::set<int>{1}));
}

TEST(DraftPlan, EmptyOutputIsGenerationError) {
  auto p = std::make_shared<ScriptedProvider>("mock");
  p->add("draft:", "");
  try {
    draft_plan(Domain::ToolUsage, 2, ProviderProfile::creative(p));
    FAIL();
  } catch (const GenerationError& e) {
    EXPECT_EQ(e.raw_text(), "");
    EXPECT_EQ(p->calls(), 3u);
  }
}

TEST(DraftPlan, RoleChecked) {
  EXPECT_THROW(draft_plan(Domain::ToolUsage, 2, ProviderProfile::precision(wedding_provider())),
               ConfigError);
  EXPECT_DOUBLE_EQ(ProviderProfile::creative(wedding_provider()).temperature, 2.0);
  EXPECT_DOUBLE_EQ(ProviderProfile::precision(wedding_provider()).temperature, 1.0);
}

TEST(RefinePlan, WeddingDraftToRefined) {
  auto provider = wedding_provider();
  const auto draft = draft_plan(Domain::ConsumerTransaction, 3, ProviderProfile::creative(provider));
  const auto r = refine_plan(draft.blueprint, ProviderProfile::precision(provider));
  EXPECT_EQ(r.blueprint.pages.size(), 8u);
  EXPECT_EQ(r.blueprint.answer.ground_truth_fields.at("total_cost"), "11440.00");
  EXPECT_EQ(r.blueprint.difficulty.level(Dimension::JumpBreadth).value(), 2);
  EXPECT_TRUE(check_composition(Level(3), r.blueprint.difficulty));
  EXPECT_GT(r.modification_ratio, 0.0);
  EXPECT_LE(r.modification_ratio, 1.0);
}

TEST(RefinePlan, IdentityRefinementWarns) {
  const auto bp = parse_blueprint(fixture("wedding/refined.md"));
  auto p = std::make_shared<ScriptedProvider>("mock");
  p->add("refine:", serialize_blueprint(bp));
  const auto r = refine_plan(bp, ProviderProfile::precision(p));
  EXPECT_EQ(r.blueprint, bp);
  EXPECT_EQ(r.modification_ratio, 0.0);
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(RefinePlan, PersistentCompositionViolationFails) {
  auto bad = parse_blueprint(fixture("wedding/refined.md"));
  bad.difficulty = DifficultyVector({3, 1, 1, 1, 1, 1, 1});
  auto p = std::make_shared<ScriptedProvider>("mock");
  p->add("refine:", serialize_blueprint(bad));
  EXPECT_THROW(refine_plan(parse_blueprint(fixture("wedding/draft.md")), ProviderProfile::precision(p)),
               PipelineError);
  EXPECT_EQ(p->calls(), 3u);
}

TEST(RefinePlan, RetryRecoversFromOneViolation) {
  auto bad = parse_blueprint(fixture("wedding/refined.md"));
  bad.difficulty = DifficultyVector({3, 1, 1, 1, 1, 1, 1});
  auto p = std::make_shared<ScriptedProvider>("mock");
  p->add("refine:", serialize_blueprint(bad));
  p->add("refine:", fixture("wedding/refined.md"));
  const auto r = refine_plan(parse_blueprint(fixture("wedding/draft.md")), ProviderProfile::precision(p));
  EXPECT_EQ(r.attempts, 2);
}

TEST(ModificationRatio, IdentityAndSymmetry) {
  std::mt19937 rng(9);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_blueprint(rng);
    const auto b = random_blueprint(rng);
    EXPECT_EQ(modification_ratio(a, a), 0.0);
    EXPECT_DOUBLE_EQ(modification_ratio(a, b), modification_ratio(b, a));
  }
}

TEST(Pipeline, DraftRefineIsByteDeterministic) {
  auto once = [] {
    auto p = wedding_provider();
    const auto d = draft_plan(Domain::ConsumerTransaction, 3, ProviderProfile::creative(p));
    const auto r = refine_plan(d.blueprint, ProviderProfile::precision(p));
    return serialize_blueprint(d.blueprint) + serialize_blueprint(r.blueprint) +
           util::fixed(r.modification_ratio, 12);
  };
  EXPECT_EQ(once(), once());
}

TEST(Providers, KeyValueFileAndEnvNames) {
  const auto kv = parse_key_value_file("# c\n[planner]\nkind = \"scripted\"\ntemperature = 2.0 # hot\n");
  EXPECT_EQ(kv.at("planner").at("kind"), "scripted");
  EXPECT_EQ(kv.at("planner").at("temperature"), 2.0);
  EXPECT_EQ(provider_key_env("gemini-3.pro"), "FORGE_PROVIDER_GEMINI_3_PRO_KEY");
  EXPECT_THROW(parse_key_value_file("[x\n"), ConfigError);
}
