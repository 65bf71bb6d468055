#include "forge/difficulty.hpp"

#include "forge/errors.hpp"
#include "forge/util.hpp"

namespace forge {

namespace {

struct DimensionNames {
  Dimension dim;
  std::string_view key;
  std::string_view label;
};

constexpr std::array<DimensionNames, kDimensionCount> kNames = {{
    {Dimension::JumpDepth, "jump_depth", "Jump Depth"},
    {Dimension::JumpBreadth, "jump_breadth", "Jump Breadth"},
    {Dimension::PageInteraction, "page_interaction", "Page Interaction"},
    {Dimension::VisualComplexity, "visual_complexity", "Visual Complexity"},
    {Dimension::InfoComplexity, "info_complexity", "Info Complexity"},
    {Dimension::ReasoningCalc, "reasoning_calc", "Reasoning/Calc"},
    {Dimension::RiskFactor, "risk_factor", "Risk Factor"},
}};

void require_level(int value) {
  if (value < 1 || value > 3) {
    throw Error("difficulty level out of range {1,2,3}: " + std::to_string(value));
  }
}

} // namespace

std::string_view dimension_key(Dimension d) { return kNames[dimension_index(d)].key; }

std::string_view dimension_label(Dimension d) { return kNames[dimension_index(d)].label; }

std::optional<Dimension> dimension_from_key(std::string_view key) {
  for (const auto& n : kNames) {
    if (n.key == key) return n.dim;
  }
  return std::nullopt;
}

Level::Level(int value) : value_(value) { require_level(value); }

DifficultyVector::DifficultyVector() { levels_.fill(1); }

DifficultyVector::DifficultyVector(const std::array<int, kDimensionCount>& levels)
    : levels_(levels) {
  for (int l : levels_) require_level(l);
}

DifficultyVector DifficultyVector::uniform(int level) {
  require_level(level);
  std::array<int, kDimensionCount> a{};
  a.fill(level);
  return DifficultyVector(a);
}

int DifficultyVector::count_at(int level) const {
  int n = 0;
  for (int l : levels_) n += (l == level);
  return n;
}

bool check_composition(OverallLevel level, const DifficultyVector& vector) {
  const int at2 = vector.count_at(2);
  const int at3 = vector.count_at(3);
  switch (level.value()) {
  case 1:
    return at2 <= 2 && at3 == 0;
  case 2:
    return at2 >= 2 && at3 <= 1;
  default:
    return at3 >= 2 && at2 >= 2;
  }
}

std::set<int> admissible_levels(const DifficultyVector& vector) {
  std::set<int> out;
  for (int l = 1; l <= 3; ++l) {
    if (check_composition(Level(l), vector)) out.insert(l);
  }
  return out;
}

DistributionTable dimension_distribution(const std::vector<DifficultyVector>& vectors) {
  if (vectors.empty()) {
    throw Error("dimension distribution of an empty annotation set is undefined");
  }
  DistributionTable t;
  t.total = static_cast<long long>(vectors.size());
  for (const auto& v : vectors) {
    for (Dimension d : kAllDimensions) {
      ++t.cells[dimension_index(d)][static_cast<std::size_t>(v.level(d).value() - 1)].count;
    }
  }
  for (auto& row : t.cells) {
    for (auto& cell : row) cell.percent = util::percent_1dp(cell.count, t.total);
  }
  return t;
}

std::map<Dimension, AccuracyDrop> accuracy_drop(const PerDimensionAccuracy& table) {
  std::map<Dimension, AccuracyDrop> out;
  for (Dimension d : kAllDimensions) {
    auto row = table.find(d);
    if (row == table.end() || !row->second.contains(1) || !row->second.contains(3)) {
      throw Error("accuracy table is missing the L1 or L3 cell for dimension " +
                  std::string(dimension_key(d)));
    }
    AccuracyDrop drop;
    drop.delta = row->second.at(1) - row->second.at(3);
    drop.rendered = drop.delta.render(1);
    out.emplace(d, drop);
  }
  return out;
}

nlohmann::json to_json(const DifficultyVector& v) {
  nlohmann::json j = nlohmann::json::object();
  for (Dimension d : kAllDimensions) {
    nlohmann::json cell = {{"level", v.level(d).value()}};
    if (!v.justification(d).empty()) cell["justification"] = v.justification(d);
    j[std::string(dimension_key(d))] = cell;
  }
  return j;
}

DifficultyVector difficulty_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ParseError("difficulty configuration must be an object");
  }
  DifficultyVector v;
  std::size_t seen = 0;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto d = dimension_from_key(it.key());
    if (!d) throw ParseError("unknown difficulty dimension: " + it.key());
    const auto& cell = it.value();
    int level = 0;
    if (cell.is_number_integer()) {
      level = cell.get<int>();
    } else if (cell.is_object() && cell.contains("level") && cell["level"].is_number_integer()) {
      level = cell["level"].get<int>();
      if (cell.contains("justification") && cell["justification"].is_string()) {
        v.set_justification(*d, cell["justification"].get<std::string>());
      }
    } else {
      throw ParseError("difficulty entry for " + it.key() + " has no integer level");
    }
    if (level < 1 || level > 3) {
      throw ParseError("difficulty level out of range for " + it.key());
    }
    v.set_level(*d, Level(level));
    ++seen;
  }
  if (seen != kDimensionCount) {
    throw ParseError("difficulty configuration must list all 7 dimensions exactly once");
  }
  return v;
}

} // namespace forge
