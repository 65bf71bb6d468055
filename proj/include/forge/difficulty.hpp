#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forge/util.hpp"

namespace forge {

// The seven difficulty axes, in their canonical table order.
enum class Dimension {
  JumpDepth,
  JumpBreadth,
  PageInteraction,
  VisualComplexity,
  InfoComplexity,
  ReasoningCalc,
  RiskFactor,
};

inline constexpr std::size_t kDimensionCount = 7;

inline constexpr std::array<Dimension, kDimensionCount> kAllDimensions = {
    Dimension::JumpDepth,      Dimension::JumpBreadth,   Dimension::PageInteraction,
    Dimension::VisualComplexity, Dimension::InfoComplexity, Dimension::ReasoningCalc,
    Dimension::RiskFactor,
};

// snake_case wire name, e.g. "jump_depth".
std::string_view dimension_key(Dimension d);
// Human label, e.g. "Jump Depth".
std::string_view dimension_label(Dimension d);
std::optional<Dimension> dimension_from_key(std::string_view key);
constexpr std::size_t dimension_index(Dimension d) { return static_cast<std::size_t>(d); }

// A level in {1,2,3}. Construction outside that range throws.
class Level {
public:
  explicit Level(int value);
  int value() const noexcept { return value_; }
  auto operator<=>(const Level&) const = default;

private:
  int value_;
};

using DimLevel = Level;
using OverallLevel = Level;

class DifficultyVector {
public:
  DifficultyVector();  // all dimensions at L1
  explicit DifficultyVector(const std::array<int, kDimensionCount>& levels);

  static DifficultyVector uniform(int level);

  Level level(Dimension d) const { return Level(levels_[dimension_index(d)]); }
  void set_level(Dimension d, Level l) { levels_[dimension_index(d)] = l.value(); }

  const std::string& justification(Dimension d) const {
    return justifications_[dimension_index(d)];
  }
  void set_justification(Dimension d, std::string text) {
    justifications_[dimension_index(d)] = std::move(text);
  }

  // Number of dimensions sitting at the given level.
  int count_at(int level) const;
  const std::array<int, kDimensionCount>& levels() const noexcept { return levels_; }

  bool operator==(const DifficultyVector&) const = default;

private:
  std::array<int, kDimensionCount> levels_{};
  std::array<std::string, kDimensionCount> justifications_{};
};

// Compositional rule for a target overall level:
//   L1: at most 2 dims at L2, none at L3
//   L2: at least 2 dims at L2, at most 1 at L3
//   L3: at least 2 dims at L3 and at least 2 at L2
bool check_composition(OverallLevel level, const DifficultyVector& vector);

// Every overall level whose rule the vector satisfies. The rules overlap
// (exactly two L2 and no L3 satisfies both L1 and L2) and leave some vectors
// with no admissible level at all (e.g. all L3).
std::set<int> admissible_levels(const DifficultyVector& vector);

struct DistributionCell {
  long long count = 0;
  std::string percent;  // one decimal, half-up
};

// rows: dimension (canonical order); columns: level 1..3
struct DistributionTable {
  long long total = 0;
  std::array<std::array<DistributionCell, 3>, kDimensionCount> cells{};

  const DistributionCell& at(Dimension d, int level) const {
    return cells[dimension_index(d)][static_cast<std::size_t>(level - 1)];
  }
};

// Throws forge::Error on an empty input.
DistributionTable dimension_distribution(const std::vector<DifficultyVector>& vectors);

// Per-dimension accuracy (percent) keyed by level 1..3. Missing cells are absent.
using PerDimensionAccuracy = std::map<Dimension, std::map<int, util::Rational>>;

struct AccuracyDrop {
  util::Rational delta;   // acc(L1) - acc(L3), percentage points, exact
  std::string rendered;   // one decimal
};

// Throws forge::Error naming the dimension when its L1 or L3 cell is missing.
std::map<Dimension, AccuracyDrop> accuracy_drop(const PerDimensionAccuracy& table);

// {"jump_depth": {"level": 3, "justification": "..."}, ...}
nlohmann::json to_json(const DifficultyVector& v);
DifficultyVector difficulty_from_json(const nlohmann::json& j);

} // namespace forge
