#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/blueprint.hpp"
#include "forge/difficulty.hpp"
#include "forge/util.hpp"

namespace forge {

struct ManifestTask {
  std::string task_id;
  Domain domain = Domain::ConsumerTransaction;
  int level = 1;
  DifficultyVector difficulty;
  std::string bundle_path;  // relative to the benchmark directory
  std::string verdict_digest;
};

struct CellCount {
  long long attempted = 0;
  long long passed = 0;
};

// Attempts and passes per (domain, level). Rates are exact and render to one
// decimal, half-up.
struct PassRateTable {
  std::map<std::pair<Domain, int>, CellCount> cells;

  CellCount cell(Domain d, int level) const;
  CellCount domain_total(Domain d) const;
  CellCount level_total(int level) const;
  CellCount overall() const;

  static util::Rational rate(const CellCount& c);
  static std::string render(const CellCount& c);  // "88.9", or "-" when nothing was attempted

  nlohmann::json to_json() const;
  // Markdown table in the domain x level layout with a Total column and row.
  std::string to_markdown() const;
};

struct BenchmarkManifest {
  std::string benchmark_id;
  std::vector<ManifestTask> tasks;  // solvable tasks only, sorted by task_id
  PassRateTable pass_rates;
  std::string created_at;

  // Tasks per (domain, level) as listed.
  std::map<std::pair<Domain, int>, long long> counts() const;

  nlohmann::json to_json() const;
  static BenchmarkManifest from_json(const nlohmann::json& j);
  // sha256 over the canonical JSON without created_at.
  std::string digest() const;
};

} // namespace forge
