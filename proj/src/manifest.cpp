#include "forge/manifest.hpp"

#include "forge/errors.hpp"

namespace forge {

using nlohmann::json;

CellCount PassRateTable::cell(Domain d, int level) const {
  auto it = cells.find({d, level});
  return it == cells.end() ? CellCount{} : it->second;
}

CellCount PassRateTable::domain_total(Domain d) const {
  CellCount out;
  for (const auto& [key, c] : cells) {
    if (key.first != d) continue;
    out.attempted += c.attempted;
    out.passed += c.passed;
  }
  return out;
}

CellCount PassRateTable::level_total(int level) const {
  CellCount out;
  for (const auto& [key, c] : cells) {
    if (key.second != level) continue;
    out.attempted += c.attempted;
    out.passed += c.passed;
  }
  return out;
}

CellCount PassRateTable::overall() const {
  CellCount out;
  for (const auto& [key, c] : cells) {
    out.attempted += c.attempted;
    out.passed += c.passed;
  }
  return out;
}

util::Rational PassRateTable::rate(const CellCount& c) {
  if (c.attempted == 0) throw ConfigError("pass rate of an empty cell");
  return util::Rational::percent(c.passed, c.attempted);
}

std::string PassRateTable::render(const CellCount& c) {
  return c.attempted == 0 ? "-" : rate(c).render(1);
}

json PassRateTable::to_json() const {
  json cellsj = json::array();
  for (const auto& [key, c] : cells) {
    cellsj.push_back({{"domain", domain_code(key.first)},
                      {"level", key.second},
                      {"attempted", c.attempted},
                      {"passed", c.passed},
                      {"rate", render(c)}});
  }
  const CellCount all = overall();
  return {{"cells", cellsj}, {"overall", {{"attempted", all.attempted}, {"passed", all.passed}, {"rate", render(all)}}}};
}

std::string PassRateTable::to_markdown() const {
  std::string out = "| Domain | L1 | L2 | L3 | Total |\n| --- | ---: | ---: | ---: | ---: |\n";
  auto fmt = [](const CellCount& c) {
    if (c.attempted == 0) return std::string("-");
    return std::to_string(c.passed) + "/" + std::to_string(c.attempted) + " (" + render(c) + "%)";
  };
  for (Domain d : kAllDomains) {
    if (domain_total(d).attempted == 0) continue;
    out += "| " + domain_code(d) + " | " + fmt(cell(d, 1)) + " | " + fmt(cell(d, 2)) + " | " + fmt(cell(d, 3)) + " | " +
           fmt(domain_total(d)) + " |\n";
  }
  out += "| Total | " + fmt(level_total(1)) + " | " + fmt(level_total(2)) + " | " + fmt(level_total(3)) + " | " +
         fmt(overall()) + " |\n";
  return out;
}

std::map<std::pair<Domain, int>, long long> BenchmarkManifest::counts() const {
  std::map<std::pair<Domain, int>, long long> out;
  for (const auto& t : tasks) out[{t.domain, t.level}] += 1;
  return out;
}

namespace {

json manifest_body(const BenchmarkManifest& m) {
  json tasks = json::array();
  for (const auto& t : m.tasks) {
    tasks.push_back({{"task_id", t.task_id},
                     {"domain", domain_code(t.domain)},
                     {"level", t.level},
                     {"difficulty", to_json(t.difficulty)},
                     {"bundle_path", t.bundle_path},
                     {"verdict_digest", t.verdict_digest}});
  }
  json counts = json::array();
  for (const auto& [key, n] : m.counts()) {
    counts.push_back({{"domain", domain_code(key.first)}, {"level", key.second}, {"tasks", n}});
  }
  return {{"benchmark_id", m.benchmark_id}, {"tasks", tasks}, {"counts", counts}, {"pass_rates", m.pass_rates.to_json()}};
}

Domain domain_field(const json& j) {
  const auto d = domain_from_string(j.at("domain").get<std::string>());
  if (!d) throw ParseError("unknown domain '" + j.at("domain").get<std::string>() + "'");
  return *d;
}

} // namespace

json BenchmarkManifest::to_json() const {
  json j = manifest_body(*this);
  j["created_at"] = created_at;
  return j;
}

BenchmarkManifest BenchmarkManifest::from_json(const json& j) {
  BenchmarkManifest m;
  try {
    m.benchmark_id = j.at("benchmark_id").get<std::string>();
    m.created_at = j.value("created_at", "");
    for (const auto& t : j.at("tasks")) {
      ManifestTask task;
      task.task_id = t.at("task_id").get<std::string>();
      task.domain = domain_field(t);
      task.level = t.at("level").get<int>();
      task.difficulty = difficulty_from_json(t.at("difficulty"));
      task.bundle_path = t.value("bundle_path", "");
      task.verdict_digest = t.at("verdict_digest").get<std::string>();
      if (task.verdict_digest.empty()) throw ParseError("task " + task.task_id + " has no verdict digest");
      m.tasks.push_back(std::move(task));
    }
    if (j.contains("pass_rates")) {
      for (const auto& c : j.at("pass_rates").value("cells", json::array())) {
        m.pass_rates.cells[{domain_field(c), c.at("level").get<int>()}] = {c.at("attempted").get<long long>(),
                                                                           c.at("passed").get<long long>()};
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  std::sort(m.tasks.begin(), m.tasks.end(), [](const ManifestTask& a, const ManifestTask& b) { return a.task_id < b.task_id; });
  return m;
}

std::string BenchmarkManifest::digest() const { return util::sha256_hex(manifest_body(*this).dump()); }

} // namespace forge
