// Acceptance gate: one PASS/FAIL line per primary criterion, then secondary checks.
// Exit status is nonzero when any primary criterion fails.

#include "forge/bundle.hpp"
#include "forge/codec.hpp"
#include "forge/difficulty.hpp"
#include "forge/harness.hpp"
#include "forge/refinement.hpp"
#include "forge/util.hpp"
#include "forge/validation.hpp"
#include "forge/workbench.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>
#include <unistd.h>

using namespace forge;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kDifficultySeconds = 1.0;
constexpr int kBase64Trials = 10000;
constexpr double kAverageTolerance = 0.05;
constexpr double kSpearmanTolerance = 1e-12;
constexpr double kPipelineSeconds = 120.0;
constexpr int kPipelineMaxSteps = 50;

const fs::path kFixtures = FORGE_FIXTURE_DIR;

std::string fixture(const std::string& name) { return util::read_file(kFixtures / name); }
json published(const std::string& name) { return json::parse(fixture("published/" + name)); }

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) detail << "; ";
      detail << what;
      ok = false;
    }
  }
};

struct Gate {
  int failed_primary = 0;

  void run(const std::string& name, bool primary, const std::function<void(Check&)>& body) {
    Check c;
    try {
      body(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("threw: ") + e.what());
    }
    if (!c.ok && primary) ++failed_primary;
    std::cout << (c.ok ? "PASS" : "FAIL") << "  " << (primary ? "[primary]   " : "[secondary] ") << name;
    const std::string d = c.detail.str();
    if (!d.empty()) std::cout << "  (" << d << ")";
    std::cout << std::endl;
  }
};

WebsiteBundle wedding_generated() {
  auto p = std::make_shared<ScriptedProvider>("mock");
  p->add("generate:", fixture("wedding/generation.md"));
  StubAssetProvider assets;
  return assemble_bundle(parse_blueprint(fixture("wedding/refined.md")), ProviderProfile::precision(p), assets,
                         "D1-L3-000");
}

const std::pair<WebsiteBundle, RefinementReport>& wedding_refined() {
  static const auto r = refine_bundle(wedding_generated(), NoiseConfig{});
  return r;
}

Verdict replay(const WebsiteBundle& bundle, Solver& solver, ReplayOptions options = {}) {
  SessionOptions so;
  so.seed = 7;
  SimulatedBrowser browser(bundle, so);
  browser.set_page_seed(7);
  return replay_solution(bundle, browser, solver, options);
}

// Composition rule written out independently of the library.
bool oracle_composition(int level, const std::array<int, kDimensionCount>& v) {
  int n2 = 0, n3 = 0;
  for (int x : v) {
    n2 += x == 2;
    n3 += x == 3;
  }
  if (level == 1) return n3 == 0 && n2 <= 2;
  if (level == 2) return n3 <= 1 && n2 >= 2;
  return n3 >= 2 && n2 >= 2;
}

// Textbook base64 for the oracle side of the round trip.
std::string oracle_base64(const std::string& in) {
  static const char* abc = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const unsigned n = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8) |
                       static_cast<unsigned char>(in[i + 2]);
    for (int s : {18, 12, 6, 0}) out += abc[(n >> s) & 63];
  }
  const std::size_t rest = in.size() - i;
  if (rest == 1) {
    const unsigned n = static_cast<unsigned char>(in[i]) << 16;
    out += abc[(n >> 18) & 63];
    out += abc[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const unsigned n = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8);
    out += abc[(n >> 18) & 63];
    out += abc[(n >> 12) & 63];
    out += abc[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

json booking(const std::string& date, int guests, const std::string& catering) {
  return {{"date", date}, {"guests", std::to_string(guests)}, {"catering", catering}, {"contact_name", "A"}};
}

ResultSet accuracy_results() {
  const json j = published("accuracy.json");
  ResultSet rs;
  std::vector<std::string> ids;
  for (const auto& t : j.at("tasks")) {
    const std::string id = t.at("task_id");
    ids.push_back(id);
    TaskIndexEntry e;
    e.domain = *domain_from_string(t.at("domain").get<std::string>());
    e.level = t.at("level");
    rs.index[id] = e;
  }
  for (const auto& m : j.at("models")) {
    const std::string bits = m.at("correct");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      EvaluationRecord r;
      r.model_id = m.at("model_id");
      r.task_id = ids[i];
      r.correct = bits[i] == '1';
      rs.records.push_back(std::move(r));
    }
  }
  return rs;
}

ResultSet solvability_results() {
  const json j = published("solvability.json");
  ResultSet rs;
  const auto models = j.at("models").get<std::vector<std::string>>();
  const json& tasks = j.at("tasks");
  for (const auto& t : tasks) {
    TaskIndexEntry e;
    e.level = t.at("level");
    rs.index[t.at("task_id").get<std::string>()] = e;
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (const auto& t : tasks) {
      EvaluationRecord r;
      r.model_id = models[m];
      r.task_id = t.at("task_id");
      r.correct = t.at("solvers").get<std::string>()[m] == '1';
      rs.records.push_back(std::move(r));
    }
  }
  return rs;
}

// Pass counts per (domain, level) out of 60 attempted.
const int kPassCounts[7][3] = {{39, 41, 35}, {39, 48, 38}, {43, 42, 46}, {53, 58, 49},
                               {41, 50, 40}, {42, 51, 48}, {44, 50, 37}};

std::vector<TaskVerdict> attempted_tasks() {
  std::vector<TaskVerdict> out;
  for (Domain d : kAllDomains) {
    for (int level = 1; level <= 3; ++level) {
      const int passed = kPassCounts[domain_index(d)][level - 1];
      for (int i = 0; i < 60; ++i) {
        TaskVerdict t;
        t.task_id = make_task_id(d, level, i);
        t.domain = d;
        t.level = level;
        t.difficulty = DifficultyVector::uniform(level);
        t.bundle_path = "tasks/" + t.task_id;
        Verdict v;
        v.solvable = i < passed;
        v.steps_used = 20;
        if (!v.solvable) v.failure_mode = FailureMode::GtMismatch;
        t.verdict = v;
        out.push_back(std::move(t));
      }
    }
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("forge_accept_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t count_matches(const std::string& text, const std::regex& re) {
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream o;
  o.precision(prec);
  o << std::fixed << v;
  return o.str();
}

} // namespace

int main() {
  Gate gate;

  gate.run("difficulty: composition rule over all 2187 vectors, reference vector at L3, under 1 s", true, [](Check& c) {
    const auto start = Clock::now();
    int mismatches = 0;
    for (int code = 0; code < 2187; ++code) {
      std::array<int, kDimensionCount> v{};
      int rest = code;
      for (auto& x : v) {
        x = rest % 3 + 1;
        rest /= 3;
      }
      const DifficultyVector dv(v);
      for (int level = 1; level <= 3; ++level) {
        if (check_composition(Level(level), dv) != oracle_composition(level, v)) ++mismatches;
      }
    }
    const double secs = seconds_since(start);
    c.expect(mismatches == 0, std::to_string(mismatches) + " mismatches");
    const DifficultyVector ref({3, 2, 2, 3, 2, 3, 2});
    c.expect(ref.count_at(3) == 3 && ref.count_at(2) == 4, "reference vector shape");
    c.expect(check_composition(Level(3), ref), "reference vector rejected at L3");
    c.expect(secs < kDifficultySeconds, "took " + fmt(secs) + " s");
  });

  gate.run("codec: 10k random round trips and the three reference encodings", true, [](Check& c) {
    std::mt19937 rng(2026);
    int bad = 0;
    for (int i = 0; i < kBase64Trials; ++i) {
      std::string s(rng() % 48, '\0');
      for (auto& ch : s) ch = static_cast<char>(32 + rng() % 95);
      const std::string e = encode_secret(s);
      if (e != oracle_base64(s) || decode_secret(e) != s) ++bad;
    }
    c.expect(bad == 0, std::to_string(bad) + " round-trip failures");
    const std::pair<const char*, const char*> refs[] = {{"GEG-2026-05841", "R0VHLTIwMjYtMDU4NDE="},
                                                        {"11440.00", "MTE0NDAuMDA="},
                                                        {"2026-05-16", "MjAyNi0wNS0xNg=="}};
    for (const auto& [plain, enc] : refs) {
      c.expect(encode_secret(plain) == enc, std::string("encode ") + plain);
      c.expect(decode_secret(enc) == plain, std::string("decode ") + enc);
    }
  });

  gate.run("state-dependent codes: five reference submissions resolve to their codes", true, [](Check& c) {
    const WebsiteBundle b = wedding_generated();
    const auto& judge = *b.solution.judge;
    struct Row {
      json state;
      const char* code;
    };
    const Row rows[] = {{booking("2026-05-16", 80, "premium"), "GEG-2026-05841"},
                        {booking("2026-05-15", 80, "premium"), "GEG-2026-05842"},
                        {booking("2026-05-16", 80, "standard"), "GEG-2026-05991"},
                        {booking("2026-05-16", 75, "premium"), "GEG-2026-05118"},
                        {booking("2026-05-23", 80, "premium"), "GEG-2026-05294"}};
    for (const auto& r : rows) {
      const std::string got = resolve_submission(r.state, b.answer, judge);
      c.expect(got == r.code, r.state.dump() + " -> " + got);
      c.expect(resolve_submission(r.state, b.answer, *b.shipped_judge) == r.code, "shipped judge disagrees");
    }
  });

  gate.run("validation filter: overall pass rate 74.1%, information retrieval 88.9%", true, [](Check& c) {
    const BenchmarkManifest m = filter_benchmark(attempted_tasks());
    const std::string overall = PassRateTable::render(m.pass_rates.overall());
    const std::string d4 = PassRateTable::render(m.pass_rates.domain_total(Domain::InfoRetrieval));
    c.expect(overall == "74.1", "overall " + overall);
    c.expect(d4 == "88.9", "D4 " + d4);
    c.expect(m.tasks.size() == 934, "kept " + std::to_string(m.tasks.size()));
  });

  gate.run("solvability: 95.0/93.2/76.5 per level, 88.5 overall, mean solvers 10.4/7.9/4.3", true, [](Check& c) {
    const SolvabilityReport s = solvability(solvability_results());
    const char* rates[] = {"95.0", "93.2", "76.5"};
    const char* solvers[] = {"10.4", "7.9", "4.3"};
    for (int l = 1; l <= 3; ++l) {
      const std::string r = s.by_level.at(l).rate()->render(1);
      const std::string m = s.mean_solvers.at(l).render(1);
      c.expect(r == rates[l - 1], "L" + std::to_string(l) + " rate " + r);
      c.expect(m == solvers[l - 1], "L" + std::to_string(l) + " solvers " + m);
    }
    const std::string o = s.overall.rate()->render(1);
    c.expect(o == "88.5", "overall " + o);
  });

  gate.run("aggregation: average row 52.6 overall and 73.9/54.8/28.1 per level within 0.05", true, [](Check& c) {
    const ResultSet rs = accuracy_results();
    const ReportTables t = aggregate(rs);
    const ReportTables exact = aggregate(rs, AverageMode::Exact);
    const std::pair<const char*, double> want[] = {{"ALL", 52.6}, {"L1", 73.9}, {"L2", 54.8}, {"L3", 28.1}};
    std::ostringstream exact_note;
    for (const auto& [col, target] : want) {
      const double got = t.average.rates.at(col)->to_double();
      c.expect(std::abs(got - target) <= kAverageTolerance, std::string(col) + " " + fmt(got));
      exact_note << col << "=" << fmt(exact.average.rates.at(col)->to_double(), 2) << " ";
    }
    std::cout << "      pooled-count averages for reference: " << exact_note.str() << std::endl;
  });

  gate.run("rank correlation: matrix matches oracle to 1e-12, +1/-1 on identical and reversed columns", true,
           [](Check& c) {
             std::vector<DifficultyVector> annotations;
             const json input = published("spearman.json");
             for (const auto& a : input.at("annotations")) {
               annotations.emplace_back(a.get<std::array<int, kDimensionCount>>());
             }
             const json expected = published("spearman_expected.json");
             const json& rho = expected.at("rho");
             const SpearmanMatrix m = spearman_matrix(annotations);
             double worst = 0;
             for (std::size_t i = 0; i < kDimensionCount; ++i) {
               for (std::size_t k = 0; k < kDimensionCount; ++k) {
                 if (!m.rho[i][k]) {
                   c.expect(false, "undefined cell");
                   continue;
                 }
                 worst = std::max(worst, std::abs(*m.rho[i][k] - rho[i][k].get<double>()));
               }
             }
             c.expect(worst <= kSpearmanTolerance, "max error " + std::to_string(worst));
             std::mt19937 rng(11);
             for (int trial = 0; trial < 100; ++trial) {
               std::vector<double> x(5 + rng() % 30), rev;
               for (auto& v : x) v = static_cast<double>(rng() % 4);
               x[0] = 0;
               x[1] = 3;
               for (double v : x) rev.push_back(-v);
               c.expect(spearman(x, x) == 1.0, "identical != 1");
               c.expect(spearman(x, rev) == -1.0, "reversed != -1");
             }
           });

  gate.run("pipeline: reference task solvable within 50 steps, same digest on two runs, under 2 min", true,
           [](Check& c) {
             const fs::path dir = kFixtures / "wedding";
             const RunConfig config = RunConfig::load(dir / "run.json");
             const auto providers = load_providers(dir / "providers.toml");
             const fs::path root = scratch("a");
             const auto start = Clock::now();
             const PipelineRun a = run_pipeline(config, providers, root);
             const double secs = seconds_since(start);
             RunConfig serial = config;
             serial.workers = 1;
             const PipelineRun b = run_pipeline(serial, providers, scratch("b"));
             c.expect(a.all_ok(), "stage failure");
             c.expect(!a.manifest.tasks.empty(), "empty manifest");
             BenchmarkStore store(root, config.benchmark_id);
             for (const auto& t : a.manifest.tasks) {
               const auto v = store.load_verdict(t.task_id);
               c.expect(v && v->solvable, t.task_id + " not solvable");
               if (v) c.expect(v->steps_used <= kPipelineMaxSteps, t.task_id + " steps " + std::to_string(v->steps_used));
             }
             c.expect(a.manifest.digest() == b.manifest.digest(), "digests differ");
             c.expect(secs < kPipelineSeconds, "took " + fmt(secs) + " s");
           });

  gate.run("failure modes: fee-omitted total, three identical failed actions, zero budget", true, [](Check& c) {
    const WebsiteBundle& b = wedding_refined().first;
    {
      ScriptedSolver s(b.solution);
      s.override_answer("total_cost", "10400.00");
      const Verdict v = replay(b, s);
      c.expect(!v.solvable && v.failure_mode == FailureMode::GtMismatch, "10400.00 not gt_mismatch");
    }
    {
      RepeatingSolver s(BrowserAction::click(9999));
      const Verdict v = replay(b, s);
      c.expect(v.failure_mode == FailureMode::RepeatedActionFailure, "no repeated_action_failure");
      c.expect(v.steps_used == 3, "aborted after " + std::to_string(v.steps_used) + " steps");
    }
    {
      ScriptedSolver s(b.solution);
      ReplayOptions o;
      o.budget = 0;
      const Verdict v = replay(b, s, o);
      c.expect(v.failure_mode == FailureMode::StepBudgetExceeded, "no step_budget_exceeded");
      c.expect(v.steps_used == 0, "steps used with zero budget");
    }
  });

  gate.run("refinement: no dead links, no blocking dialogs, runtime once per page; findings present before", true,
           [](Check& c) {
             const WebsiteBundle before = wedding_generated();
             const auto& [after, report] = wedding_refined();
             std::set<std::string> found;
             for (const auto& f : report.before) found.insert(f.rule_id);
             c.expect(before.nav.dead_count() > 0, "no dead links before");
             c.expect(found.count("FC-001"), "dead-link finding missing before");
             c.expect(found.count("IF-001"), "dialog finding missing before");
             c.expect(found.count("ER-001"), "runtime finding missing before");
             std::size_t calls_before = 0;
             for (const auto& [file, js] : served_scripts(before)) calls_before += find_blocking_calls(js).size();
             c.expect(calls_before > 0, "no blocking calls before");

             c.expect(after.nav.dead_count() == 0, std::to_string(after.nav.dead_count()) + " dead links after");
             const std::regex dialog(R"((^|[^\w$.]|window\.)(alert|confirm|prompt)\s*\()");
             std::size_t calls_after = 0;
             for (const auto& [file, js] : served_scripts(after)) {
               calls_after += find_blocking_calls(js).size() + count_matches(js, dialog);
             }
             c.expect(calls_after == 0, std::to_string(calls_after) + " blocking calls after");
             const std::regex script_tag(R"(<script[^>]*\ssrc\s*=\s*["'][^"']*js/main\.js["'])");
             const std::regex island(std::string("id=\"") + kRuntimeConfigId + "\"");
             for (const auto& p : after.pages) {
               const auto it = after.files.find(p.file);
               if (it == after.files.end()) continue;
               c.expect(count_matches(it->second, script_tag) == 1, p.file + " runtime script count");
               c.expect(count_matches(it->second, island) == 1, p.file + " island count");
             }
             const std::string& js = after.files.at(kScriptFile);
             c.expect(util::contains(js, kRuntimeBegin), "runtime block missing from script");
             c.expect(report.residual.empty(), "residual findings");
           });

  gate.run("popup delay: 200 loads within [5000, 15000) ms, cookie banner at 1000 ms", false, [](Check& c) {
    const auto& after = wedding_refined().first;
    const auto cfg = read_runtime_config(after.files.at("index.html"));
    c.expect(cfg.has_value(), "no runtime config");
    if (!cfg) return;
    for (std::uint32_t load = 0; load < 200; ++load) {
      const int d = popup_delay_ms(*cfg, load);
      c.expect(d >= 5000 && d < 15000, "delay " + std::to_string(d));
    }
    c.expect(cfg->cookie_delay_ms == 1000, "cookie delay " + std::to_string(cfg->cookie_delay_ms));
  });

  std::cout << (gate.failed_primary == 0 ? "acceptance: all primary criteria pass"
                                         : "acceptance: " + std::to_string(gate.failed_primary) +
                                               " primary criteria failed")
            << std::endl;
  return gate.failed_primary == 0 ? 0 : 1;
}
