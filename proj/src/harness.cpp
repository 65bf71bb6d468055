#include "forge/harness.hpp"

#include "forge/codec.hpp"
#include "forge/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

namespace forge {

using nlohmann::json;

// ---- answer judging --------------------------------------------------------------

std::string normalize_answer(const std::string& text) {
  static const char* const symbols[] = {"$", "\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5", "\xE2\x82\xB9"};
  std::string s = util::to_lower(util::trim(text));
  for (const char* sym : symbols) {
    const std::string needle = sym;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos)) s.erase(pos, needle.size());
  }
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool separator = s[i] == ',' && i > 0 && i + 1 < s.size() &&
                           std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
                           std::isdigit(static_cast<unsigned char>(s[i + 1]));
    if (!separator) out += s[i];
  }
  std::string collapsed;
  for (const auto& word : util::split_ws(out)) collapsed += (collapsed.empty() ? "" : " ") + word;
  return collapsed;
}

std::optional<double> parse_answer_number(const std::string& normalized) {
  if (normalized.empty()) return std::nullopt;
  const char c = normalized.front();
  if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.')) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(normalized.c_str(), &end);
  if (end != normalized.c_str() + normalized.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool direct_answer_equal(const std::string& submitted, const std::string& expected) {
  const std::string a = normalize_answer(submitted);
  const std::string b = normalize_answer(expected);
  if (a == b) return true;
  const auto x = parse_answer_number(a);
  const auto y = parse_answer_number(b);
  if (!x || !y) return false;
  if (*x == *y) return true;
  return std::fabs(*x - *y) <= 1e-9 * std::max(std::fabs(*x), std::fabs(*y));
}

bool judge_answer(AnswerType type, const std::map<std::string, std::string>& submitted,
                  const std::map<std::string, std::string>& ground_truth, const std::string& code_field) {
  for (const auto& [field, expected] : ground_truth) {
    auto it = submitted.find(field);
    if (it == submitted.end()) return false;
    const bool exact = type == AnswerType::OperationCode || (type == AnswerType::Mixed && field == code_field);
    if (exact ? it->second != expected : !direct_answer_equal(it->second, expected)) return false;
  }
  return true;
}

std::map<std::string, std::string> decoded_ground_truth(const EncodedAnswerConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [field, encoded] : config.ground_truth) out[field] = decode_secret(encoded);
  return out;
}

// ---- records ---------------------------------------------------------------------

std::string modality_name(Modality m) { return m == Modality::DomOnly ? "dom_only" : "screenshot_dom"; }

std::optional<Modality> modality_from_name(const std::string& s) {
  if (s == "screenshot_dom") return Modality::ScreenshotDom;
  if (s == "dom_only") return Modality::DomOnly;
  return std::nullopt;
}

json EvaluationRecord::to_json() const {
  json j = {{"model_id", model_id},
            {"task_id", task_id},
            {"modality", modality_name(modality)},
            {"correct", correct},
            {"turns", turns},
            {"acts", acts},
            {"prompt_tokens", prompt_tokens},
            {"completion_tokens", completion_tokens},
            {"step_logging", step_logging},
            {"submitted_answer", submitted_answer},
            {"elapsed", elapsed}};
  if (!infrastructure_error.empty()) j["infrastructure_error"] = infrastructure_error;
  return j;
}

EvaluationRecord EvaluationRecord::from_json(const json& j) {
  EvaluationRecord r;
  try {
    r.model_id = j.at("model_id").get<std::string>();
    r.task_id = j.at("task_id").get<std::string>();
    const auto m = modality_from_name(j.value("modality", "screenshot_dom"));
    if (!m) throw ParseError("unknown modality '" + j.value("modality", "") + "'");
    r.modality = *m;
    r.correct = j.at("correct").get<bool>();
    r.turns = j.value("turns", 0);
    r.acts = j.value("acts", 0);
    r.prompt_tokens = j.value("prompt_tokens", 0LL);
    r.completion_tokens = j.value("completion_tokens", 0LL);
    r.step_logging = j.value("step_logging", true);
    r.submitted_answer = j.value("submitted_answer", std::map<std::string, std::string>{});
    r.elapsed = j.value("elapsed", 0.0);
    r.infrastructure_error = j.value("infrastructure_error", "");
  } catch (const json::exception& e) {
    throw ParseError(std::string("evaluation record: ") + e.what());
  }
  if (r.acts < 0 || r.acts > kMaxSolutionSteps) {
    throw ParseError("evaluation record " + r.task_id + ": acts out of range");
  }
  return r;
}

void ResultSet::validate() const {
  std::set<std::string> missing;
  for (const auto& r : records) {
    if (!index.count(r.task_id)) missing.insert(r.task_id);
  }
  if (missing.empty()) return;
  std::string ids;
  for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
  throw ConfigError("results reference tasks outside the index: " + ids);
}

std::vector<std::string> ResultSet::models() const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (std::find(out.begin(), out.end(), r.model_id) == out.end()) out.push_back(r.model_id);
  }
  return out;
}

std::map<std::string, TaskIndexEntry> ResultSet::index_from(const BenchmarkManifest& manifest) {
  std::map<std::string, TaskIndexEntry> out;
  for (const auto& t : manifest.tasks) out[t.task_id] = {t.domain, t.level, t.difficulty};
  return out;
}

void write_results(const std::filesystem::path& path, const std::vector<EvaluationRecord>& records) {
  std::string out;
  for (const auto& r : records) out += r.to_json().dump() + "\n";
  util::write_file(path, out);
}

std::vector<EvaluationRecord> read_results(const std::filesystem::path& path) {
  std::vector<EvaluationRecord> out;
  std::istringstream in(util::read_file(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (util::trim(line).empty()) continue;
    try {
      out.push_back(EvaluationRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---- evaluation ------------------------------------------------------------------

EvaluationRecord evaluate_task(const WebsiteBundle& bundle, BrowserSession& session, Solver& agent,
                               const EvaluateOptions& options) {
  EvaluationRecord rec;
  rec.model_id = options.model_id;
  rec.task_id = bundle.task.task_id;
  rec.modality = options.modality;
  const auto start = std::chrono::steady_clock::now();
  std::vector<TraceStep> history;
  bool terminated = false;
  try {
    if (options.budget > 0) session.launch();
    while (rec.acts < options.budget) {
      Observation obs = session.observe();
      if (options.modality == Modality::DomOnly) obs.screenshot.reset();
      const SolverTurn turn = agent.next(obs, history);
      ++rec.turns;
      if (turn.action.kind == ActionKind::Terminate) {
        rec.submitted_answer = turn.action.answer;
        terminated = true;
        break;
      }
      TraceStep step;
      step.step = rec.acts + 1;
      step.url = obs.url;
      step.observation_digest = obs.digest();
      step.reasoning = turn.reasoning;
      step.action = turn.action;
      step.outcome = session.dispatch(turn.action);
      ++rec.acts;
      history.push_back(std::move(step));
    }
    session.close();
  } catch (const InfrastructureError& e) {
    rec.infrastructure_error = e.what();
    try {
      session.close();
    } catch (const Error&) {
    }
  } catch (const TransportError& e) {
    rec.infrastructure_error = std::string("agent gateway: ") + e.what();
    try {
      session.close();
    } catch (const Error&) {
    }
  }
  rec.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (const auto usage = agent.usage()) {
    rec.turns = usage->turns;
    rec.prompt_tokens = usage->prompt_tokens;
    rec.completion_tokens = usage->completion_tokens;
    rec.step_logging = usage->step_logging;
  }
  rec.correct = rec.attempted() && terminated &&
                judge_answer(bundle.answer.answer_type, rec.submitted_answer, decoded_ground_truth(bundle.answer),
                             bundle.answer.code_field);
  return rec;
}

// ---- aggregation -----------------------------------------------------------------

std::optional<util::Rational> Tally::rate() const {
  if (total == 0) return std::nullopt;
  return util::Rational::percent(correct, total);
}

ProviderAgent::ProviderAgent(ProviderProfile provider, std::string instruction, std::string model_id)
    : provider_(std::move(provider)), instruction_(std::move(instruction)), model_id_(std::move(model_id)) {
  if (!provider_.provider) throw ConfigError("agent " + model_id_ + " has no provider");
}

std::string ProviderAgent::system_prompt() {
  return "You operate a web browser to complete a task on a website. Each turn you see the page URL, any open "
         "dialog, and the interactive elements with their indices. Reply with exactly one JSON object:\n"
         "{\"reasoning\": \"...\", \"action\": \"navigate\", \"url\": \"page.html\"}\n"
         "{\"action\": \"click\", \"index\": 3}\n"
         "{\"action\": \"input\", \"index\": 5, \"text\": \"value\"}\n"
         "{\"action\": \"scroll\", \"direction\": \"down\"}\n"
         "{\"action\": \"back\"}\n"
         "{\"action\": \"terminate\", \"answer\": {\"field\": \"value\"}}\n"
         "Terminate once you can report every requested field.";
}

std::string ProviderAgent::turn_prompt(const std::string& instruction, const Observation& observation,
                                       const std::vector<TraceStep>& history) {
  std::ostringstream out;
  out << "Task:\n" << instruction << "\n\nURL: " << observation.url << "\nTitle: " << observation.title << "\n";
  if (observation.dialog) out << "Open dialog: " << *observation.dialog << "\n";
  out << "Elements:\n";
  for (const auto& e : observation.elements) {
    out << "[" << e.index << "] <" << e.tag;
    for (const char* a : {"type", "name", "href", "placeholder"}) {
      auto it = e.attrs.find(a);
      if (it != e.attrs.end()) out << " " << a << "=\"" << it->second << "\"";
    }
    out << ">";
    if (!e.text.empty()) out << " " << e.text;
    if (!e.value.empty()) out << " value=\"" << e.value << "\"";
    if (e.layer != "page") out << " (" << e.layer << ")";
    out << "\n";
  }
  const std::size_t from = history.size() > 8 ? history.size() - 8 : 0;
  if (from < history.size()) out << "Recent actions:\n";
  for (std::size_t i = from; i < history.size(); ++i) {
    const auto& s = history[i];
    out << s.step << ". " << s.action.to_json().dump() << " -> " << (s.outcome.ok ? "ok" : "failed");
    if (!s.outcome.detail.empty()) out << ": " << s.outcome.detail;
    out << "\n";
  }
  return out.str();
}

SolverTurn ProviderAgent::parse_reply(const std::string& text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw ParseError("agent reply has no JSON object");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("agent reply: ") + e.what());
  }
  if (!j.is_object() || !j.contains("action") || !j.at("action").is_string()) {
    throw ParseError("agent reply lacks an action");
  }
  SolverTurn turn;
  turn.reasoning = j.value("reasoning", "");
  const std::string kind = j.at("action");
  try {
    if (kind == "navigate") {
      turn.action = BrowserAction::navigate(j.at("url").get<std::string>());
    } else if (kind == "click") {
      turn.action = BrowserAction::click(j.at("index").get<int>());
    } else if (kind == "input") {
      turn.action = BrowserAction::input(j.at("index").get<int>(), j.at("text").get<std::string>());
    } else if (kind == "scroll") {
      turn.action = BrowserAction::scroll(j.value("direction", "down"));
    } else if (kind == "back") {
      turn.action = BrowserAction::back();
    } else if (kind == "terminate") {
      std::map<std::string, std::string> answer;
      const nlohmann::json fields = j.value("answer", nlohmann::json::object());
      for (const auto& [k, v] : fields.items()) {
        answer[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      turn.action = BrowserAction::terminate(std::move(answer));
    } else {
      throw ParseError("agent reply has unknown action '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("agent " + kind + " action: " + e.what());
  }
  return turn;
}

SolverTurn ProviderAgent::next(const Observation& observation, const std::vector<TraceStep>& history) {
  ProviderRequest req;
  req.system_prompt = system_prompt();
  req.user_prompt = turn_prompt(instruction_, observation, history);
  req.temperature = provider_.temperature;
  req.max_tokens = provider_.max_output_tokens;
  req.tag = "agent:" + model_id_ + ":" + std::to_string(history.size() + 1);
  const ProviderResponse resp = provider_.provider->complete(req);
  usage_.turns += 1;
  usage_.prompt_tokens += resp.prompt_tokens;
  usage_.completion_tokens += resp.completion_tokens;
  try {
    return parse_reply(resp.text);
  } catch (const ParseError& e) {
    return {std::string("unparseable reply: ") + e.what(), BrowserAction::scroll("down")};
  }
}

namespace {

std::string render_rate(const std::optional<util::Rational>& r) { return r ? r->render(1) : "-"; }

std::string level_column(int level) { return "L" + std::to_string(level); }

std::optional<util::Rational> mean_of(const std::vector<util::Rational>& values) {
  if (values.empty()) return std::nullopt;
  util::Rational sum;
  for (const auto& v : values) sum = sum + v;
  return sum / util::Rational(static_cast<long long>(values.size()));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string markdown_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

std::string markdown_rule(std::size_t n) {
  std::string out = "|";
  for (std::size_t i = 0; i < n; ++i) out += i == 0 ? " --- |" : " ---: |";
  return out + "\n";
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
  return out + "\n";
}

void require_records(const ResultSet& results) {
  results.validate();
  if (std::none_of(results.records.begin(), results.records.end(), [](const auto& r) { return r.attempted(); })) {
    throw ConfigError("no attempted evaluation records");
  }
}

} // namespace

const std::vector<std::string>& ReportTables::columns() {
  static const std::vector<std::string> cols = {"L1", "L2", "L3", "ALL", "D1", "D2", "D3", "D4", "D5", "D6", "D7"};
  return cols;
}

ReportTables aggregate(const ResultSet& results, AverageMode mode) {
  require_records(results);
  ReportTables out;
  for (const auto& model : results.models()) {
    AccuracyRow row;
    row.model_id = model;
    for (const auto& r : results.records) {
      if (r.model_id != model || !r.attempted()) continue;
      const TaskIndexEntry& t = results.index.at(r.task_id);
      for (const std::string& col : {level_column(t.level), std::string("ALL"), domain_code(t.domain)}) {
        Tally& tally = row.tallies[col];
        tally.total += 1;
        tally.correct += r.correct ? 1 : 0;
      }
    }
    if (row.tallies.empty()) continue;
    for (const auto& col : ReportTables::columns()) {
      auto it = row.tallies.find(col);
      row.rates[col] = it == row.tallies.end() ? std::nullopt : it->second.rate();
    }
    out.models.push_back(std::move(row));
  }
  out.average.model_id = "Average";
  for (const auto& col : ReportTables::columns()) {
    std::vector<util::Rational> values;
    for (const auto& m : out.models) {
      const auto& r = m.rates.at(col);
      if (!r) continue;
      values.push_back(mode == AverageMode::Rendered ? util::Rational::from_decimal(r->render(1)) : *r);
    }
    out.average.rates[col] = mean_of(values);
  }
  return out;
}

std::string ReportTables::to_markdown() const {
  std::vector<std::string> head = {"Model"};
  for (const auto& c : columns()) head.push_back(c);
  std::string out = markdown_row(head) + markdown_rule(head.size());
  for (const AccuracyRow* row : [&] {
         std::vector<const AccuracyRow*> rows;
         for (const auto& m : models) rows.push_back(&m);
         rows.push_back(&average);
         return rows;
       }()) {
    std::vector<std::string> cells = {row->model_id};
    for (const auto& c : columns()) cells.push_back(render_rate(row->rates.at(c)));
    out += markdown_row(cells);
  }
  return out;
}

std::string ReportTables::to_csv() const {
  std::vector<std::string> head = {"model"};
  for (const auto& c : columns()) head.push_back(c);
  std::string out = csv_row(head);
  auto emit = [&](const AccuracyRow& row) {
    std::vector<std::string> cells = {row.model_id};
    for (const auto& c : columns()) cells.push_back(render_rate(row.rates.at(c)));
    out += csv_row(cells);
  };
  for (const auto& m : models) emit(m);
  emit(average);
  return out;
}

std::optional<util::Rational> DimensionRow::rate(Dimension d, int level) const {
  auto it = cells.find({d, level});
  return it == cells.end() ? std::nullopt : it->second.rate();
}

DimensionTable per_dimension_table(const ResultSet& results) {
  require_records(results);
  DimensionTable out;
  for (const auto& model : results.models()) {
    DimensionRow row;
    row.model_id = model;
    for (const auto& r : results.records) {
      if (r.model_id != model || !r.attempted()) continue;
      const TaskIndexEntry& t = results.index.at(r.task_id);
      for (Dimension d : kAllDimensions) {
        Tally& tally = row.cells[{d, t.difficulty.level(d).value()}];
        tally.total += 1;
        tally.correct += r.correct ? 1 : 0;
      }
    }
    if (!row.cells.empty()) out.models.push_back(std::move(row));
  }
  return out;
}

std::string DimensionTable::to_markdown() const {
  std::string out = markdown_row({"Model", "Dimension", "L1", "L2", "L3"}) + markdown_rule(5);
  for (const auto& m : models) {
    for (Dimension d : kAllDimensions) {
      out += markdown_row({m.model_id, std::string(dimension_label(d)), render_rate(m.rate(d, 1)),
                           render_rate(m.rate(d, 2)), render_rate(m.rate(d, 3))});
    }
  }
  return out;
}

std::string DimensionTable::to_csv() const {
  std::string out = csv_row({"model", "dimension", "L1", "L2", "L3"});
  for (const auto& m : models) {
    for (Dimension d : kAllDimensions) {
      out += csv_row({m.model_id, std::string(dimension_key(d)), render_rate(m.rate(d, 1)), render_rate(m.rate(d, 2)),
                      render_rate(m.rate(d, 3))});
    }
  }
  return out;
}

SolvabilityReport solvability(const ResultSet& results) {
  require_records(results);
  SolvabilityReport out;
  std::map<std::string, std::set<std::string>> solvers;
  std::set<std::string> models;
  for (const auto& r : results.records) {
    if (!r.attempted()) continue;
    models.insert(r.model_id);
    auto& s = solvers[r.task_id];
    if (r.correct) s.insert(r.model_id);
  }
  out.models = static_cast<int>(models.size());
  std::map<int, long long> solver_sum;
  for (const auto& [task, who] : solvers) {
    const int level = results.index.at(task).level;
    const int count = static_cast<int>(who.size());
    out.solver_counts[task] = count;
    Tally& t = out.by_level[level];
    t.total += 1;
    t.correct += count > 0 ? 1 : 0;
    out.overall.total += 1;
    out.overall.correct += count > 0 ? 1 : 0;
    solver_sum[level] += count;
  }
  for (const auto& [level, t] : out.by_level) out.mean_solvers[level] = util::Rational(solver_sum[level], t.total);
  return out;
}

std::string SolvabilityReport::to_markdown() const {
  std::string out = markdown_row({"Level", "Solved", "Tasks", "Rate", "Mean solvers"}) + markdown_rule(5);
  for (const auto& [level, t] : by_level) {
    out += markdown_row({level_column(level), std::to_string(t.correct), std::to_string(t.total), render_rate(t.rate()),
                         mean_solvers.at(level).render(1)});
  }
  out += markdown_row({"ALL", std::to_string(overall.correct), std::to_string(overall.total),
                       render_rate(overall.rate()), "-"});
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("spearman: series lengths differ");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

SpearmanMatrix spearman_matrix(const std::vector<DifficultyVector>& annotations) {
  if (annotations.size() < 3) throw ConfigError("spearman matrix needs at least three annotations");
  std::array<std::vector<double>, kDimensionCount> cols;
  for (const auto& v : annotations) {
    for (std::size_t d = 0; d < kDimensionCount; ++d) cols[d].push_back(v.levels()[d]);
  }
  SpearmanMatrix out;
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    for (std::size_t j = i; j < kDimensionCount; ++j) {
      auto r = spearman(cols[i], cols[j]);
      if (i == j && r) r = 1.0;
      out.rho[i][j] = r;
      out.rho[j][i] = r;
    }
  }
  double total = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    double sum = 0;
    int n = 0;
    for (std::size_t j = 0; j < kDimensionCount; ++j) {
      if (i == j || !out.rho[i][j]) continue;
      sum += std::fabs(*out.rho[i][j]);
      ++n;
      if (j > i) {
        total += std::fabs(*out.rho[i][j]);
        ++pairs;
      }
    }
    if (n) out.mean_abs_per_dimension[i] = sum / n;
  }
  if (pairs) out.mean_abs_off_diagonal = total / pairs;
  return out;
}

std::string SpearmanMatrix::to_markdown() const {
  std::vector<std::string> head = {""};
  for (Dimension d : kAllDimensions) head.push_back(std::string(dimension_label(d)));
  head.push_back("Mean |rho|");
  std::string out = markdown_row(head) + markdown_rule(head.size());
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << *v;
    return s.str();
  };
  for (Dimension d : kAllDimensions) {
    const std::size_t i = dimension_index(d);
    std::vector<std::string> cells = {std::string(dimension_label(d))};
    for (std::size_t j = 0; j < kDimensionCount; ++j) cells.push_back(fmt(rho[i][j]));
    cells.push_back(fmt(mean_abs_per_dimension[i]));
    out += markdown_row(cells);
  }
  out += "\nMean off-diagonal |rho|: " + fmt(mean_abs_off_diagonal) + "\n";
  return out;
}

RuntimeReport runtime_report(const ResultSet& results) {
  results.validate();
  RuntimeReport out;
  for (const auto& model : results.models()) {
    RuntimeRow row;
    row.model_id = model;
    std::map<int, std::array<long long, 4>> sums;
    std::map<int, long long> counts;
    for (const auto& r : results.records) {
      if (r.model_id != model || !r.attempted()) continue;
      const int level = results.index.at(r.task_id).level;
      auto& s = sums[level];
      s[0] += r.turns;
      s[1] += r.acts;
      s[2] += r.prompt_tokens;
      s[3] += r.completion_tokens;
      counts[level] += 1;
      if (!r.step_logging) row.step_logging = false;
    }
    if (counts.empty()) continue;
    for (const auto& [level, n] : counts) {
      const auto& s = sums[level];
      RuntimeCell cell;
      cell.tasks = n;
      cell.turns = util::Rational(s[0], n);
      cell.acts = util::Rational(s[1], n);
      cell.prompt_k = util::Rational(s[2], n * 1000);
      cell.completion_k = util::Rational(s[3], n * 1000);
      row.by_level[level] = cell;
    }
    out.models.push_back(std::move(row));
  }
  return out;
}

std::string RuntimeReport::to_markdown() const {
  std::vector<std::string> head = {"Model"};
  for (int l = 1; l <= 3; ++l) {
    for (const char* m : {"Turns", "Acts", "Prompt K", "Completion K"}) head.push_back(level_column(l) + " " + m);
  }
  std::string out = markdown_row(head) + markdown_rule(head.size());
  for (const auto& row : models) {
    std::vector<std::string> cells = {row.model_id + (row.step_logging ? "" : "\xE2\x80\xA0")};
    for (int l = 1; l <= 3; ++l) {
      auto it = row.by_level.find(l);
      if (it == row.by_level.end()) {
        cells.insert(cells.end(), 4, "-");
        continue;
      }
      const RuntimeCell& c = it->second;
      cells.push_back(c.turns.render(1));
      cells.push_back(c.acts.render(1));
      cells.push_back(c.prompt_k.render(1));
      cells.push_back(c.completion_k.render(1));
    }
    out += markdown_row(cells);
  }
  if (std::any_of(models.begin(), models.end(), [](const RuntimeRow& r) { return !r.step_logging; })) {
    out += "\n\xE2\x80\xA0 Token counts reported by the agent gateway without per-step logging.\n";
  }
  return out;
}

std::string RuntimeReport::to_csv() const {
  std::string out = csv_row({"model", "step_logging", "level", "tasks", "turns", "acts", "prompt_k", "completion_k"});
  for (const auto& row : models) {
    for (const auto& [level, c] : row.by_level) {
      out += csv_row({row.model_id, row.step_logging ? "true" : "false", level_column(level), std::to_string(c.tasks),
                      c.turns.render(1), c.acts.render(1), c.prompt_k.render(1), c.completion_k.render(1)});
    }
  }
  return out;
}

} // namespace forge
