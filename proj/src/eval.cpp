#include "vpagent/eval.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <set>
#include <sstream>

#include "vpagent/error.hpp"

namespace vpa {

std::string_view to_string(AnswerFormat f) {
  return f == AnswerFormat::multiple_choice ? "multiple_choice" : "open_ended";
}

AnswerFormat parse_answer_format(std::string_view s) {
  if (s == "multiple_choice") return AnswerFormat::multiple_choice;
  if (s == "open_ended") return AnswerFormat::open_ended;
  throw Error(ErrorCode::ManifestInvalid, "answer_format must be multiple_choice or open_ended, got '" +
                                              std::string(s) + "'");
}

void BenchmarkManifest::validate() const {
  if (items.empty()) throw Error(ErrorCode::ManifestInvalid, "manifest has no items");
  const std::set<std::string> dims(dimension_set.begin(), dimension_set.end());
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (!dims.contains(item.dimension)) {
      throw Error(ErrorCode::ManifestInvalid, "'" + item.sample.sample_id + "': dimension '" + item.dimension +
                                                  "' is not in the dimension set");
    }
    if (item.answer_format == AnswerFormat::multiple_choice && (!item.sample.options || item.sample.options->size() < 2)) {
      throw Error(ErrorCode::ManifestInvalid, "'" + item.sample.sample_id + "': multiple-choice item needs >= 2 options");
    }
    if (!ids.insert(item.sample.sample_id).second) {
      throw Error(ErrorCode::ManifestInvalid, "duplicate sample_id '" + item.sample.sample_id + "'");
    }
  }
}

BenchmarkManifest load_manifest(const fs::path& path) {
  BenchmarkManifest m;
  m.name = path.stem().string();
  bool fixed_dims = false;
  std::vector<Json> lines;
  try {
    lines = read_jsonl(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ManifestInvalid, e.detail());
  }
  for (const auto& j : lines) {
    try {
      if (j.contains("manifest")) {
        const auto& h = j["manifest"];
        m.name = h.value("name", m.name);
        if (h.contains("dimension_set")) {
          m.dimension_set = h["dimension_set"].get<std::vector<std::string>>();
          fixed_dims = true;
        }
        continue;
      }
      ManifestItem item;
      item.sample = sample_from_json(j.at("sample"));
      item.dimension = j.at("dimension").get<std::string>();
      item.answer_format = parse_answer_format(j.value("answer_format", std::string("multiple_choice")));
      if (!fixed_dims &&
          std::find(m.dimension_set.begin(), m.dimension_set.end(), item.dimension) == m.dimension_set.end()) {
        m.dimension_set.push_back(item.dimension);
      }
      m.items.push_back(std::move(item));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ManifestInvalid, std::string("manifest item: ") + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ManifestInvalid) throw;
      throw Error(ErrorCode::ManifestInvalid, e.what());
    }
  }
  m.validate();
  return m;
}

void write_manifest(const fs::path& path, const BenchmarkManifest& manifest) {
  std::vector<Json> lines;
  lines.push_back({{"manifest", {{"name", manifest.name}, {"dimension_set", manifest.dimension_set}}}});
  for (const auto& item : manifest.items) {
    lines.push_back({{"sample", to_json(item.sample)},
                     {"dimension", item.dimension},
                     {"answer_format", to_string(item.answer_format)}});
  }
  write_jsonl(path, lines);
}

std::optional<char> extract_option_letter(std::string_view answer,
                                          const std::optional<std::vector<std::string>>& options) {
  const auto is_alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < answer.size(); ++i) {
    const char c = answer[i];
    if (!std::isalpha(static_cast<unsigned char>(c))) continue;
    if (i > 0 && is_alnum(answer[i - 1])) continue;
    const bool at_end = i + 1 == answer.size();
    const bool delimited = at_end || answer[i + 1] == '.' || answer[i + 1] == ')' || answer[i + 1] == ':';
    if (delimited) return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  const auto t = trim(answer);
  if (t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0]))) {
    return static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  }
  if (options) {
    for (std::size_t k = 0; k < options->size(); ++k) {
      auto text = trim((*options)[k]);
      if (text.size() >= 2 && std::isupper(static_cast<unsigned char>(text[0])) && (text[1] == '.' || text[1] == ')')) {
        text = trim(std::string_view(text).substr(2));
      }
      if (!t.empty() && to_lower(text) == to_lower(t)) return static_cast<char>('A' + k);
    }
  }
  return std::nullopt;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

LatencySummary latency_report(std::span<const Trajectory> trajectories) {
  LatencySummary s;
  s.count = trajectories.size();
  if (trajectories.empty()) return s;
  std::vector<double> gen;
  std::vector<double> tool;
  std::vector<double> steps;
  for (const auto& t : trajectories) {
    gen.push_back(t.timing.generation_ms);
    tool.push_back(t.timing.tool_ms);
    steps.push_back(static_cast<double>(t.assistant_turns().size()) + t.timing.tool_calls_executed);
  }
  s.mean_generation_ms = mean_of(gen);
  s.median_generation_ms = median_of(gen);
  s.mean_tool_ms = mean_of(tool);
  s.median_tool_ms = median_of(tool);
  s.mean_steps = mean_of(steps);
  s.median_steps = median_of(steps);
  return s;
}

Json to_json(const LatencySummary& s) {
  return {{"count", s.count},
          {"generation_ms", {{"mean", s.mean_generation_ms}, {"median", s.median_generation_ms}}},
          {"tool_ms", {{"mean", s.mean_tool_ms}, {"median", s.median_tool_ms}}},
          {"action_steps", {{"mean", s.mean_steps}, {"median", s.median_steps}}}};
}

std::string latency_table(const LatencySummary& s) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-16s %12s %12s\n", "phase", "mean", "median");
  out << line;
  std::snprintf(line, sizeof line, "%-16s %12.1f %12.1f\n", "generation_ms", s.mean_generation_ms,
                s.median_generation_ms);
  out << line;
  std::snprintf(line, sizeof line, "%-16s %12.1f %12.1f\n", "tool_ms", s.mean_tool_ms, s.median_tool_ms);
  out << line;
  std::snprintf(line, sizeof line, "%-16s %12.2f %12.2f\n", "action_steps", s.mean_steps, s.median_steps);
  out << line;
  std::snprintf(line, sizeof line, "trajectories: %zu\n", s.count);
  out << line;
  return out.str();
}

ItemResult score_item(const ManifestItem& item, const Trajectory& trajectory, const JudgeClient& judge,
                      double oe_threshold) {
  ItemResult r;
  r.sample_id = item.sample.sample_id;
  r.dimension = item.dimension;
  r.answer_format = item.answer_format;
  r.predicted = trajectory.final_answer;
  if (trajectory.status != TrajectoryStatus::answered || !trajectory.final_answer) {
    r.error = "no answer (status " + std::string(to_string(trajectory.status)) + ")";
    return r;
  }
  if (item.answer_format == AnswerFormat::multiple_choice) {
    const auto gold = extract_option_letter(item.sample.answer, item.sample.options);
    const auto got = extract_option_letter(*trajectory.final_answer, item.sample.options);
    if (!gold) r.error = "gold answer has no option letter";
    r.score = gold && got && *gold == *got ? 1.0 : 0.0;
    r.correct = r.score == 1.0;
    return r;
  }
  try {
    r.score = accuracy_reward(*trajectory.final_answer, item.sample.answer, judge, item.sample.question,
                              RequestMeta{"judge", item.sample.sample_id, 0, 0});
    r.correct = r.score >= oe_threshold;
  } catch (const Error& e) {
    r.error = e.what();
    r.score = 0;
  }
  return r;
}

EvalReport aggregate(const BenchmarkManifest& manifest, std::vector<ItemResult> items, Aggregation aggregation) {
  EvalReport rep;
  rep.name = manifest.name;
  rep.aggregation = aggregation;
  std::map<std::string, DimensionStat> stats;
  for (const auto& d : manifest.dimension_set) stats[d].name = d;
  long long total = 0;
  long long correct = 0;
  for (const auto& it : items) {
    auto& s = stats.at(it.dimension);
    ++s.total;
    ++total;
    if (it.correct) {
      ++s.correct;
      ++correct;
    }
  }
  double macro_sum = 0;
  std::size_t macro_n = 0;
  for (const auto& d : manifest.dimension_set) {
    auto s = stats.at(d);
    s.accuracy = s.total ? 100.0 * static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0;
    if (s.total) {
      macro_sum += s.accuracy;
      ++macro_n;
    }
    rep.dimensions.push_back(s);
  }
  if (aggregation == Aggregation::micro) {
    rep.overall = total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  } else {
    rep.overall = macro_n ? macro_sum / static_cast<double>(macro_n) : 0.0;
  }
  rep.items = std::move(items);
  return rep;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  out << "# " << name << "  aggregation: " << (aggregation == Aggregation::micro ? "micro" : "macro")
      << "  temperature: " << fixed1(temperature) << "\n";
  std::vector<std::string> header = {"Agent"};
  std::vector<std::string> acc = {agent ? "yes" : "no"};
  std::vector<std::string> counts = {"n"};
  for (const auto& d : dimensions) {
    header.push_back(d.name);
    acc.push_back(fixed1(d.accuracy));
    counts.push_back(std::to_string(d.total));
  }
  header.push_back("Avg.");
  acc.push_back(fixed1(overall));
  long long n = 0;
  for (const auto& d : dimensions) n += d.total;
  counts.push_back(std::to_string(n));
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = std::max({header[i].size(), acc[i].size(), counts[i].size()});
  }
  for (const auto* row : {&header, &acc, &counts}) {
    for (std::size_t i = 0; i < row->size(); ++i) {
      if (i) out << "  ";
      const auto& cell = (*row)[i];
      if (i == 0) out << cell << std::string(width[i] - cell.size(), ' ');
      else out << std::string(width[i] - cell.size(), ' ') << cell;
    }
    out << "\n";
  }
  return out.str();
}

Json to_json(const EvalReport& r) {
  Json dims = Json::array();
  for (const auto& d : r.dimensions) {
    dims.push_back({{"name", d.name}, {"total", d.total}, {"correct", d.correct}, {"accuracy", d.accuracy}});
  }
  Json items = Json::array();
  Json errors = Json::array();
  long long partial = 0;
  for (const auto& it : r.items) {
    Json j = {{"sample_id", it.sample_id},
              {"dimension", it.dimension},
              {"answer_format", to_string(it.answer_format)},
              {"predicted", it.predicted ? Json(*it.predicted) : Json(nullptr)},
              {"score", it.score},
              {"correct", it.correct}};
    if (!it.error.empty()) {
      j["error"] = it.error;
      errors.push_back({{"sample_id", it.sample_id}, {"error", it.error}});
    }
    if (it.score == 0.5) ++partial;
    items.push_back(std::move(j));
  }
  return {{"name", r.name},
          {"mode", {{"agent", r.agent}, {"temperature", r.temperature}}},
          {"aggregation", r.aggregation == Aggregation::micro ? "micro" : "macro"},
          {"dimensions", dims},
          {"overall", r.overall},
          {"partial_credit_items", partial},
          {"latency", to_json(r.latency)},
          {"errors", errors},
          {"items", items}};
}

EvalReport evaluate(const BenchmarkManifest& manifest, ChatClient& policy, const ToolEnvironment& env,
                    const JudgeClient& judge, const EvalOptions& options, const PromptLibrary& prompts) {
  if (options.temperature != 0.0) {
    throw Error(ErrorCode::ConfigError, "evaluation runs at temperature 0 (got " + fixed1(options.temperature) + ")");
  }
  manifest.validate();
  RolloutSettings settings;
  settings.temperature = 0;
  settings.max_response_tokens = options.max_response_tokens;
  settings.agent = options.agent;
  settings.clock = options.clock;
  const RolloutEngine engine(policy, env, settings, prompts);

  std::vector<Sample> samples;
  samples.reserve(manifest.items.size());
  for (const auto& item : manifest.items) samples.push_back(item.sample);
  BatchOptions batch;
  batch.concurrency = options.concurrency;
  batch.run_dir = options.run_dir;
  batch.resume = options.resume;
  const auto result = engine.run_batch(samples, batch);

  if (!options.agent) {
    for (const auto& t : result.trajectories) {
      if (!t.tool_history.empty()) {
        throw std::logic_error("non-agent trajectory '" + t.sample_id + "' contains tool calls");
      }
    }
  }
  std::vector<ItemResult> items(manifest.items.size());
  parallel_for(items.size(), options.concurrency, [&](std::size_t i) {
    items[i] = score_item(manifest.items[i], result.trajectories.at(i), judge, options.oe_threshold);
  });
  for (const auto& it : items) {
    if (!it.error.empty()) spdlog::warn("item '{}' scored 0: {}", it.sample_id, it.error);
  }
  auto report = aggregate(manifest, std::move(items), options.aggregation);
  report.agent = options.agent;
  report.temperature = 0;
  report.latency = latency_report(result.trajectories);
  return report;
}

}  // namespace vpa
