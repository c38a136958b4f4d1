#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpagent/reward.hpp"
#include "vpagent/rollout.hpp"

namespace vpa {

enum class AnswerFormat { multiple_choice, open_ended };
std::string_view to_string(AnswerFormat f);
AnswerFormat parse_answer_format(std::string_view s);

struct ManifestItem {
  Sample sample;
  std::string dimension;
  AnswerFormat answer_format = AnswerFormat::multiple_choice;
};

struct BenchmarkManifest {
  std::string name;
  std::vector<ManifestItem> items;
  std::vector<std::string> dimension_set;

  /// ManifestInvalid: unknown dimension, MC item with < 2 options, duplicate
  /// sample_id, empty manifest.
  void validate() const;
};

/// Line-delimited items {"sample", "dimension", "answer_format"}. An optional
/// header line {"manifest": {"name", "dimension_set"}} fixes the dimension
/// order; otherwise dimensions are listed in first-appearance order.
BenchmarkManifest load_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const BenchmarkManifest& manifest);

/// First standalone letter followed by '.', ')', ':' or the end of the
/// text (case-insensitive), uppercased. Falls back to matching the whole
/// text against the option texts.
std::optional<char> extract_option_letter(std::string_view answer,
                                          const std::optional<std::vector<std::string>>& options = std::nullopt);

struct LatencySummary {
  std::size_t count = 0;
  double mean_generation_ms = 0;
  double median_generation_ms = 0;
  double mean_tool_ms = 0;
  double median_tool_ms = 0;
  double mean_steps = 0;
  double median_steps = 0;
};

/// Steps = assistant turns + executed tool calls.
LatencySummary latency_report(std::span<const Trajectory> trajectories);
Json to_json(const LatencySummary& s);
std::string latency_table(const LatencySummary& s);

struct ItemResult {
  std::string sample_id;
  std::string dimension;
  AnswerFormat answer_format = AnswerFormat::multiple_choice;
  std::optional<std::string> predicted;
  double score = 0;
  bool correct = false;
  std::string error;
};

struct DimensionStat {
  std::string name;
  long long total = 0;
  long long correct = 0;
  /// Percent.
  double accuracy = 0;
};

enum class Aggregation { micro, macro };

struct EvalReport {
  std::string name;
  bool agent = true;
  double temperature = 0;
  Aggregation aggregation = Aggregation::micro;
  std::vector<DimensionStat> dimensions;
  /// Percent; micro over items or macro over dimensions.
  double overall = 0;
  LatencySummary latency;
  std::vector<ItemResult> items;

  /// Aligned plain-text table: one column per dimension then "Avg.".
  std::string table() const;
};

Json to_json(const EvalReport& r);

struct EvalOptions {
  bool agent = true;
  /// Must be 0; anything else is a ConfigError.
  double temperature = 0;
  int max_response_tokens = 4096;
  /// Judge score needed for an open-ended item to count as correct.
  double oe_threshold = 1.0;
  Aggregation aggregation = Aggregation::micro;
  std::size_t concurrency = 1;
  Clock clock = Clock::wall;
  /// When set, trajectories are checkpointed here.
  std::optional<fs::path> run_dir;
  bool resume = false;
};

/// Scores one finished trajectory against its item.
ItemResult score_item(const ManifestItem& item, const Trajectory& trajectory, const JudgeClient& judge,
                      double oe_threshold);

/// Aggregates item results into per-dimension and overall accuracy.
EvalReport aggregate(const BenchmarkManifest& manifest, std::vector<ItemResult> items, Aggregation aggregation);

EvalReport evaluate(const BenchmarkManifest& manifest, ChatClient& policy, const ToolEnvironment& env,
                    const JudgeClient& judge, const EvalOptions& options,
                    const PromptLibrary& prompts = PromptLibrary::builtin());

}  // namespace vpa
