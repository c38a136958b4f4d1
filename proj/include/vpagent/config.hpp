#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "vpagent/chat.hpp"
#include "vpagent/eval.hpp"
#include "vpagent/reward.hpp"
#include "vpagent/rollout.hpp"
#include "vpagent/tools.hpp"
#include "vpagent/vp_render.hpp"

namespace vpa {

inline constexpr std::string_view kEndpointRoles[] = {"policy", "judge", "filter", "verifier", "segmenter", "rewriter"};

/// Resolved configuration of one CLI run. JSON document:
///
///   {"endpoints": {"policy": EndpointConfig, "judge": ..., ...},
///    "budget": ToolBudget, "reward": RewardConfig,
///    "rollout": {"temperature", "max_response_tokens", "group_size", "clock"},
///    "curation": {"k", "min_passes", "max_passes", "teacher_model"},
///    "eval": {"oe_threshold", "aggregation"},
///    "render": {"color", "stroke_px", "label_font_px", "arrow_offset_px"},
///    "concurrency": 4, "seed": 0, "run_dir": "runs/x"}
///
/// Every key is optional. Environment variables VPAGENT_<ROLE>_URL and
/// VPAGENT_<ROLE>_API_KEY override the endpoint entries.
struct RunConfig {
  std::map<std::string, EndpointConfig> endpoints;
  ToolBudget budget;
  RewardConfig reward;
  double rollout_temperature = 1.0;
  int max_response_tokens = 4096;
  int group_size = 8;
  Clock clock = Clock::wall;
  int pass_k = 8;
  std::optional<int> min_passes;
  std::optional<int> max_passes;
  std::string teacher_model;
  double oe_threshold = 1.0;
  Aggregation aggregation = Aggregation::micro;
  RenderStyle style;
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  std::string run_dir;

  /// ConfigError / WeightSumViolation on invalid values.
  void validate() const;
  /// ConfigError when the role has no endpoint URL.
  const EndpointConfig& endpoint(std::string_view role) const;
  bool has_endpoint(std::string_view role) const;
};

/// Relative "scripted:" paths are resolved against `base_dir`.
RunConfig run_config_from_json(const Json& j, const fs::path& base_dir = {});
/// Reads the file, applies environment overrides and validates.
RunConfig load_run_config(const fs::path& path);
/// Applies VPAGENT_<ROLE>_URL / VPAGENT_<ROLE>_API_KEY from the environment.
void apply_env_overrides(RunConfig& config);

/// API keys are replaced by "<redacted>" when `redact_secrets` is set.
Json to_json(const RunConfig& config, bool redact_secrets);

/// Writes <run_dir>/config.json (redacted). An existing snapshot is a
/// ConfigError unless resuming with an identical effective configuration.
void write_config_snapshot(const RunConfig& config, const fs::path& run_dir, bool resume);

}  // namespace vpa
