#include "vpagent/config.hpp"

#include <cstdlib>

#include "vpagent/error.hpp"

namespace vpa {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string resolve_scripted(const std::string& url, const fs::path& base_dir) {
  constexpr std::string_view prefix = "scripted:";
  if (base_dir.empty() || !url.starts_with(prefix)) return url;
  const fs::path p(url.substr(prefix.size()));
  if (p.is_absolute()) return url;
  return std::string(prefix) + (base_dir / p).lexically_normal().string();
}

Json style_to_json(const RenderStyle& s) {
  return {{"color", {s.color.r, s.color.g, s.color.b}},
          {"stroke_px", s.stroke_px},
          {"label_font_px", s.label_font_px},
          {"arrow_offset_px", s.arrow_offset_px}};
}

RenderStyle style_from_json(const Json& j) {
  RenderStyle s;
  if (j.contains("color")) {
    const auto c = j["color"].get<std::vector<int>>();
    if (c.size() != 3) throw Error(ErrorCode::ConfigError, "render.color must be [r, g, b]");
    for (int v : c) {
      if (v < 0 || v > 255) throw Error(ErrorCode::ConfigError, "render.color components must be 0..255");
    }
    s.color = Rgb{static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]), static_cast<std::uint8_t>(c[2])};
  }
  s.stroke_px = j.value("stroke_px", s.stroke_px);
  s.label_font_px = j.value("label_font_px", s.label_font_px);
  s.arrow_offset_px = j.value("arrow_offset_px", s.arrow_offset_px);
  return s;
}

}  // namespace

void RunConfig::validate() const {
  budget.validate();
  reward.validate();
  style.validate();
  if (rollout_temperature < 0) throw Error(ErrorCode::ConfigError, "rollout.temperature must be >= 0");
  if (max_response_tokens < 1) throw Error(ErrorCode::ConfigError, "rollout.max_response_tokens must be >= 1");
  if (group_size < 1) throw Error(ErrorCode::ConfigError, "rollout.group_size must be >= 1");
  if (pass_k < 1) throw Error(ErrorCode::ConfigError, "curation.k must be >= 1");
  const int lo = min_passes.value_or(1);
  const int hi = max_passes.value_or(pass_k - 1);
  if (lo < 0 || lo > hi || hi > pass_k) {
    throw Error(ErrorCode::ConfigError, "curation bounds must satisfy 0 <= min_passes <= max_passes <= k");
  }
  if (oe_threshold < 0 || oe_threshold > 1) throw Error(ErrorCode::ConfigError, "eval.oe_threshold must be in [0, 1]");
  if (concurrency < 1) throw Error(ErrorCode::ConfigError, "concurrency must be >= 1");
  for (const auto& [role, _] : endpoints) {
    if (std::find(std::begin(kEndpointRoles), std::end(kEndpointRoles), role) == std::end(kEndpointRoles)) {
      throw Error(ErrorCode::ConfigError, "unknown endpoint role '" + role + "'");
    }
  }
}

bool RunConfig::has_endpoint(std::string_view role) const {
  const auto it = endpoints.find(std::string(role));
  return it != endpoints.end() && !it->second.url.empty();
}

const EndpointConfig& RunConfig::endpoint(std::string_view role) const {
  if (!has_endpoint(role)) {
    throw Error(ErrorCode::ConfigError, "no '" + std::string(role) + "' endpoint configured (endpoints." +
                                            std::string(role) + ".url or VPAGENT_" + upper(role) + "_URL)");
  }
  return endpoints.find(std::string(role))->second;
}

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("endpoints")) {
      for (const auto& [role, e] : j["endpoints"].items()) {
        auto ep = endpoint_from_json(e);
        ep.url = resolve_scripted(ep.url, base_dir);
        c.endpoints[role] = std::move(ep);
      }
    }
    if (j.contains("budget")) c.budget = tool_budget_from_json(j["budget"]);
    if (j.contains("reward")) c.reward = reward_config_from_json(j["reward"]);
    if (j.contains("rollout")) {
      const auto& r = j["rollout"];
      c.rollout_temperature = r.value("temperature", c.rollout_temperature);
      c.max_response_tokens = r.value("max_response_tokens", c.max_response_tokens);
      c.group_size = r.value("group_size", c.group_size);
      if (r.contains("clock")) c.clock = parse_clock(r["clock"].get<std::string>());
    }
    if (j.contains("curation")) {
      const auto& r = j["curation"];
      c.pass_k = r.value("k", c.pass_k);
      if (r.contains("min_passes")) c.min_passes = r["min_passes"].get<int>();
      if (r.contains("max_passes")) c.max_passes = r["max_passes"].get<int>();
      c.teacher_model = r.value("teacher_model", c.teacher_model);
    }
    if (j.contains("eval")) {
      const auto& r = j["eval"];
      c.oe_threshold = r.value("oe_threshold", c.oe_threshold);
      const auto agg = r.value("aggregation", std::string("micro"));
      if (agg != "micro" && agg != "macro") throw Error(ErrorCode::ConfigError, "eval.aggregation must be micro or macro");
      c.aggregation = agg == "micro" ? Aggregation::micro : Aggregation::macro;
    }
    if (j.contains("render")) c.style = style_from_json(j["render"]);
    const auto conc = j.value("concurrency", static_cast<long long>(c.concurrency));
    if (conc < 1) throw Error(ErrorCode::ConfigError, "concurrency must be >= 1");
    c.concurrency = static_cast<std::size_t>(conc);
    c.seed = j.value("seed", c.seed);
    c.run_dir = j.value("run_dir", c.run_dir);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_env_overrides(RunConfig& config) {
  for (const auto role : kEndpointRoles) {
    const auto key = "VPAGENT_" + upper(role);
    if (const char* url = std::getenv((key + "_URL").c_str()); url && *url) config.endpoints[std::string(role)].url = url;
    if (const char* k = std::getenv((key + "_API_KEY").c_str()); k && *k) {
      config.endpoints[std::string(role)].api_key = k;
    }
  }
}

RunConfig load_run_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.detail());
  }
  auto c = run_config_from_json(j, path.parent_path());
  apply_env_overrides(c);
  c.validate();
  return c;
}

Json to_json(const RunConfig& c, bool redact_secrets) {
  Json endpoints = Json::object();
  for (const auto& [role, e] : c.endpoints) endpoints[role] = to_json(e, redact_secrets);
  Json curation = {{"k", c.pass_k}, {"teacher_model", c.teacher_model}};
  if (c.min_passes) curation["min_passes"] = *c.min_passes;
  if (c.max_passes) curation["max_passes"] = *c.max_passes;
  return {{"endpoints", endpoints},
          {"budget", to_json(c.budget)},
          {"reward", to_json(c.reward)},
          {"rollout",
           {{"temperature", c.rollout_temperature},
            {"max_response_tokens", c.max_response_tokens},
            {"group_size", c.group_size},
            {"clock", to_string(c.clock)}}},
          {"curation", curation},
          {"eval", {{"oe_threshold", c.oe_threshold}, {"aggregation", c.aggregation == Aggregation::micro ? "micro" : "macro"}}},
          {"render", style_to_json(c.style)},
          {"concurrency", c.concurrency},
          {"seed", c.seed},
          {"run_dir", c.run_dir}};
}

void write_config_snapshot(const RunConfig& config, const fs::path& run_dir, bool resume) {
  const auto path = run_dir / "config.json";
  const auto text = to_json(config, true).dump(2) + "\n";
  if (fs::exists(path)) {
    if (!resume) {
      throw Error(ErrorCode::ConfigError, run_dir.string() + " was already used; pass a fresh run_dir or resume");
    }
    if (read_file(path) != text) {
      throw Error(ErrorCode::ConfigError, "effective config differs from the snapshot in " + path.string());
    }
    return;
  }
  write_file(path, text);
}

}  // namespace vpa
