#include "vpagent/pipeline.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <set>
#include <sstream>

#include "vpagent/error.hpp"

namespace vpa {

namespace {

std::size_t word_count(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::optional<std::vector<std::string>> string_list(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_array()) throw Error(ErrorCode::SchemaViolation, std::string(key) + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string()) throw Error(ErrorCode::SchemaViolation, std::string(key) + " must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string required_string(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::SchemaViolation, std::string("missing string field '") + key + "'");
  }
  return j[key].get<std::string>();
}

std::string options_text(const std::optional<std::vector<std::string>>& options) {
  return options ? format_options(options) : std::string("None");
}

}  // namespace

// --- verification record ---------------------------------------------------

void VerificationRecord::validate() const {
  if (!is_valid) {
    if (!reason || trim(*reason).empty()) throw Error(ErrorCode::SchemaViolation, "rejection without a reason");
    return;
  }
  const auto vp = count_vp_tokens(rewritten_question);
  if (vp != 1) {
    throw Error(ErrorCode::SchemaViolation,
                "rewritten_question must contain exactly one <vp>, found " + std::to_string(vp));
  }
  if (!std::isfinite(start_s) || !std::isfinite(end_s) || start_s < 0 || !(start_s < end_s)) {
    throw Error(ErrorCode::SchemaViolation,
                "window " + format_decimal1(start_s) + "-" + format_decimal1(end_s) + " is not a valid interval");
  }
  const auto words = word_count(tag);
  if (words < 3 || words > 10) {
    throw Error(ErrorCode::SchemaViolation, "tag '" + tag + "' has " + std::to_string(words) + " words (3-10 allowed)");
  }
  if (!parse_vp_type(vp_type)) throw Error(ErrorCode::SchemaViolation, "unknown visual prompt type '" + vp_type + "'");
  if (trim(rewritten_answer).empty()) throw Error(ErrorCode::SchemaViolation, "rewritten_answer is empty");
}

Json to_json(const VerificationRecord& r) {
  if (!r.is_valid) return {{"is_valid", false}, {"reason", r.reason.value_or("")}};
  Json j = {{"is_valid", true},
            {"target_description", r.target_description},
            {"tag", r.tag},
            {"window", {{"start_s", r.start_s}, {"end_s", r.end_s}}},
            {"rewritten_question", r.rewritten_question},
            {"rewritten_answer", r.rewritten_answer},
            {"vp_type", r.vp_type}};
  j["rewritten_options"] = r.rewritten_options ? Json(*r.rewritten_options) : Json(nullptr);
  return j;
}

VerificationRecord verification_record_from_json(const Json& j) {
  try {
    VerificationRecord r;
    r.is_valid = j.at("is_valid").get<bool>();
    if (!r.is_valid) {
      r.reason = j.at("reason").get<std::string>();
      return r;
    }
    r.target_description = j.value("target_description", std::string{});
    r.tag = j.at("tag").get<std::string>();
    r.start_s = j.at("window").at("start_s").get<double>();
    r.end_s = j.at("window").at("end_s").get<double>();
    r.rewritten_question = j.at("rewritten_question").get<std::string>();
    r.rewritten_options = string_list(j, "rewritten_options");
    r.rewritten_answer = j.at("rewritten_answer").get<std::string>();
    r.vp_type = j.at("vp_type").get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("verification record: ") + e.what());
  }
}

VerificationRecord parse_verifier_output(const Json& j, const Sample& sample) {
  if (!j.is_object() || !j.contains("is_valid") || !j["is_valid"].is_boolean()) {
    throw Error(ErrorCode::SchemaViolation, "verifier output lacks a boolean is_valid");
  }
  VerificationRecord r;
  r.is_valid = j["is_valid"].get<bool>();
  if (!r.is_valid) {
    if (j.contains("reason") && j["reason"].is_string()) r.reason = j["reason"].get<std::string>();
    r.validate();
    return r;
  }
  r.target_description = j.contains("target_description") && j["target_description"].is_string()
                             ? j["target_description"].get<std::string>()
                             : std::string{};
  r.tag = trim(required_string(j, "tag"));
  if (!j.contains("timestamp") || !j["timestamp"].is_object() || !j["timestamp"].contains("start") ||
      !j["timestamp"].contains("end") || !j["timestamp"]["start"].is_number() || !j["timestamp"]["end"].is_number()) {
    throw Error(ErrorCode::SchemaViolation, "timestamp must be {\"start\": number, \"end\": number}");
  }
  r.start_s = round1(j["timestamp"]["start"].get<double>());
  r.end_s = round1(j["timestamp"]["end"].get<double>());
  r.rewritten_question = required_string(j, "rewritten_question");
  r.rewritten_options = string_list(j, "rewritten_options");
  if (!r.rewritten_options) r.rewritten_options = sample.options;
  r.rewritten_answer = j.contains("rewritten_answer") && j["rewritten_answer"].is_string()
                           ? j["rewritten_answer"].get<std::string>()
                           : sample.answer;
  r.vp_type = required_string(j, "visual_prompt_type");
  r.validate();
  return r;
}

// --- mask track ------------------------------------------------------------

Json to_json(const MaskTrack& t) {
  Json masks = Json::object();
  for (const auto& [sec, m] : t.masks) masks[std::to_string(sec)] = rle_encode(m);
  return {{"tag", t.tag}, {"frame_size", {{"w", t.frame_size.width}, {"h", t.frame_size.height}}}, {"masks", masks}};
}

MaskTrack mask_track_from_json(const Json& j) {
  try {
    MaskTrack t;
    t.tag = j.value("tag", std::string{});
    t.frame_size = {j.at("frame_size").at("w").get<int>(), j.at("frame_size").at("h").get<int>()};
    for (const auto& [key, rle] : j.at("masks").items()) t.masks.emplace(std::stoi(key), rle_decode(rle));
    return t;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("mask track: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::SchemaViolation, "mask track keys must be integer seconds");
  }
}

std::vector<int> track_seconds(double duration_s) {
  std::vector<int> out;
  for (int s = 0; s < duration_s; ++s) out.push_back(s);
  return out;
}

std::vector<int> window_seconds(double start_s, double end_s, double duration_s) {
  std::vector<int> out;
  const auto lo = static_cast<int>(std::floor(start_s));
  const auto hi = static_cast<int>(std::floor(end_s));
  for (int s = std::max(lo, 0); s <= hi && s < duration_s; ++s) out.push_back(s);
  return out;
}

// --- segmentation clients --------------------------------------------------

HttpSegmentationClient::HttpSegmentationClient(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}

Json HttpSegmentationClient::segment(const SegmentRequest& request) {
  const auto scheme_end = endpoint_.url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "segmenter url lacks a scheme");
  const auto path_start = endpoint_.url.find('/', scheme_end + 3);
  const auto origin = endpoint_.url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : endpoint_.url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (!path.ends_with("/segment")) path += "/segment";

  const Json body = {{"sample_id", request.sample_id},
                     {"video_path", request.video_path},
                     {"tag", request.tag},
                     {"fps", request.fps}};
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
  double backoff = endpoint_.retry.backoff_ms;
  std::string last_error;
  for (int attempt = 1; attempt <= endpoint_.retry.max_attempts; ++attempt) {
    httplib::Client client(origin);
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(endpoint_.timeout_s * 1000));
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (res && res->status == 200) {
      auto doc = Json::parse(res->body, nullptr, false);
      if (doc.is_discarded()) throw Error(ErrorCode::SchemaViolation, "segmentation response is not JSON");
      return doc;
    }
    if (res) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
    } else {
      last_error = httplib::to_string(res.error());
    }
    spdlog::warn("segment request to {} failed (attempt {}/{}): {}", endpoint_.url, attempt,
                 endpoint_.retry.max_attempts, last_error);
    if (attempt < endpoint_.retry.max_attempts) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff));
      backoff *= endpoint_.retry.multiplier;
    }
  }
  throw Error(ErrorCode::ClientUnreachable, endpoint_.url + ": " + last_error);
}

ScriptedSegmentationClient::ScriptedSegmentationClient(Json script) : script_(std::move(script)) {}

ScriptedSegmentationClient ScriptedSegmentationClient::load(const fs::path& path) {
  auto doc = Json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::ConfigError, "segmentation script is not JSON: " + path.string());
  return ScriptedSegmentationClient(std::move(doc));
}

Json ScriptedSegmentationClient::segment(const SegmentRequest& request) {
  if (script_.value("unreachable", false)) {
    throw Error(ErrorCode::ClientUnreachable, "scripted segmenter marked unreachable");
  }
  for (const auto& step : script_.value("steps", Json::array())) {
    const auto match = step.value("match", Json::object());
    if (match.contains("sample_id") && match["sample_id"] != request.sample_id) continue;
    if (match.contains("tag") && match["tag"] != request.tag) continue;
    return step.at("respond");
  }
  if (script_.contains("default")) return script_["default"];
  throw Error(ErrorCode::SchemaViolation, "no segmentation step matches '" + request.sample_id + "'");
}

std::unique_ptr<SegmentationClient> make_segmentation_client(const EndpointConfig& endpoint) {
  constexpr std::string_view scripted = "scripted:";
  if (endpoint.url.starts_with(scripted)) {
    return std::make_unique<ScriptedSegmentationClient>(
        ScriptedSegmentationClient::load(endpoint.url.substr(scripted.size())));
  }
  return std::make_unique<HttpSegmentationClient>(endpoint);
}

// --- records ---------------------------------------------------------------

Json to_json(const FinalSample& f) {
  Json j = to_json(f.sample);
  j["tag"] = f.tag;
  j["window"] = {f.window_start, f.window_end};
  j["render_second"] = f.render_second;
  return j;
}

FinalSample final_sample_from_json(const Json& j) {
  FinalSample f;
  f.sample = sample_from_json(j);
  f.tag = j.value("tag", std::string{});
  if (j.contains("window")) {
    f.window_start = j["window"].at(0).get<double>();
    f.window_end = j["window"].at(1).get<double>();
  }
  f.render_second = j.value("render_second", 0);
  return f;
}

std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::kept: return "kept";
    case StageStatus::rejected: return "rejected";
    case StageStatus::quarantined: return "quarantined";
    case StageStatus::error: return "error";
  }
  return "error";
}

StageStatus parse_stage_status(std::string_view s) {
  if (s == "kept") return StageStatus::kept;
  if (s == "rejected") return StageStatus::rejected;
  if (s == "quarantined") return StageStatus::quarantined;
  if (s == "error") return StageStatus::error;
  throw Error(ErrorCode::SchemaViolation, "unknown stage status '" + std::string(s) + "'");
}

Json to_json(const StageRecord& r) {
  Json j = {{"sample_id", r.sample_id}, {"status", to_string(r.status)}};
  j["reason"] = r.reason.empty() ? Json(nullptr) : Json(r.reason);
  j["detail"] = r.detail.empty() ? Json(nullptr) : Json(r.detail);
  j["payload"] = r.payload;
  return j;
}

StageRecord stage_record_from_json(const Json& j) {
  try {
    StageRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.status = parse_stage_status(j.at("status").get<std::string>());
    if (j.contains("reason") && j["reason"].is_string()) r.reason = j["reason"].get<std::string>();
    if (j.contains("detail") && j["detail"].is_string()) r.detail = j["detail"].get<std::string>();
    r.payload = j.value("payload", Json());
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("stage record: ") + e.what());
  }
}

std::vector<StageRecord> read_stage_records(const fs::path& path) {
  std::vector<StageRecord> out;
  if (!fs::exists(path)) return out;
  std::map<std::string, std::size_t> index;
  for (const auto& j : read_jsonl(path)) {
    auto r = stage_record_from_json(j);
    if (auto it = index.find(r.sample_id); it != index.end()) {
      out[it->second] = std::move(r);
    } else {
      index.emplace(r.sample_id, out.size());
      out.push_back(std::move(r));
    }
  }
  return out;
}

// --- ledger ----------------------------------------------------------------

double RetentionLedger::cumulative_ratio(std::size_t k) const {
  if (initial_count == 0) return 0.0;
  return static_cast<double>(stages.at(k).output_count) / static_cast<double>(initial_count);
}

void RetentionLedger::check() const {
  long long expected_input = initial_count;
  for (const auto& s : stages) {
    long long rejected = 0;
    for (const auto& [reason, n] : s.rejection_reasons) rejected += n;
    if (s.input_count != s.output_count + rejected) {
      throw Error(ErrorCode::ManifestInvalid, s.name + ": input " + std::to_string(s.input_count) + " != output " +
                                                  std::to_string(s.output_count) + " + rejected " +
                                                  std::to_string(rejected));
    }
    if (s.output_count > s.input_count) throw Error(ErrorCode::ManifestInvalid, s.name + ": output exceeds input");
    if (s.input_count != expected_input) {
      throw Error(ErrorCode::ManifestInvalid, s.name + ": input " + std::to_string(s.input_count) +
                                                  " does not match previous output " + std::to_string(expected_input));
    }
    expected_input = s.output_count;
  }
}

std::string RetentionLedger::table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %10s %10s %10s\n", "stage", "input", "output", "retained");
  out << line;
  std::snprintf(line, sizeof line, "%-20s %10s %10lld %9.1f%%\n", "raw", "", initial_count, initial_count ? 100.0 : 0.0);
  out << line;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const auto& s = stages[k];
    std::snprintf(line, sizeof line, "%-20s %10lld %10lld %9.1f%%\n", s.name.c_str(), s.input_count, s.output_count,
                  100.0 * cumulative_ratio(k));
    out << line;
    for (const auto& [reason, n] : s.rejection_reasons) {
      std::snprintf(line, sizeof line, "  %-30s %10lld\n", reason.c_str(), n);
      out << line;
    }
  }
  return out.str();
}

Json to_json(const RetentionLedger& l) {
  Json stages = Json::array();
  for (std::size_t k = 0; k < l.stages.size(); ++k) {
    const auto& s = l.stages[k];
    stages.push_back({{"name", s.name},
                      {"input_count", s.input_count},
                      {"output_count", s.output_count},
                      {"rejection_reasons", s.rejection_reasons},
                      {"cumulative_ratio", l.cumulative_ratio(k)}});
  }
  return {{"initial_count", l.initial_count}, {"stages", stages}};
}

namespace {

RetentionLedger ledger_from_records(long long initial, const std::array<std::vector<StageRecord>, 4>& records) {
  RetentionLedger l;
  l.initial_count = initial;
  for (std::size_t k = 0; k < 4; ++k) {
    auto& s = l.stages[k];
    s.name = kStageNames[k];
    s.input_count = static_cast<long long>(records[k].size());
    for (const auto& r : records[k]) {
      if (r.status == StageStatus::kept) ++s.output_count;
      else ++s.rejection_reasons[r.reason.empty() ? std::string("error") : r.reason];
    }
  }
  return l;
}

fs::path stage_path(const fs::path& run_dir, int stage) {
  return run_dir / ("stage" + std::to_string(stage) + ".jsonl");
}

}  // namespace

RetentionLedger ledger_from_stage_files(const fs::path& run_dir, long long initial_count) {
  std::array<std::vector<StageRecord>, 4> records;
  for (int k = 0; k < 4; ++k) records[k] = read_stage_records(stage_path(run_dir, k + 1));
  return ledger_from_records(initial_count, records);
}

std::string sample_file_stem(const std::string& sample_id) {
  std::string stem;
  for (char c : sample_id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    stem += safe ? c : '_';
  }
  if (stem.size() > 64) stem.resize(64);
  char hash[20];
  std::snprintf(hash, sizeof hash, "-%08llx", static_cast<unsigned long long>(fnv1a64(sample_id) & 0xffffffffULL));
  return stem + hash;
}

// --- pipeline --------------------------------------------------------------

Pipeline::Pipeline(PipelineClients clients, const ToolEnvironment& env, PipelineSettings settings,
                   const PromptLibrary& prompts)
    : clients_(clients), env_(env), settings_(std::move(settings)), prompts_(prompts) {}

FilterDecision Pipeline::stage1_filter(const Sample& sample) const {
  if (!clients_.filter) throw Error(ErrorCode::ConfigError, "no filter client configured");
  ChatRequest req;
  req.temperature = 0;
  req.max_tokens = settings_.max_response_tokens;
  req.meta = {"filter", sample.sample_id, 0, 0};
  req.messages.push_back(Message::text(Role::system, prompts_.get("text_filter.system")));
  req.messages.push_back(Message::text(
      Role::user, prompts_.render("text_filter.user", {{"question", sample.question},
                                                       {"options", options_text(sample.options)},
                                                       {"answer", sample.answer}})));
  const auto resp = clients_.filter->complete(req);
  const auto j = extract_json_object(resp.text);
  if (!j || !j->contains("is_valid") || !(*j)["is_valid"].is_boolean()) {
    throw Error(ErrorCode::UnparseableVerdict, "filter output lacks a boolean is_valid: '" +
                                                   resp.text.substr(0, 120) + "'");
  }
  FilterDecision d;
  d.keep = (*j)["is_valid"].get<bool>();
  if (!d.keep) {
    if (!j->contains("reason") || !(*j)["reason"].is_string() || trim((*j)["reason"].get<std::string>()).empty()) {
      throw Error(ErrorCode::UnparseableVerdict, "filter rejection without a reason");
    }
    d.reason = (*j)["reason"].get<std::string>();
  }
  return d;
}

VerificationRecord Pipeline::stage2_verify(const Sample& sample) const {
  if (!clients_.verifier) throw Error(ErrorCode::ConfigError, "no verifier client configured");
  ChatRequest req;
  req.temperature = 0;
  req.max_tokens = settings_.max_response_tokens;
  req.meta = {"verifier", sample.sample_id, 0, 0};
  req.messages.push_back(Message::text(Role::system, prompts_.get("video_verify.system")));
  req.messages.push_back(Message::make(
      Role::user,
      {ContentPart::frames(env_.encode_video_ref(sample.video)),
       ContentPart::text(prompts_.render("video_verify.user", {{"video", sample.video.path.filename().string()},
                                                               {"question", sample.question},
                                                               {"options", options_text(sample.options)},
                                                               {"answer", sample.answer}}))}));
  const auto resp = clients_.verifier->complete(req);
  const auto j = extract_json_object(resp.text);
  if (!j) throw Error(ErrorCode::UnparseableVerdict, "verifier output is not JSON: '" + resp.text.substr(0, 120) + "'");
  return parse_verifier_output(*j, sample);
}

MaskTrack Pipeline::stage3_segment(const Sample& sample, const VerificationRecord& record) const {
  if (!clients_.segmenter) throw Error(ErrorCode::ConfigError, "no segmentation client configured");
  if (!record.is_valid || trim(record.tag).empty()) {
    throw Error(ErrorCode::InvalidArguments, "segmentation needs a valid record with a tag");
  }
  const auto resp = clients_.segmenter->segment({sample.sample_id, sample.video.path.string(), record.tag, 1.0});
  if (!resp.is_object() || !resp.contains("frame_size") || !resp.contains("masks") || !resp["masks"].is_object()) {
    throw Error(ErrorCode::SchemaViolation, "segmentation response needs frame_size and masks");
  }
  MaskTrack track;
  track.tag = record.tag;
  try {
    track.frame_size = {resp["frame_size"].at("w").get<int>(), resp["frame_size"].at("h").get<int>()};
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("frame_size: ") + e.what());
  }
  if (sample.video.width > 0 && (track.frame_size.width != sample.video.width ||
                                 track.frame_size.height != sample.video.height)) {
    throw Error(ErrorCode::MaskShapeMismatch,
                "frame_size " + std::to_string(track.frame_size.width) + "x" + std::to_string(track.frame_size.height) +
                    " vs video " + std::to_string(sample.video.width) + "x" + std::to_string(sample.video.height));
  }
  const auto seconds = track_seconds(sample.video.duration_s);
  const std::set<int> allowed(seconds.begin(), seconds.end());
  for (const auto& [key, rle] : resp["masks"].items()) {
    int sec = -1;
    try {
      std::size_t used = 0;
      sec = std::stoi(key, &used);
      if (used != key.size()) sec = -1;
    } catch (const std::exception&) {
      sec = -1;
    }
    if (!allowed.contains(sec)) throw Error(ErrorCode::SchemaViolation, "mask key '" + key + "' is not a video second");
    auto mask = rle_decode(rle);
    if (mask.width() != track.frame_size.width || mask.height() != track.frame_size.height) {
      throw Error(ErrorCode::MaskShapeMismatch, "mask at second " + key + " is " + std::to_string(mask.width()) + "x" +
                                                    std::to_string(mask.height()) + ", frame is " +
                                                    std::to_string(track.frame_size.width) + "x" +
                                                    std::to_string(track.frame_size.height));
    }
    track.masks.emplace(sec, std::move(mask));
  }
  for (int s : seconds) {
    if (!track.masks.contains(s)) track.masks.emplace(s, Mask(track.frame_size.width, track.frame_size.height));
  }
  return track;
}

bool Pipeline::window_has_target(const MaskTrack& track, const VerificationRecord& record, double duration_s) {
  for (int s : window_seconds(record.start_s, record.end_s, duration_s)) {
    if (auto it = track.masks.find(s); it != track.masks.end() && !it->second.empty()) return true;
  }
  return false;
}

VpType Pipeline::draw_vp_type(const std::string& sample_id) const {
  return kAllVpTypes[derive_seed(settings_.seed, sample_id) % kAllVpTypes.size()];
}

FinalSample Pipeline::stage4_render(const Sample& sample, const VerificationRecord& record, const MaskTrack& track,
                                    const fs::path& vp_dir) const {
  int best = -1;
  long long best_area = 0;
  for (int s : window_seconds(record.start_s, record.end_s, sample.video.duration_s)) {
    auto it = track.masks.find(s);
    if (it == track.masks.end()) continue;
    const auto area = it->second.count();
    if (area > best_area) {
      best = s;
      best_area = area;
    }
  }
  if (best < 0) throw Error(ErrorCode::NoRenderableFrame, "no non-empty mask inside the verified window");

  const auto vp = draw_vp_type(sample.sample_id);
  const std::optional<int> mark = vp == VpType::set_of_mark ? std::optional<int>(1) : std::nullopt;

  auto question = substitute_vp(record.rewritten_question, vp, mark);
  auto options = record.rewritten_options;
  if (options) {
    for (auto& o : *options) o = substitute_vp_all(o, vp, mark);
  }
  auto answer = substitute_vp_all(record.rewritten_answer, vp, mark);

  if (clients_.rewriter) {
    ChatRequest req;
    req.temperature = 0;
    req.max_tokens = settings_.max_response_tokens;
    req.meta = {"rewriter", sample.sample_id, 0, 0};
    req.messages.push_back(Message::text(Role::system, prompts_.get("rewrite.system")));
    req.messages.push_back(Message::text(
        Role::user, prompts_.render("rewrite.user", {{"visual_prompt_type", std::string(to_string(vp))},
                                                     {"question", record.rewritten_question},
                                                     {"options", options_text(record.rewritten_options)}})));
    const auto resp = clients_.rewriter->complete(req);
    const auto j = extract_json_object(resp.text);
    if (!j || !j->contains("question_refined") || !(*j)["question_refined"].is_string()) {
      throw Error(ErrorCode::RewriteSchemaViolation, "rewriter output lacks question_refined");
    }
    const auto refined = (*j)["question_refined"].get<std::string>();
    if (trim(refined).empty() || count_vp_tokens(refined) > 0) {
      throw Error(ErrorCode::RewriteSchemaViolation, "question_refined is empty or still contains <vp>");
    }
    question = refined;
    if (options) {
      std::optional<std::vector<std::string>> refined_options;
      try {
        refined_options = string_list(*j, "options_refined");
      } catch (const Error& e) {
        throw Error(ErrorCode::RewriteSchemaViolation, e.detail());
      }
      if (!refined_options || refined_options->size() != options->size()) {
        throw Error(ErrorCode::RewriteSchemaViolation, "options_refined must keep all " +
                                                           std::to_string(options->size()) + " options");
      }
      for (const auto& o : *refined_options) {
        if (count_vp_tokens(o) > 0) throw Error(ErrorCode::RewriteSchemaViolation, "options_refined contains <vp>");
      }
      options = std::move(refined_options);
    }
  }

  auto frame = env_.media().frames_at(sample.video, std::vector<double>{static_cast<double>(best)}).at(0);
  auto style = settings_.style;
  style.seed = derive_seed(settings_.seed, sample.sample_id, 1);
  const auto image = render_prompt(frame, track.masks.at(best), vp, style, mark);
  const auto path = vp_dir / (sample_file_stem(sample.sample_id) + ".png");
  write_image(path, image);

  FinalSample f;
  f.sample = sample;
  f.sample.question = std::move(question);
  f.sample.options = std::move(options);
  f.sample.answer = std::move(answer);
  f.sample.vp_frame = path.string();
  f.sample.vp_type = std::string(to_string(vp));
  f.sample.mark_number = mark;
  f.tag = record.tag;
  f.window_start = record.start_s;
  f.window_end = record.end_s;
  f.render_second = best;
  return f;
}

namespace {

struct Outcome {
  StageStatus status;
  std::string reason;
};

Outcome classify(int stage, const Error& e) {
  switch (e.code()) {
    case ErrorCode::ClientUnreachable:
    case ErrorCode::PolicyUnreachable:
    case ErrorCode::JudgeUnreachable:
      return {StageStatus::error, "client_unreachable"};
    case ErrorCode::UnparseableVerdict:
      return {StageStatus::quarantined, "unparseable_verdict"};
    case ErrorCode::SchemaViolation:
      return {StageStatus::rejected, stage == 2 ? "verifier_schema" : "segmentation_schema"};
    case ErrorCode::MaskShapeMismatch:
      return {StageStatus::rejected, "mask_shape_mismatch"};
    case ErrorCode::NoRenderableFrame:
      return {StageStatus::rejected, "no_renderable_frame"};
    case ErrorCode::RewriteSchemaViolation:
      return {StageStatus::rejected, "rewrite_schema"};
    case ErrorCode::MissingPlaceholder:
    case ErrorCode::MultiplePlaceholders:
      return {StageStatus::rejected, "vp_placeholder"};
    default:
      return {StageStatus::error, "error"};
  }
}

}  // namespace

PipelineResult Pipeline::run(std::vector<Sample> dataset, const fs::path& run_dir, bool resume) const {
  if (settings_.stages != std::vector<int>{1, 2, 3, 4}) {
    throw Error(ErrorCode::ConfigError, "the pipeline runs exactly G1, G2, G3, G4 in order; stages cannot be skipped");
  }
  if (settings_.concurrency < 1) throw Error(ErrorCode::ConfigError, "concurrency must be >= 1");
  std::set<std::string> ids;
  for (const auto& s : dataset) {
    s.validate();
    if (!ids.insert(s.sample_id).second) throw Error(ErrorCode::ManifestInvalid, "duplicate sample_id '" + s.sample_id + "'");
  }
  fs::create_directories(run_dir);
  if (!resume) {
    for (int k = 1; k <= 4; ++k) {
      const auto p = stage_path(run_dir, k);
      if (fs::exists(p) && fs::file_size(p) > 0) {
        throw Error(ErrorCode::ConfigError, p.string() + " already has records; use a fresh run_dir or resume");
      }
    }
  }
  const auto vp_dir = run_dir / "assets" / "vp";
  const auto mask_dir = run_dir / "assets" / "masks";

  PipelineResult result;
  std::array<std::vector<StageRecord>, 4> records;
  std::vector<std::size_t> inputs(dataset.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) inputs[i] = i;
  std::map<std::string, StageRecord> prev;

  for (int stage = 1; stage <= 4; ++stage) {
    const auto path = stage_path(run_dir, stage);
    std::map<std::string, StageRecord> existing;
    if (resume) {
      for (auto& r : read_stage_records(path)) existing.emplace(r.sample_id, std::move(r));
    }
    std::vector<std::size_t> todo;
    for (auto i : inputs) {
      auto it = existing.find(dataset[i].sample_id);
      if (it == existing.end() || it->second.status == StageStatus::error) todo.push_back(i);
    }
    std::vector<std::optional<StageRecord>> fresh(todo.size());
    OrderedJsonlWriter writer(path, todo.size());

    parallel_for(
        todo.size(), settings_.concurrency,
        [&](std::size_t k) {
          Sample sample = dataset[todo[k]];
          StageRecord rec;
          rec.sample_id = sample.sample_id;
          try {
            if (stage >= 2) resolve_video(sample, env_.media());
            switch (stage) {
              case 1: {
                const auto d = stage1_filter(sample);
                if (!d.keep) {
                  rec.status = StageStatus::rejected;
                  rec.reason = "filter_rejected";
                  rec.detail = d.reason.value_or("");
                }
                break;
              }
              case 2: {
                const auto r = stage2_verify(sample);
                rec.payload = to_json(r);
                if (!r.is_valid) {
                  rec.status = StageStatus::rejected;
                  rec.reason = "verifier_rejected";
                  rec.detail = r.reason.value_or("");
                }
                break;
              }
              case 3: {
                const auto r = verification_record_from_json(prev.at(sample.sample_id).payload);
                const auto track = stage3_segment(sample, r);
                const auto rel = fs::path("assets") / "masks" / (sample_file_stem(sample.sample_id) + ".json");
                write_file(run_dir / rel, to_json(track).dump());
                rec.payload = {{"record", to_json(r)}, {"track", rel.generic_string()}};
                if (!window_has_target(track, r, sample.video.duration_s)) {
                  rec.status = StageStatus::rejected;
                  rec.reason = "segmentation_empty";
                }
                break;
              }
              case 4: {
                const auto& p = prev.at(sample.sample_id).payload;
                const auto r = verification_record_from_json(p.at("record"));
                const auto track = mask_track_from_json(Json::parse(read_file(run_dir / p.at("track").get<std::string>())));
                rec.payload = to_json(stage4_render(sample, r, track, vp_dir));
                break;
              }
            }
          } catch (const Error& e) {
            const auto o = classify(stage, e);
            rec.status = o.status;
            rec.reason = o.reason;
            rec.detail = e.what();
            rec.payload = Json();
            if (o.status == StageStatus::error) spdlog::error("stage {} failed for '{}': {}", stage, rec.sample_id, e.what());
          } catch (const std::exception& e) {
            rec.status = StageStatus::error;
            rec.reason = "error";
            rec.detail = e.what();
            rec.payload = Json();
            spdlog::error("stage {} failed for '{}': {}", stage, rec.sample_id, e.what());
          }
          writer.submit(k, to_json(rec));
          fresh[k] = std::move(rec);
        },
        settings_.stop);

    std::map<std::string, StageRecord> current;
    std::size_t k = 0;
    std::vector<std::size_t> next_inputs;
    for (auto i : inputs) {
      const auto& id = dataset[i].sample_id;
      StageRecord rec;
      if (k < todo.size() && todo[k] == i) {
        if (!fresh[k]) {
          result.interrupted = true;
          ++k;
          continue;
        }
        rec = std::move(*fresh[k]);
        ++k;
      } else {
        rec = existing.at(id);
      }
      if (rec.status == StageStatus::kept) next_inputs.push_back(i);
      records[stage - 1].push_back(rec);
      current.emplace(id, std::move(rec));
    }
    if (result.interrupted) {
      spdlog::warn("pipeline interrupted during stage {}; rerun with resume to continue", stage);
      break;
    }
    spdlog::info("stage {} ({}): {} in, {} kept", stage, kStageNames[stage - 1], inputs.size(), next_inputs.size());
    inputs = std::move(next_inputs);
    prev = std::move(current);
  }

  result.ledger = ledger_from_records(static_cast<long long>(dataset.size()), records);
  if (!result.interrupted) {
    for (const auto& r : records[3]) {
      if (r.status == StageStatus::kept) result.final.push_back(final_sample_from_json(r.payload));
    }
    std::sort(result.final.begin(), result.final.end(),
              [](const FinalSample& a, const FinalSample& b) { return a.sample.sample_id < b.sample.sample_id; });
    std::vector<Json> out;
    for (const auto& f : result.final) out.push_back(to_json(f));
    write_jsonl(run_dir / "final.jsonl", out);
    result.ledger.check();
    write_file(run_dir / "ledger.json", to_json(result.ledger).dump(2) + "\n");
  }
  return result;
}

}  // namespace vpa
