#include "vpagent/sample.hpp"

#include "vpagent/error.hpp"

namespace vpa {

void Sample::validate() const {
  if (sample_id.empty()) throw Error(ErrorCode::SchemaViolation, "sample_id is empty");
  if (trim(question).empty()) throw Error(ErrorCode::SchemaViolation, "'" + sample_id + "': question is empty");
  if (trim(answer).empty()) throw Error(ErrorCode::SchemaViolation, "'" + sample_id + "': answer is empty");
}

Json to_json(const Sample& s) {
  Json j = {{"sample_id", s.sample_id}};
  if (s.video.duration_s > 0) j["video"] = to_json(s.video);
  else j["video"] = s.video.path.string();
  j["question"] = s.question;
  if (s.options) j["options"] = *s.options;
  j["answer"] = s.answer;
  j["source"] = s.source;
  if (s.vp_frame) j["vp_frame"] = *s.vp_frame;
  if (s.vp_type) j["vp_type"] = *s.vp_type;
  if (s.mark_number) j["mark_number"] = *s.mark_number;
  return j;
}

Sample sample_from_json(const Json& j) {
  try {
    Sample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    const auto& v = j.at("video");
    s.video = v.is_string() ? VideoRef{v.get<std::string>()} : video_ref_from_json(v);
    s.question = j.at("question").get<std::string>();
    if (j.contains("options") && !j["options"].is_null()) s.options = j["options"].get<std::vector<std::string>>();
    s.answer = j.at("answer").get<std::string>();
    s.source = j.value("source", std::string{});
    if (j.contains("vp_frame") && !j["vp_frame"].is_null()) s.vp_frame = j["vp_frame"].get<std::string>();
    if (j.contains("vp_type") && !j["vp_type"].is_null()) s.vp_type = j["vp_type"].get<std::string>();
    if (j.contains("mark_number") && !j["mark_number"].is_null()) s.mark_number = j["mark_number"].get<int>();
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("sample record: ") + e.what());
  }
}

std::vector<Sample> read_samples(const fs::path& path) {
  std::vector<Sample> out;
  for (const auto& j : read_jsonl(path)) out.push_back(sample_from_json(j));
  return out;
}

void write_samples(const fs::path& path, const std::vector<Sample>& samples) {
  std::vector<Json> records;
  records.reserve(samples.size());
  for (const auto& s : samples) records.push_back(to_json(s));
  write_jsonl(path, records);
}

void resolve_video(Sample& s, const MediaBackend& media) {
  if (s.video.duration_s > 0) return;
  s.video = media.probe(s.video.path);
}

std::string format_options(const std::optional<std::vector<std::string>>& options) {
  if (!options) return {};
  std::string out;
  for (std::size_t i = 0; i < options->size(); ++i) {
    const auto& opt = (*options)[i];
    const bool prefixed = opt.size() >= 2 && opt[0] >= 'A' && opt[0] <= 'Z' && (opt[1] == '.' || opt[1] == ')');
    if (!out.empty()) out += '\n';
    if (!prefixed) {
      out += static_cast<char>('A' + i);
      out += ". ";
    }
    out += opt;
  }
  return out;
}

}  // namespace vpa
