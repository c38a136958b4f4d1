#include "vpagent/prompts.hpp"

#include <cstdlib>

#include "vpagent/error.hpp"
#include "vpagent/util.hpp"

namespace vpa {

std::filesystem::path default_asset_dir() {
  if (const char* env = std::getenv("VPAGENT_ASSET_DIR"); env && *env) return env;
  return VPAGENT_DEFAULT_ASSET_DIR;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::ConfigError, "prompt directory missing: " + dir.string());
  PromptLibrary lib;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    auto text = read_file(entry.path());
    // Templates are stored with a trailing newline for editors; drop it.
    if (!text.empty() && text.back() == '\n') text.pop_back();
    lib.templates_[entry.path().stem().string()] = std::move(text);
  }
  return lib;
}

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary lib = load(default_asset_dir() / "prompts");
  return lib;
}

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorCode::ConfigError, "unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

std::string PromptLibrary::render(std::string_view name, const std::map<std::string, std::string>& vars) const {
  return render_template(get(name), vars);
}

}  // namespace vpa
