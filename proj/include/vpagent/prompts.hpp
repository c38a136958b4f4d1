#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace vpa {

/// Asset root: $VPAGENT_ASSET_DIR when set, else the source-tree assets/.
std::filesystem::path default_asset_dir();

/// Named text templates with "{key}" placeholders, loaded from
/// `<dir>/*.txt` (the file stem is the template name).
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir);
  /// The library under default_asset_dir()/prompts, loaded once.
  static const PromptLibrary& builtin();

  /// Throws ConfigError for unknown names.
  const std::string& get(std::string_view name) const;
  std::string render(std::string_view name, const std::map<std::string, std::string>& vars) const;
  void set(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }
  bool has(std::string_view name) const { return templates_.find(name) != templates_.end(); }

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace vpa
