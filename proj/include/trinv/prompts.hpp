#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>

namespace trinv {

/// Prompt templates keyed by (method, stage). Placeholders look like
/// "{question}"; unknown placeholders are left untouched.
class PromptCatalog {
 public:
  /// The built-in catalog (version 1).
  static const PromptCatalog& defaults();
  /// Loads a catalog file; stages missing from the file fall back to defaults.
  static PromptCatalog load(const std::filesystem::path& path);

  const std::string& get(std::string_view method, std::string_view stage) const;
  void set(std::string method, std::string stage, std::string text);
  int version() const { return version_; }

  std::string to_json() const;
  const std::map<std::pair<std::string, std::string>, std::string>& entries() const {
    return entries_;
  }

 private:
  int version_ = 1;
  std::map<std::pair<std::string, std::string>, std::string> entries_;
};

std::string render(std::string_view tmpl,
                   std::initializer_list<std::pair<std::string_view, std::string_view>> vars);

}  // namespace trinv

namespace trinv {

/// Appends the step-by-step instruction on a new line. Applying it to a
/// prompt that already ends with the instruction returns the prompt as is.
std::string apply_cot_variant(std::string_view base_prompt,
                              const PromptCatalog& prompts = PromptCatalog::defaults());

}  // namespace trinv
