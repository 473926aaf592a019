#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trinv {

struct ParseRule {
  std::string name;
  std::string pattern;
  int priority = 0;  // lower fires first
};

/// The fixed rule order used by parse_answer.
const std::vector<ParseRule>& answer_parse_rules();

/// Extracts a final answer token from free-form model output. Returns the
/// matched option upper-cased, or "Z" when no rule yields a member of
/// `options`. Markers are matched case-insensitively.
std::string parse_answer(std::string_view raw, std::span<const std::string> options);

/// YES/NO verdict; "Z" when neither is found.
std::string parse_yes_no(std::string_view raw);

/// First number in [0,1] after the last "Probability:" marker (whole text if
/// the marker is absent). "85%" reads as 0.85.
std::optional<double> parse_probability(std::string_view raw);

}  // namespace trinv
