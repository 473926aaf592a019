#include "trinv/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>

#include "trinv/core.hpp"

namespace trinv {

namespace {

const std::regex& final_answer_marker() {
  static const std::regex re(R"(final\s+answer\s*(?:is\b)?\s*[:\-]?)", std::regex::icase);
  return re;
}
const std::regex& answer_marker() {
  static const std::regex re(R"(\banswer\s*(?:is\b)?\s*[:\-])", std::regex::icase);
  return re;
}
const std::regex& correct_answer_marker() {
  static const std::regex re(
      R"(correct\s+(?:answer|option|choice)\s+is\s*[:\-]?\s*(?:option\s+|choice\s+)?)",
      std::regex::icase);
  return re;
}

bool is_wrap(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0 ||
         std::string_view("*()[]{}.:,;!?\"'`_").find(c) != std::string_view::npos;
}

std::optional<std::string> match_option(std::string_view token,
                                        std::span<const std::string> options,
                                        bool strict_single_letter_case) {
  if (token.empty()) return std::nullopt;
  const std::string upper = to_upper(token);
  for (const auto& opt : options) {
    const std::string canon = to_upper(trim(opt));
    if (canon != upper) continue;
    if (strict_single_letter_case && canon.size() == 1 && token != canon) continue;
    return canon;
  }
  return std::nullopt;
}

/// The word right after a marker, skipping wrapping punctuation.
std::string_view token_after(std::string_view text, std::size_t pos) {
  while (pos < text.size() && is_wrap(text[pos])) ++pos;
  std::size_t end = pos;
  while (end < text.size() && std::isalnum(static_cast<unsigned char>(text[end]))) ++end;
  return text.substr(pos, end - pos);
}

std::optional<std::string> last_marker_match(std::string_view raw, const std::regex& marker,
                                             std::span<const std::string> options) {
  std::optional<std::string> found;
  const std::string text(raw);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker);
       it != std::sregex_iterator(); ++it) {
    const auto pos = static_cast<std::size_t>(it->position() + it->length());
    if (auto m = match_option(token_after(text, pos), options, false)) found = m;
  }
  return found;
}

std::vector<std::string_view> lines_of(std::string_view raw) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto nl = raw.find('\n', start);
    if (nl == std::string_view::npos) nl = raw.size();
    lines.push_back(raw.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::optional<std::string> bare_option_line(std::string_view raw,
                                            std::span<const std::string> options) {
  std::optional<std::string> found;
  for (auto line : lines_of(raw)) {
    while (!line.empty() && is_wrap(line.front())) line.remove_prefix(1);
    while (!line.empty() && is_wrap(line.back())) line.remove_suffix(1);
    if (auto m = match_option(line, options, false)) found = m;
  }
  return found;
}

std::optional<std::string> last_token_in_final_line(std::string_view raw,
                                                    std::span<const std::string> options) {
  auto lines = lines_of(raw);
  auto it = std::find_if(lines.rbegin(), lines.rend(),
                         [](std::string_view l) { return !trim(l).empty(); });
  if (it == lines.rend()) return std::nullopt;
  const std::string_view line = *it;
  std::optional<std::string> found;
  std::size_t i = 0;
  while (i < line.size()) {
    if (!std::isalnum(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && std::isalnum(static_cast<unsigned char>(line[j]))) ++j;
    if (auto m = match_option(line.substr(i, j - i), options, true)) found = m;
    i = j;
  }
  return found;
}

}  // namespace

const std::vector<ParseRule>& answer_parse_rules() {
  static const std::vector<ParseRule> rules = {
      {"final-answer", "Final answer: X", 1},
      {"answer", "Answer: X", 2},
      {"correct-answer", "The correct answer is X", 3},
      {"bare-option-line", "a line holding only X (punctuation allowed)", 4},
      {"last-token", "last standalone X on the final non-empty line", 5},
  };
  return rules;
}

std::string parse_answer(std::string_view raw, std::span<const std::string> options) {
  if (options.empty() || trim(raw).empty()) return std::string(kUnparsed);
  if (auto m = last_marker_match(raw, final_answer_marker(), options)) return *m;
  if (auto m = last_marker_match(raw, answer_marker(), options)) return *m;
  if (auto m = last_marker_match(raw, correct_answer_marker(), options)) return *m;
  if (auto m = bare_option_line(raw, options)) return *m;
  if (auto m = last_token_in_final_line(raw, options)) return *m;
  return std::string(kUnparsed);
}

std::string parse_yes_no(std::string_view raw) {
  static const std::vector<std::string> yes_no = {"YES", "NO"};
  return parse_answer(raw, yes_no);
}

std::optional<double> parse_probability(std::string_view raw) {
  static const std::regex marker(R"(probability\s*[:=]?)", std::regex::icase);
  static const std::regex number(R"((\d*\.\d+|\d+)(\s*%)?)");
  const std::string text(raw);
  std::size_t start = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker);
       it != std::sregex_iterator(); ++it) {
    start = static_cast<std::size_t>(it->position() + it->length());
  }
  const std::string tail = text.substr(start);
  for (auto it = std::sregex_iterator(tail.begin(), tail.end(), number);
       it != std::sregex_iterator(); ++it) {
    double v = std::stod((*it)[1].str());
    if ((*it)[2].matched) v /= 100.0;
    if (v >= 0.0 && v <= 1.0) return v;
  }
  return std::nullopt;
}

}  // namespace trinv
