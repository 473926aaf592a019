#include "trinv/prompts.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

#include "trinv/error.hpp"

namespace trinv {

namespace {

PromptCatalog build_defaults() {
  PromptCatalog c;
  // Chain-of-thought instruction appended to the user query.
  c.set("common", "cot_instruction",
        "Provide step-by-step reasoning, with `Step 1:', `Step 2:', etc. followed by "
        "`Final answer:.'");

  c.set("trace_inversion", "reconstruct",
        "You are a puzzle solver. Given the following reasoning trace, reconstruct the "
        "initial question by interpreting the steps in the reasoning trace. Do not answer "
        "the question.\n"
        "Reasoning Trace:\n"
        "{trace}\n"
        "\n"
        "Reconstructed query:");
  c.set("trace_inversion", "judge",
        "Do the following two prompts convey the same framing, intent, and context?\n"
        "\n"
        "Prompt 1: {q1}\n"
        "Prompt 2: {q2}\n"
        "\n"
        "Select YES or NO:\n"
        "Final answer:");

  c.set("askcali", "guess",
        "Provide your best guess for the following question. Give only the guess.\n"
        "Example: {most likely guess}.\n"
        "Question: {question}.");
  c.set("askcali", "probability",
        "Provide the probability your guess is correct.\n"
        "Probability:");

  c.set("reflect", "verdict",
        "Question: {question}. Answer: {answer}.\n"
        "Is the above answer correct? A. True  B. False.\n"
        "Final answer:");

  c.set("cooperate", "knowledge",
        "Question: {question}. Answer: {answer}.\n"
        "For the domain \"{domain}\", generate domain-specific knowledge.\n"
        "Knowledge:");
  c.set("cooperate", "feedback",
        "Knowledge: {knowledge}\n"
        "Question: {question}.\n"
        "Answer: {answer}.\n"
        "Review the proposed answer and provide feedback on correctness.");
  c.set("cooperate", "verdict",
        "Question: {question}. Answer: {answer}.\n"
        "{feedbacks}.\n"
        "Based on feedback, is the proposed answer correct? A. True  B. False.\n"
        "Final answer:");

  c.set("compete", "knowledge",
        "Question: {question}.\n"
        "Alternative answer: {alternative}.\n"
        "Generate supporting knowledge.\n"
        "Knowledge:");
  c.set("compete", "reanswer",
        "Knowledge: {knowledge}\n"
        "Question: {question}.\n"
        "Answer the question using this knowledge.\n"
        "New answer:");
  return c;
}

}  // namespace

const PromptCatalog& PromptCatalog::defaults() {
  static const PromptCatalog c = build_defaults();
  return c;
}

PromptCatalog PromptCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open prompt catalog " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Configuration, "prompt catalog " + path.string() + ": " + e.what());
  }
  PromptCatalog c = defaults();
  c.version_ = j.value("version", 1);
  if (auto it = j.find("prompts"); it != j.end()) {
    for (auto m = it->begin(); m != it->end(); ++m) {
      for (auto s = m->begin(); s != m->end(); ++s) {
        c.set(m.key(), s.key(), s->get<std::string>());
      }
    }
  }
  return c;
}

const std::string& PromptCatalog::get(std::string_view method, std::string_view stage) const {
  auto it = entries_.find({std::string(method), std::string(stage)});
  if (it == entries_.end()) {
    throw Error(ErrorKind::Configuration,
                "prompt catalog has no " + std::string(method) + "/" + std::string(stage));
  }
  return it->second;
}

void PromptCatalog::set(std::string method, std::string stage, std::string text) {
  entries_[{std::move(method), std::move(stage)}] = std::move(text);
}

std::string PromptCatalog::to_json() const {
  nlohmann::json j;
  j["version"] = version_;
  for (const auto& [key, text] : entries_) j["prompts"][key.first][key.second] = text;
  return j.dump(2);
}

std::string render(std::string_view tmpl,
                   std::initializer_list<std::pair<std::string_view, std::string_view>> vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [key, value] : vars) {
          if (key == name) {
            out += value;
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace trinv

namespace trinv {

std::string apply_cot_variant(std::string_view base_prompt, const PromptCatalog& prompts) {
  const auto& instruction = prompts.get("common", "cot_instruction");
  if (base_prompt.size() >= instruction.size() &&
      base_prompt.substr(base_prompt.size() - instruction.size()) == instruction) {
    return std::string(base_prompt);
  }
  std::string out(base_prompt);
  out += '\n';
  out += instruction;
  return out;
}

}  // namespace trinv
