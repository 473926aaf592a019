#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "trinv/error.hpp"
#include "trinv/prompts.hpp"

using namespace trinv;

TEST_CASE("apply_cot_variant appends the instruction once") {
  const auto& instr = PromptCatalog::defaults().get("common", "cot_instruction");
  CHECK(instr ==
        "Provide step-by-step reasoning, with `Step 1:', `Step 2:', etc. followed by "
        "`Final answer:.'");
  const auto once = apply_cot_variant("What is 2+2?");
  CHECK(once == "What is 2+2?\n" + instr);
  CHECK(apply_cot_variant(once) == once);
}

TEST_CASE("render substitutes known placeholders only") {
  CHECK(render("Q: {question} {other}", {{"question", "why?"}}) == "Q: why? {other}");
  CHECK(render("{a}{a}", {{"a", "x"}}) == "xx");
  CHECK(render("Example: {most likely guess}.", {{"question", "q"}}) ==
        "Example: {most likely guess}.");
}

TEST_CASE("verbatim prompts") {
  const auto& c = PromptCatalog::defaults();
  CHECK(c.get("trace_inversion", "reconstruct").rfind("You are a puzzle solver.", 0) == 0);
  CHECK(c.get("trace_inversion", "judge").find("convey the same framing, intent, and context") !=
        std::string::npos);
  CHECK(c.get("askcali", "probability").find("Provide the probability your guess is correct.") !=
        std::string::npos);
  CHECK(c.get("cooperate", "verdict").find("Based on feedback, is the proposed answer correct?") !=
        std::string::npos);
  CHECK_THROWS_AS(c.get("nope", "stage"), Error);
}

TEST_CASE("shipped catalog matches the built-in defaults") {
  const std::filesystem::path path =
      std::filesystem::path(TRINV_SOURCE_DIR) / "prompts" / "default_catalog.json";
  const auto loaded = PromptCatalog::load(path);
  CHECK(loaded.entries() == PromptCatalog::defaults().entries());
  std::ifstream in(path);
  const auto shipped = nlohmann::json::parse(in);
  CHECK(shipped == nlohmann::json::parse(PromptCatalog::defaults().to_json()));
}

TEST_CASE("a partial catalog overrides only its stages") {
  const auto path = std::filesystem::temp_directory_path() / "trinv_partial_catalog.json";
  {
    std::ofstream out(path);
    out << R"({"version": 2, "prompts": {"reflect": {"verdict": "Is {answer} right?"}}})";
  }
  const auto c = PromptCatalog::load(path);
  CHECK(c.version() == 2);
  CHECK(c.get("reflect", "verdict") == "Is {answer} right?");
  CHECK(c.get("askcali", "guess") == PromptCatalog::defaults().get("askcali", "guess"));
  std::filesystem::remove(path);
}
