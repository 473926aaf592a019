#include "trinv/scorers.hpp"

#include "trinv/parsing.hpp"

namespace trinv {

std::string_view to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::SE: return "SE";
    case ScorerKind::TrInvLLM: return "TrInv-LLM";
    case ScorerKind::Ground: return "GROUND";
  }
  return "SE";
}

ScorerKind scorer_from_string(std::string_view s) {
  const auto u = to_upper(s);
  if (u == "SE") return ScorerKind::SE;
  if (u == "TRINV-LLM" || u == "TRINVLLM" || u == "LLM") return ScorerKind::TrInvLLM;
  if (u == "GROUND") return ScorerKind::Ground;
  throw Error(ErrorKind::Configuration, "unknown scorer '" + std::string(s) + "'");
}

ScorerVote se_vote(Backend& embedder, std::string_view q, std::string_view q_star,
                   double threshold) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw Error(ErrorKind::Configuration, "SE threshold must lie in [0,1]");
  }
  const Embedding vq = embed(embedder, q);
  const Embedding vs = embed(embedder, q_star);
  const double sim = cosine(vq, vs);
  return {ScorerKind::SE, sim < threshold, sim};
}

ScorerVote llm_judge_vote(Backend& judge, std::string_view q, std::string_view q_star,
                          const SamplingParams& params, const PromptCatalog& prompts) {
  const std::string prompt =
      render(prompts.get("trace_inversion", "judge"), {{"q1", q}, {"q2", q_star}});
  const Message msg{"user", prompt};
  const auto completion = chat_complete(judge, std::span(&msg, 1), params);
  const auto verdict = parse_yes_no(completion.text);
  const bool same = verdict == "YES";
  return {ScorerKind::TrInvLLM, !same, same ? 1.0 : 0.0};
}

ScorerVote ground_vote(Backend& guard, std::string_view q, std::string_view q_star) {
  const auto g = groundedness_check(guard, q, q_star);
  return {ScorerKind::Ground, g.risk, g.score.value_or(g.risk ? 1.0 : 0.0)};
}

bool ensemble_decide(std::span<const ScorerVote> votes) {
  if (votes.empty()) {
    throw Error(ErrorKind::Configuration, "ensemble_decide: no votes");
  }
  const auto yes = std::count_if(votes.begin(), votes.end(),
                                 [](const ScorerVote& v) { return v.abstain_vote; });
  const auto n = static_cast<std::ptrdiff_t>(votes.size());
  return 2 * yes >= n;
}

}  // namespace trinv
