#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trinv/llm_backend.hpp"
#include "trinv/prompts.hpp"

namespace trinv {

enum class ScorerKind { SE, TrInvLLM, Ground };

std::string_view to_string(ScorerKind k);
ScorerKind scorer_from_string(std::string_view s);

struct ScorerVote {
  ScorerKind scorer = ScorerKind::SE;
  bool abstain_vote = false;
  double score = 0.0;
};

/// Cosine similarity clamped to [-1, 1]. Throws on size mismatch or a zero vector.
template <class DerivedA, class DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw Error(ErrorKind::Input, "cosine: dimension mismatch (" + std::to_string(a.size()) +
                                      " vs " + std::to_string(b.size()) + ")");
  }
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) {
    throw Error(ErrorKind::DegenerateInput, "cosine: zero vector");
  }
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

inline constexpr double kDefaultSeThreshold = 0.7;

/// abstain_vote = cosine(embed(q), embed(q*)) < threshold.
ScorerVote se_vote(Backend& embedder, std::string_view q, std::string_view q_star,
                   double threshold);

/// Asks the judge whether q and q* share framing, intent and context.
/// NO or an unparseable verdict votes to abstain.
ScorerVote llm_judge_vote(Backend& judge, std::string_view q, std::string_view q_star,
                          const SamplingParams& params,
                          const PromptCatalog& prompts = PromptCatalog::defaults());

/// abstain_vote = groundedness risk of claim q* against context q.
ScorerVote ground_vote(Backend& guard, std::string_view q, std::string_view q_star);

/// Strict majority of abstain votes; an even split abstains. Throws
/// Error(Configuration) on an empty list.
bool ensemble_decide(std::span<const ScorerVote> votes);

}  // namespace trinv
