#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trinv/method.hpp"

namespace trinv {

/// Geometric-mean probability of the top-k tokens over the answer span:
/// exp( (1/L) sum_t (1/k) sum_j log P_t(j) ).
double probs_confidence(const ModelAnswer& answer, int k);

/// Threshold grid {0.01, ..., 0.99}.
std::vector<double> calibration_grid();

/// Smallest grid threshold minimising
/// E(t) = #{p < t and correct} + #{p >= t and wrong}.
double calibrate_threshold(std::span<const ConfidenceRecord> dev);

/// Answers when p >= p*, abstains otherwise.
AbstainDecision threshold_decide(double p, double p_star, const ModelAnswer& answer);

/// First answering turn shared by Probs, Reflect, Cooperate and Compete.
ModelAnswer answer_question(Backend& model, const QuerySample& sample,
                            const SamplingParams& params, bool cot_variant,
                            const PromptCatalog& prompts = PromptCatalog::defaults());

struct ConfidenceAnswer {
  ModelAnswer answer;
  double confidence = 0.0;
  bool unparsed_confidence = false;
};

/// Probs answer plus its logprob confidence. Throws Error(Capability) when the
/// backend cannot return logprobs.
ConfidenceAnswer probs_answer(Backend& model, const QuerySample& sample, const MethodConfig& cfg,
                              const PromptCatalog& prompts = PromptCatalog::defaults());

/// Verbalised guess followed by a verbalised probability. An unparseable
/// probability reads as 0 and sets unparsed_confidence.
ConfidenceAnswer askcali_confidence(Backend& model, const QuerySample& sample,
                                    const SamplingParams& params, bool cot_variant = false,
                                    const PromptCatalog& prompts = PromptCatalog::defaults());

AbstainDecision reflect_decide(Backend& model, const QuerySample& sample,
                               const SamplingParams& params, bool cot_variant = false,
                               const PromptCatalog& prompts = PromptCatalog::defaults());

AbstainDecision cooperate_decide(Backend& model, const QuerySample& sample,
                                 std::span<const std::string> domains,
                                 const SamplingParams& params, bool cot_variant = false,
                                 const PromptCatalog& prompts = PromptCatalog::defaults());

/// Alternative option for each of the k rounds: the unchosen options shuffled
/// by a generator seeded from (seed, sample_id), reused round-robin.
std::vector<std::string> compete_alternatives(std::span<const std::string> options,
                                              const std::string& chosen, int k,
                                              std::uint64_t seed, const std::string& sample_id);

AbstainDecision compete_decide(Backend& model, const QuerySample& sample, int k,
                               std::uint64_t seed, const SamplingParams& params,
                               bool cot_variant = false,
                               const PromptCatalog& prompts = PromptCatalog::defaults());

}  // namespace trinv
