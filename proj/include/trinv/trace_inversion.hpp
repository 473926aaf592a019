#pragma once

#include <string>

#include "trinv/method.hpp"

namespace trinv {

struct ReasoningTrace {
  std::string id;
  std::string steps_text;
  ModelAnswer final_answer;  // raw_text is the closing region of steps_text
};

struct ReconstructedQuery {
  std::string text;
  std::string source_trace_id;
};

/// Elicits a step-by-step trace for the sample and parses its final answer.
ReasoningTrace generate_trace(Backend& model, const QuerySample& sample,
                              const SamplingParams& params,
                              const PromptCatalog& prompts = PromptCatalog::defaults());

/// Inverts a trace into the query it most plausibly answers. The request
/// carries the trace and nothing else from the original exchange.
ReconstructedQuery reconstruct_query(Backend& model, const ReasoningTrace& trace,
                                     const SamplingParams& params,
                                     const PromptCatalog& prompts = PromptCatalog::defaults());

/// The message list reconstruct_query sends; exposed for payload checks.
std::vector<Message> reconstruction_request(const ReasoningTrace& trace,
                                            const PromptCatalog& prompts = PromptCatalog::defaults());

/// Trace -> reconstruction -> enabled scorers -> majority vote.
AbstainDecision trace_inversion_decide(const DecideContext& ctx, const QuerySample& sample);

/// Votes of all enabled scorers for (q, q*); failing scorers are dropped and
/// listed in `dropped` (name -> reason).
std::vector<ScorerVote> run_scorers(const DecideContext& ctx, const std::string& q,
                                    const std::string& q_star, double se_threshold,
                                    std::map<std::string, std::string>& dropped);

}  // namespace trinv
