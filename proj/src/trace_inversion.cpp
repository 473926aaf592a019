#include "trinv/trace_inversion.hpp"

#include <future>
#include <regex>

#include "trinv/parsing.hpp"

namespace trinv {

namespace {

/// From the last "Final answer" marker to the end; the last non-empty line
/// when there is no marker.
std::string closing_region(const std::string& text) {
  static const std::regex marker(R"(final\s+answer)", std::regex::icase);
  std::ptrdiff_t start = -1;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker);
       it != std::sregex_iterator(); ++it) {
    start = it->position();
  }
  if (start >= 0) return text.substr(static_cast<std::size_t>(start));
  auto end = text.find_last_not_of(" \t\r\n");
  if (end == std::string::npos) return "";
  auto nl = text.rfind('\n', end);
  return text.substr(nl == std::string::npos ? 0 : nl + 1);
}

bool is_fatal(const Error& e) {
  return e.kind() == ErrorKind::FixtureMiss || e.kind() == ErrorKind::Configuration;
}

}  // namespace

ReasoningTrace generate_trace(Backend& model, const QuerySample& sample,
                              const SamplingParams& params, const PromptCatalog& prompts) {
  const Message msg{"user", apply_cot_variant(sample.prompt, prompts)};
  auto completion = chat_complete(model, std::span(&msg, 1), params);
  if (trim(completion.text).empty()) {
    throw Error(ErrorKind::DegenerateTrace, "empty reasoning trace for sample '" + sample.id + "'");
  }
  ReasoningTrace trace;
  trace.id = sample.id;
  trace.steps_text = std::move(completion.text);
  const auto options = sample.option_set();
  trace.final_answer.raw_text = closing_region(trace.steps_text);
  trace.final_answer.parsed = parse_answer(trace.steps_text, options);
  trace.final_answer.logprob_summary = std::move(completion.logprob_summary);
  return trace;
}

std::vector<Message> reconstruction_request(const ReasoningTrace& trace,
                                            const PromptCatalog& prompts) {
  return {Message{"user", render(prompts.get("trace_inversion", "reconstruct"),
                                 {{"trace", trace.steps_text}})}};
}

ReconstructedQuery reconstruct_query(Backend& model, const ReasoningTrace& trace,
                                     const SamplingParams& params, const PromptCatalog& prompts) {
  if (trim(trace.steps_text).empty()) {
    throw Error(ErrorKind::DegenerateTrace, "cannot reconstruct from an empty trace");
  }
  const auto request = reconstruction_request(trace, prompts);
  const auto completion = chat_complete(model, request, params);

  static const std::regex marker(R"(reconstructed\s+query\s*:)", std::regex::icase);
  std::size_t start = 0;
  const auto& text = completion.text;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker);
       it != std::sregex_iterator(); ++it) {
    start = static_cast<std::size_t>(it->position() + it->length());
  }
  ReconstructedQuery q{trim(std::string_view(text).substr(start)), trace.id};
  if (q.text.empty()) {
    throw Error(ErrorKind::DegenerateReconstruction,
                "empty reconstruction for trace '" + trace.id + "'");
  }
  return q;
}

std::vector<ScorerVote> run_scorers(const DecideContext& ctx, const std::string& q,
                                    const std::string& q_star, double se_threshold,
                                    std::map<std::string, std::string>& dropped) {
  const auto& b = ctx.backends;
  std::vector<std::pair<ScorerKind, std::future<ScorerVote>>> pending;
  for (auto kind : ctx.cfg.scorers.enabled) {
    switch (kind) {
      case ScorerKind::SE:
        if (!b.embedder) throw Error(ErrorKind::Configuration, "SE scorer needs an embedder");
        pending.emplace_back(kind, std::async(std::launch::async, [&] {
                               return se_vote(*b.embedder, q, q_star, se_threshold);
                             }));
        break;
      case ScorerKind::TrInvLLM:
        pending.emplace_back(kind, std::async(std::launch::async, [&] {
                               return llm_judge_vote(b.judge_model(), q, q_star,
                                                     ctx.cfg.sampling, ctx.prompts);
                             }));
        break;
      case ScorerKind::Ground:
        if (!b.guard) throw Error(ErrorKind::Configuration, "GROUND scorer needs a guard");
        pending.emplace_back(kind, std::async(std::launch::async, [&] {
                               return ground_vote(*b.guard, q, q_star);
                             }));
        break;
    }
  }
  std::vector<ScorerVote> votes;
  std::optional<Error> fatal;
  for (auto& [kind, fut] : pending) {
    try {
      votes.push_back(fut.get());
    } catch (const Error& e) {
      if (is_fatal(e)) {
        if (!fatal) fatal = e;
      } else {
        dropped[vote_key(kind)] = e.what();
      }
    }
  }
  if (fatal) throw *fatal;
  return votes;
}

AbstainDecision trace_inversion_decide(const DecideContext& ctx, const QuerySample& sample) {
  AbstainDecision d;
  d.method = Method::TraceInversion;

  ReasoningTrace trace;
  try {
    trace = generate_trace(*ctx.backends.model, sample, ctx.cfg.sampling, ctx.prompts);
  } catch (const Error& e) {
    throw DecisionError("generate_trace", e.kind(), e.what());
  }
  d.candidate = trace.final_answer;
  d.diagnostics["trace"] = trace.steps_text;

  ReconstructedQuery q_star;
  try {
    q_star = reconstruct_query(ctx.backends.reconstruction_model(), trace, ctx.cfg.sampling,
                               ctx.prompts);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegenerateReconstruction) {
      d.abstain = true;
      d.diagnostics["reconstruction"] = "degenerate";
      return d;
    }
    throw DecisionError("reconstruct_query", e.kind(), e.what());
  }
  d.diagnostics["reconstructed_query"] = q_star.text;

  const double tau = ctx.cfg.scorers.se_threshold.value_or(kDefaultSeThreshold);
  std::map<std::string, std::string> dropped;
  std::vector<ScorerVote> votes;
  try {
    votes = run_scorers(ctx, sample.prompt, q_star.text, tau, dropped);
  } catch (const Error& e) {
    throw DecisionError("scorers", e.kind(), e.what());
  }
  for (const auto& [name, why] : dropped) d.diagnostics["dropped:" + name] = why;
  if (votes.empty()) {
    throw DecisionError("scorers", ErrorKind::BackendUnavailable, "every scorer failed");
  }
  for (const auto& v : votes) {
    d.votes[vote_key(v.scorer)] = v.abstain_vote;
    d.scores[vote_key(v.scorer)] = v.score;
  }
  d.abstain = ensemble_decide(votes);
  return d;
}

}  // namespace trinv
