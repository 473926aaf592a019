#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trinv/core.hpp"
#include "trinv/llm_backend.hpp"
#include "trinv/prompts.hpp"
#include "trinv/scorers.hpp"

namespace trinv {

struct ScorerSettings {
  std::vector<ScorerKind> enabled = {ScorerKind::SE, ScorerKind::TrInvLLM, ScorerKind::Ground};
  /// Fixed SE threshold. When unset, evaluation calibrates one on the
  /// held-out split (if calibrate_se) and otherwise uses kDefaultSeThreshold.
  std::optional<double> se_threshold;
  bool calibrate_se = true;

  bool has(ScorerKind k) const;
};

struct MethodConfig {
  Method method = Method::TraceInversion;
  bool cot_variant = false;
  int k_alternatives = 3;
  std::vector<std::string> expert_domains = {"factual", "commonsense", "mathematical"};
  std::optional<double> threshold;  // p* for Probs / AskCali
  int probs_top_k = 5;
  ScorerSettings scorers;
  SamplingParams sampling;

  bool needs_calibration() const;
  void validate() const;
};

/// Endpoints used by one decision. Only `model` is mandatory; the judge and
/// reconstructor default to the model under test.
struct Backends {
  BackendPtr model;
  BackendPtr reconstructor;
  BackendPtr judge;
  BackendPtr embedder;
  BackendPtr guard;

  Backend& reconstruction_model() const { return reconstructor ? *reconstructor : *model; }
  Backend& judge_model() const { return judge ? *judge : *model; }
};

/// Everything a decision needs besides the sample itself.
struct DecideContext {
  const MethodConfig& cfg;
  const Backends& backends;
  const PromptCatalog& prompts = PromptCatalog::defaults();
  std::uint64_t seed = 0;
};

/// Runs the configured abstention method on one sample.
AbstainDecision decide_sample(const DecideContext& ctx, const QuerySample& sample);

struct ConfidenceRecord {
  std::string sample_id;
  double confidence = 0.0;  // in [0,1]
  bool correct = false;
};

/// Confidence/correctness pair used to calibrate the method's threshold on a
/// dev sample: logprob or verbalised confidence for Probs / AskCali, the
/// (clamped) q/q* cosine for Trace Inversion's SE scorer.
ConfidenceRecord calibration_record(const DecideContext& ctx, const QuerySample& sample);

/// Stores a calibrated threshold in the slot the method reads.
void apply_threshold(MethodConfig& cfg, double p_star);

/// Scorer-name key used in AbstainDecision::votes.
std::string vote_key(ScorerKind k);

}  // namespace trinv
