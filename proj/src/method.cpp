#include "trinv/method.hpp"

#include <algorithm>

#include "trinv/baselines.hpp"
#include "trinv/trace_inversion.hpp"

namespace trinv {

bool ScorerSettings::has(ScorerKind k) const {
  return std::find(enabled.begin(), enabled.end(), k) != enabled.end();
}

bool MethodConfig::needs_calibration() const {
  switch (method) {
    case Method::Probs:
    case Method::AskCali:
      return !threshold.has_value();
    case Method::TraceInversion:
      return scorers.has(ScorerKind::SE) && !scorers.se_threshold && scorers.calibrate_se;
    default:
      return false;
  }
}

void MethodConfig::validate() const {
  sampling.validate();
  if (k_alternatives < 1) throw Error(ErrorKind::Configuration, "k_alternatives must be >= 1");
  if (probs_top_k < 1) throw Error(ErrorKind::Configuration, "probs_top_k must be >= 1");
  if (threshold && (*threshold < 0.0 || *threshold > 1.0)) {
    throw Error(ErrorKind::Configuration, "threshold must lie in [0,1]");
  }
  if (method == Method::TraceInversion) {
    if (scorers.enabled.empty() || scorers.enabled.size() > 3) {
      throw Error(ErrorKind::Configuration, "Trace Inversion needs 1-3 scorers");
    }
    auto sorted = scorers.enabled;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error(ErrorKind::Configuration, "duplicate scorer in enable set");
    }
  }
  if (method == Method::Cooperate && expert_domains.empty()) {
    throw Error(ErrorKind::Configuration, "Cooperate needs at least one expert domain");
  }
}

std::string vote_key(ScorerKind k) { return std::string(to_string(k)); }

AbstainDecision decide_sample(const DecideContext& ctx, const QuerySample& sample) {
  const auto& cfg = ctx.cfg;
  if (!ctx.backends.model) throw Error(ErrorKind::Configuration, "no model backend configured");
  Backend& model = *ctx.backends.model;

  auto require_threshold = [&]() -> double {
    if (!cfg.threshold) {
      throw Error(ErrorKind::Configuration,
                  std::string(to_string(cfg.method)) + " needs a calibrated threshold");
    }
    return *cfg.threshold;
  };

  AbstainDecision d;
  switch (cfg.method) {
    case Method::TraceInversion:
      return trace_inversion_decide(ctx, sample);
    case Method::Probs: {
      const double p_star = require_threshold();
      auto r = probs_answer(model, sample, cfg, ctx.prompts);
      d = threshold_decide(r.confidence, p_star, r.answer);
      break;
    }
    case Method::AskCali: {
      const double p_star = require_threshold();
      auto r = askcali_confidence(model, sample, cfg.sampling, cfg.cot_variant, ctx.prompts);
      d = threshold_decide(r.confidence, p_star, r.answer);
      if (r.unparsed_confidence) d.diagnostics["probability_unparsed"] = "true";
      break;
    }
    case Method::Reflect:
      d = reflect_decide(model, sample, cfg.sampling, cfg.cot_variant, ctx.prompts);
      break;
    case Method::Cooperate:
      d = cooperate_decide(model, sample, cfg.expert_domains, cfg.sampling, cfg.cot_variant,
                           ctx.prompts);
      break;
    case Method::Compete:
      d = compete_decide(model, sample, cfg.k_alternatives, ctx.seed, cfg.sampling,
                         cfg.cot_variant, ctx.prompts);
      break;
  }
  d.method = cfg.method;
  return d;
}

ConfidenceRecord calibration_record(const DecideContext& ctx, const QuerySample& sample) {
  const auto& cfg = ctx.cfg;
  if (!ctx.backends.model) throw Error(ErrorKind::Configuration, "no model backend configured");
  Backend& model = *ctx.backends.model;
  ConfidenceRecord r{sample.id, 0.0, false};
  switch (cfg.method) {
    case Method::Probs: {
      auto a = probs_answer(model, sample, cfg, ctx.prompts);
      r.confidence = a.confidence;
      r.correct = !should_abstain_label(sample, a.answer);
      return r;
    }
    case Method::AskCali: {
      auto a = askcali_confidence(model, sample, cfg.sampling, cfg.cot_variant, ctx.prompts);
      r.confidence = a.confidence;
      r.correct = !should_abstain_label(sample, a.answer);
      return r;
    }
    case Method::TraceInversion: {
      if (!ctx.backends.embedder) {
        throw Error(ErrorKind::Configuration, "SE scorer needs an embedder");
      }
      auto trace = generate_trace(model, sample, cfg.sampling, ctx.prompts);
      auto q_star = reconstruct_query(ctx.backends.reconstruction_model(), trace, cfg.sampling,
                                      ctx.prompts);
      const Embedding vq = embed(*ctx.backends.embedder, sample.prompt);
      const Embedding vs = embed(*ctx.backends.embedder, q_star.text);
      r.confidence = std::clamp(cosine(vq, vs), 0.0, 1.0);
      r.correct = !should_abstain_label(sample, trace.final_answer);
      return r;
    }
    default:
      throw Error(ErrorKind::Configuration,
                  std::string(to_string(cfg.method)) + " has no calibrated threshold");
  }
}

void apply_threshold(MethodConfig& cfg, double p_star) {
  if (cfg.method == Method::TraceInversion) {
    cfg.scorers.se_threshold = p_star;
  } else {
    cfg.threshold = p_star;
  }
}

}  // namespace trinv
