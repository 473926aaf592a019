#include "trinv/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

#include "trinv/parsing.hpp"

namespace trinv {

namespace {

const std::vector<std::string>& true_false() {
  static const std::vector<std::string> ab = {"A", "B"};
  return ab;
}

bool is_fatal(const Error& e) {
  return e.kind() == ErrorKind::FixtureMiss || e.kind() == ErrorKind::Configuration;
}

std::string ask(Backend& model, const std::string& prompt, const SamplingParams& params) {
  const Message msg{"user", prompt};
  return chat_complete(model, std::span(&msg, 1), params).text;
}

/// Verdict A (True) answers; B (False) or an unparseable verdict abstains.
void apply_true_false_verdict(AbstainDecision& d, const std::string& raw) {
  const auto verdict = parse_answer(raw, true_false());
  d.diagnostics["verdict"] = verdict;
  if (verdict == kUnparsed) d.diagnostics["verdict_unparsed"] = "true";
  d.abstain = verdict != "A";
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

double probs_confidence(const ModelAnswer& answer, int k) {
  if (k < 1) throw Error(ErrorKind::Configuration, "Probs needs k >= 1");
  if (!answer.logprob_summary || answer.logprob_summary->empty()) {
    throw Error(ErrorKind::Capability, "Probs needs token logprobs over the answer span");
  }
  const auto& span = *answer.logprob_summary;
  double total = 0.0;
  for (const auto& position : span) {
    if (position.size() < static_cast<std::size_t>(k)) {
      throw Error(ErrorKind::Protocol, "answer position has " + std::to_string(position.size()) +
                                           " logprobs, need top-" + std::to_string(k));
    }
    double inner = 0.0;
    for (int j = 0; j < k; ++j) inner += position[static_cast<std::size_t>(j)].second;
    total += inner / k;
  }
  const double mean = total / static_cast<double>(span.size());
  return std::exp(mean);
}

std::vector<double> calibration_grid() {
  std::vector<double> grid;
  grid.reserve(99);
  for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
  return grid;
}

double calibrate_threshold(std::span<const ConfidenceRecord> dev) {
  if (dev.empty()) throw Error(ErrorKind::Calibration, "calibration needs a nonempty dev set");
  std::vector<ConfidenceRecord> sorted(dev.begin(), dev.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.confidence < b.confidence; });

  // Sweep thresholds upward; records with p < t move from "answered" to
  // "abstained".
  std::int64_t wrong_answered =
      std::count_if(sorted.begin(), sorted.end(), [](const auto& r) { return !r.correct; });
  std::int64_t correct_abstained = 0;
  std::size_t next = 0;
  double best_t = 0.0;
  std::int64_t best_err = -1;
  for (double t : calibration_grid()) {
    while (next < sorted.size() && sorted[next].confidence < t) {
      sorted[next].correct ? ++correct_abstained : --wrong_answered;
      ++next;
    }
    const auto err = correct_abstained + wrong_answered;
    if (best_err < 0 || err < best_err) {
      best_err = err;
      best_t = t;
    }
  }
  return best_t;
}

AbstainDecision threshold_decide(double p, double p_star, const ModelAnswer& answer) {
  AbstainDecision d;
  d.abstain = p < p_star;
  d.candidate = answer;
  d.scores["confidence"] = p;
  d.scores["threshold"] = p_star;
  return d;
}

ModelAnswer answer_question(Backend& model, const QuerySample& sample,
                            const SamplingParams& params, bool cot_variant,
                            const PromptCatalog& prompts) {
  const Message msg{"user", cot_variant ? apply_cot_variant(sample.prompt, prompts)
                                        : sample.prompt};
  auto completion = chat_complete(model, std::span(&msg, 1), params);
  ModelAnswer a;
  a.raw_text = std::move(completion.text);
  a.parsed = parse_answer(a.raw_text, sample.option_set());
  a.logprob_summary = std::move(completion.logprob_summary);
  return a;
}

ConfidenceAnswer probs_answer(Backend& model, const QuerySample& sample, const MethodConfig& cfg,
                              const PromptCatalog& prompts) {
  if (!model.supports_logprobs()) {
    throw Error(ErrorKind::Capability,
                "backend '" + model.endpoint().model_id + "' cannot return logprobs");
  }
  SamplingParams params = cfg.sampling;
  params.want_logprobs = true;
  params.top_k_logprobs = cfg.probs_top_k;
  ConfidenceAnswer out;
  out.answer = answer_question(model, sample, params, cfg.cot_variant, prompts);
  out.confidence = probs_confidence(out.answer, cfg.probs_top_k);
  return out;
}

ConfidenceAnswer askcali_confidence(Backend& model, const QuerySample& sample,
                                    const SamplingParams& params, bool cot_variant,
                                    const PromptCatalog& prompts) {
  std::string guess_prompt =
      render(prompts.get("askcali", "guess"), {{"question", sample.prompt}});
  if (cot_variant) guess_prompt = apply_cot_variant(guess_prompt, prompts);

  std::vector<Message> convo = {{"user", guess_prompt}};
  const auto guess = chat_complete(model, convo, params);
  convo.push_back({"assistant", guess.text});
  convo.push_back({"user", prompts.get("askcali", "probability")});
  const auto prob = chat_complete(model, convo, params);

  ConfidenceAnswer out;
  out.answer.raw_text = guess.text;
  out.answer.parsed = parse_answer(guess.text, sample.option_set());
  if (auto p = parse_probability(prob.text)) {
    out.confidence = *p;
  } else {
    out.confidence = 0.0;
    out.unparsed_confidence = true;
  }
  return out;
}

AbstainDecision reflect_decide(Backend& model, const QuerySample& sample,
                               const SamplingParams& params, bool cot_variant,
                               const PromptCatalog& prompts) {
  AbstainDecision d;
  d.method = Method::Reflect;
  d.candidate = answer_question(model, sample, params, cot_variant, prompts);
  const auto verdict = ask(model,
                           render(prompts.get("reflect", "verdict"),
                                  {{"question", sample.prompt},
                                   {"answer", trim(d.candidate.raw_text)}}),
                           params);
  apply_true_false_verdict(d, verdict);
  return d;
}

AbstainDecision cooperate_decide(Backend& model, const QuerySample& sample,
                                 std::span<const std::string> domains,
                                 const SamplingParams& params, bool cot_variant,
                                 const PromptCatalog& prompts) {
  if (domains.empty()) throw Error(ErrorKind::Configuration, "Cooperate needs expert domains");
  AbstainDecision d;
  d.method = Method::Cooperate;
  d.candidate = answer_question(model, sample, params, cot_variant, prompts);
  const std::string answer = trim(d.candidate.raw_text);

  std::vector<std::future<std::string>> experts;
  for (const auto& domain : domains) {
    experts.push_back(std::async(std::launch::async, [&, domain] {
      const auto knowledge = ask(model,
                                 render(prompts.get("cooperate", "knowledge"),
                                        {{"question", sample.prompt},
                                         {"answer", answer},
                                         {"domain", domain}}),
                                 params);
      return ask(model,
                 render(prompts.get("cooperate", "feedback"),
                        {{"knowledge", trim(knowledge)},
                         {"question", sample.prompt},
                         {"answer", answer}}),
                 params);
    }));
  }
  std::vector<std::string> feedbacks;
  std::optional<Error> fatal;
  for (std::size_t i = 0; i < experts.size(); ++i) {
    try {
      feedbacks.push_back(trim(experts[i].get()));
    } catch (const Error& e) {
      if (is_fatal(e) && !fatal) fatal = e;
      d.diagnostics["dropped:" + std::string(domains[i])] = e.what();
    }
  }
  if (fatal) throw *fatal;
  if (feedbacks.empty()) {
    throw DecisionError("cooperate_experts", ErrorKind::BackendUnavailable,
                        "every expert failed");
  }
  std::string joined;
  for (std::size_t i = 0; i < feedbacks.size(); ++i) {
    if (i) joined += "; ";
    joined += "Feedback " + std::to_string(i + 1) + ": " + feedbacks[i];
  }
  d.scores["experts"] = static_cast<double>(feedbacks.size());
  const auto verdict = ask(model,
                           render(prompts.get("cooperate", "verdict"),
                                  {{"question", sample.prompt},
                                   {"answer", answer},
                                   {"feedbacks", joined}}),
                           params);
  apply_true_false_verdict(d, verdict);
  return d;
}

std::vector<std::string> compete_alternatives(std::span<const std::string> options,
                                              const std::string& chosen, int k,
                                              std::uint64_t seed, const std::string& sample_id) {
  if (k < 1) throw Error(ErrorKind::Configuration, "Compete needs k >= 1");
  if (options.size() < 2) {
    throw Error(ErrorKind::Input, "Compete needs at least two options");
  }
  std::vector<std::string> unchosen;
  const auto chosen_upper = to_upper(trim(chosen));
  for (const auto& o : options) {
    if (to_upper(trim(o)) != chosen_upper) unchosen.push_back(to_upper(trim(o)));
  }
  std::mt19937_64 rng(mix_seed(seed, sample_id));
  std::shuffle(unchosen.begin(), unchosen.end(), rng);
  std::vector<std::string> out;
  for (int i = 0; i < k; ++i) out.push_back(unchosen[static_cast<std::size_t>(i) % unchosen.size()]);
  return out;
}

AbstainDecision compete_decide(Backend& model, const QuerySample& sample, int k,
                               std::uint64_t seed, const SamplingParams& params,
                               bool cot_variant, const PromptCatalog& prompts) {
  AbstainDecision d;
  d.method = Method::Compete;
  d.candidate = answer_question(model, sample, params, cot_variant, prompts);
  const auto options = sample.option_set();
  const auto alternatives = compete_alternatives(options, d.candidate.parsed, k, seed, sample.id);

  std::vector<std::future<std::string>> rounds;
  for (const auto& alt : alternatives) {
    rounds.push_back(std::async(std::launch::async, [&, alt] {
      const auto knowledge = ask(model,
                                 render(prompts.get("compete", "knowledge"),
                                        {{"question", sample.prompt}, {"alternative", alt}}),
                                 params);
      const auto reanswer = ask(model,
                                render(prompts.get("compete", "reanswer"),
                                       {{"knowledge", trim(knowledge)},
                                        {"question", sample.prompt}}),
                                params);
      return parse_answer(reanswer, options);
    }));
  }
  int completed = 0;
  int changed = 0;
  std::string trail;
  std::optional<Error> fatal;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    try {
      const auto answer = rounds[i].get();
      ++completed;
      if (answer != d.candidate.parsed) ++changed;
      trail += (trail.empty() ? "" : ",") + alternatives[i] + "->" + answer;
    } catch (const Error& e) {
      if (is_fatal(e) && !fatal) fatal = e;
      d.diagnostics["dropped:round" + std::to_string(i + 1)] = e.what();
    }
  }
  if (fatal) throw *fatal;
  if (completed == 0) {
    throw DecisionError("compete_rounds", ErrorKind::BackendUnavailable, "every round failed");
  }
  d.diagnostics["rounds"] = trail;
  d.scores["changed_fraction"] = static_cast<double>(changed) / completed;
  d.abstain = 2 * changed > completed;
  return d;
}

}  // namespace trinv
