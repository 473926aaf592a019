#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trinv/error.hpp"

namespace trinv {

enum class DomainGroup { MathKnowledge, Comprehension, BiasesSafety, Other };

enum class Scenario {
  Unanswerable,
  UnderspecifiedContext,
  UnderspecifiedAim,
  FalsePremise,
  Subjective,
  Answerable,
};

enum class Method { TraceInversion, Probs, AskCali, Reflect, Cooperate, Compete };

std::string_view to_string(DomainGroup g);
std::string_view to_string(Scenario s);
std::string_view to_string(Method m);
DomainGroup domain_group_from_string(std::string_view s);
Scenario scenario_from_string(std::string_view s);
Method method_from_string(std::string_view s);

/// The nine benchmark names in table order; anything else is a custom dataset.
std::span<const std::string_view> canonical_datasets();
/// Default domain for a dataset name (Other for custom names).
DomainGroup default_domain(std::string_view dataset);
/// The dataset of each domain that mixes in unanswerable queries (UMWP, Quail, BBQ).
std::optional<std::string_view> unanswerable_dataset(DomainGroup g);

inline constexpr std::string_view kUnparsed = "Z";

struct QuerySample {
  std::string id;
  std::string prompt;
  bool answerable = true;
  std::vector<std::string> references;
  std::vector<std::string> options;  // option letters; empty means A-D
  std::string dataset = "custom";
  DomainGroup domain_group = DomainGroup::Other;
  std::optional<Scenario> scenario;

  std::vector<std::string> option_set() const;
  /// Throws Error(Input) when an invariant is violated.
  void validate() const;
};

/// position -> top-k (token, logprob)
using LogprobSummary = std::vector<std::vector<std::pair<std::string, double>>>;

struct ModelAnswer {
  std::string raw_text;
  std::string parsed{kUnparsed};
  std::optional<LogprobSummary> logprob_summary;

  bool unparsed() const { return parsed == kUnparsed; }
};

struct AbstainDecision {
  bool abstain = false;
  ModelAnswer candidate;
  std::map<std::string, bool> votes;
  std::map<std::string, double> scores;
  std::map<std::string, std::string> diagnostics;
  Method method = Method::TraceInversion;
  std::int64_t latency_ms = 0;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

bool should_abstain_label(const QuerySample& sample, const ModelAnswer& candidate);

ConfusionCounts tally(std::span<const AbstainDecision> decisions,
                      std::span<const QuerySample> samples);

double abstain_accuracy(const ConfusionCounts& c);
double reliable_accuracy(const ConfusionCounts& c);

/// Reliable accuracy, or nullopt when every decision abstained.
std::optional<double> try_reliable_accuracy(const ConfusionCounts& c);

std::string trim(std::string_view s);
std::string to_upper(std::string_view s);

}  // namespace trinv
