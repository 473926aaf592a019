#include "trinv/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace trinv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Input: return "input";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::BackendUnavailable: return "backend-unavailable";
    case ErrorKind::Transient: return "transient";
    case ErrorKind::FixtureMiss: return "fixture-miss";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::DegenerateInput: return "degenerate-input";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::Calibration: return "calibration";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::DegenerateTrace: return "degenerate-trace";
    case ErrorKind::DegenerateReconstruction: return "degenerate-reconstruction";
    case ErrorKind::Decision: return "decision";
    case ErrorKind::EmptyTable: return "empty-table";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

namespace {

constexpr std::array<std::string_view, 9> kDatasets = {
    "MMLU", "GSM-MC", "UMWP", "K-Crosswords", "Hellaswag",
    "Quail", "Misconceptions", "Propaganda", "BBQ"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::span<const std::string_view> canonical_datasets() { return kDatasets; }

DomainGroup default_domain(std::string_view dataset) {
  for (std::size_t i = 0; i < kDatasets.size(); ++i) {
    if (iequals(kDatasets[i], dataset)) {
      return static_cast<DomainGroup>(i / 3);
    }
  }
  return DomainGroup::Other;
}

std::optional<std::string_view> unanswerable_dataset(DomainGroup g) {
  switch (g) {
    case DomainGroup::MathKnowledge: return "UMWP";
    case DomainGroup::Comprehension: return "Quail";
    case DomainGroup::BiasesSafety: return "BBQ";
    case DomainGroup::Other: return std::nullopt;
  }
  return std::nullopt;
}

std::string_view to_string(DomainGroup g) {
  switch (g) {
    case DomainGroup::MathKnowledge: return "MathKnowledge";
    case DomainGroup::Comprehension: return "Comprehension";
    case DomainGroup::BiasesSafety: return "BiasesSafety";
    case DomainGroup::Other: return "Other";
  }
  return "Other";
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::Unanswerable: return "Unanswerable";
    case Scenario::UnderspecifiedContext: return "UnderspecifiedContext";
    case Scenario::UnderspecifiedAim: return "UnderspecifiedAim";
    case Scenario::FalsePremise: return "FalsePremise";
    case Scenario::Subjective: return "Subjective";
    case Scenario::Answerable: return "Answerable";
  }
  return "Answerable";
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::TraceInversion: return "TraceInversion";
    case Method::Probs: return "Probs";
    case Method::AskCali: return "AskCali";
    case Method::Reflect: return "Reflect";
    case Method::Cooperate: return "Cooperate";
    case Method::Compete: return "Compete";
  }
  return "TraceInversion";
}

DomainGroup domain_group_from_string(std::string_view s) {
  for (auto g : {DomainGroup::MathKnowledge, DomainGroup::Comprehension,
                 DomainGroup::BiasesSafety, DomainGroup::Other}) {
    if (iequals(to_string(g), s)) return g;
  }
  throw Error(ErrorKind::Input, "unknown domain group '" + std::string(s) + "'");
}

Scenario scenario_from_string(std::string_view s) {
  for (auto v : {Scenario::Unanswerable, Scenario::UnderspecifiedContext,
                 Scenario::UnderspecifiedAim, Scenario::FalsePremise,
                 Scenario::Subjective, Scenario::Answerable}) {
    if (iequals(to_string(v), s)) return v;
  }
  throw Error(ErrorKind::Input, "unknown scenario '" + std::string(s) + "'");
}

Method method_from_string(std::string_view s) {
  for (auto m : {Method::TraceInversion, Method::Probs, Method::AskCali,
                 Method::Reflect, Method::Cooperate, Method::Compete}) {
    if (iequals(to_string(m), s)) return m;
  }
  if (iequals(s, "trinv") || iequals(s, "trace-inversion")) return Method::TraceInversion;
  throw Error(ErrorKind::Input, "unknown method '" + std::string(s) + "'");
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::vector<std::string> QuerySample::option_set() const {
  if (!options.empty()) return options;
  return {"A", "B", "C", "D"};
}

void QuerySample::validate() const {
  if (answerable && references.empty()) {
    throw Error(ErrorKind::Input, "sample '" + id + "': answerable without references");
  }
  if (!answerable && scenario && *scenario == Scenario::Answerable) {
    throw Error(ErrorKind::Input,
                "sample '" + id + "': unanswerable sample tagged scenario Answerable");
  }
}

bool should_abstain_label(const QuerySample& sample, const ModelAnswer& candidate) {
  if (!sample.answerable) return true;
  const std::string parsed = to_upper(trim(candidate.parsed));
  if (parsed.empty() || parsed == kUnparsed) return true;
  return std::none_of(sample.references.begin(), sample.references.end(),
                      [&](const std::string& ref) { return to_upper(trim(ref)) == parsed; });
}

ConfusionCounts tally(std::span<const AbstainDecision> decisions,
                      std::span<const QuerySample> samples) {
  if (decisions.size() != samples.size()) {
    throw Error(ErrorKind::Input, "tally: " + std::to_string(decisions.size()) +
                                      " decisions for " + std::to_string(samples.size()) +
                                      " samples");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool should = should_abstain_label(samples[i], decisions[i].candidate);
    if (decisions[i].abstain) {
      should ? ++c.tp : ++c.fp;
    } else {
      should ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

double abstain_accuracy(const ConfusionCounts& c) {
  if (c.total() <= 0) {
    throw Error(ErrorKind::UndefinedMetric, "abstain accuracy over zero samples");
  }
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double reliable_accuracy(const ConfusionCounts& c) {
  if (c.tn + c.fn <= 0) {
    throw Error(ErrorKind::UndefinedMetric, "reliable accuracy undefined: all-abstain");
  }
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fn);
}

std::optional<double> try_reliable_accuracy(const ConfusionCounts& c) {
  if (c.tn + c.fn <= 0) return std::nullopt;
  return reliable_accuracy(c);
}

}  // namespace trinv
