#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trinv/dataset.hpp"
#include "trinv/method.hpp"

namespace trinv {

/// Per-sample outcome of a run: a decision, or the error that prevented one.
struct DecisionRecord {
  std::string sample_id;
  bool should_abstain = false;
  std::optional<AbstainDecision> decision;
  std::string error;
};

enum class RunStatus { Ok, Failed };

std::string_view to_string(RunStatus s);

struct RunResult {
  Method method = Method::TraceInversion;
  bool cot_variant = false;
  std::string dataset;
  DomainGroup domain_group = DomainGroup::Other;
  std::string backend;
  std::uint64_t seed = 0;
  ConfusionCounts counts;
  std::optional<double> a_acc;  // unset when no sample was scored
  std::optional<double> r_acc;  // unset when every decision abstained
  std::size_t scored = 0;
  std::size_t failures = 0;
  std::size_t dev_size = 0;
  std::optional<double> calibrated_threshold;
  RunStatus status = RunStatus::Ok;
  std::string decision_log;  // path of the persisted JSONL, if any

  /// Method label used in tables, e.g. "Probs" or "Probs+CoT".
  std::string label() const;
};

struct RunOptions {
  std::string backend_id = "scripted";
  int workers = 8;
  double dev_fraction = 0.2;
  double max_failure_rate = 0.05;
  bool record_latency = true;
  std::optional<std::filesystem::path> decision_log;
};

struct RunOutput {
  RunResult result;
  std::vector<DecisionRecord> decisions;  // scored split, dataset order
  std::vector<ConfidenceRecord> calibration;
};

/// Seeded held-out split: (dev indices, scored indices), both ascending.
/// Dev is round(fraction * n) samples drawn with the seed; the two never overlap.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> calibration_split(
    std::size_t n, double fraction, std::uint64_t seed, const std::string& dataset);

/// Calibrates (when the method needs it), decides every scored sample on a
/// worker pool, tallies and computes both metrics. More than
/// max_failure_rate hard failures mark the run failed. A fixture miss aborts
/// the run.
RunOutput run_experiment(MethodConfig cfg, const DatasetFile& dataset, const Backends& backends,
                         std::uint64_t seed, const RunOptions& options = {},
                         const PromptCatalog& prompts = PromptCatalog::defaults());

nlohmann::json decision_to_json(const AbstainDecision& d);
AbstainDecision decision_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const DecisionRecord& r);
DecisionRecord record_from_json(const nlohmann::json& j);

void write_decision_log(const std::filesystem::path& path, const std::vector<DecisionRecord>& log);
std::vector<DecisionRecord> read_decision_log(const std::filesystem::path& path);

nlohmann::json result_to_json(const RunResult& r);
RunResult result_from_json(const nlohmann::json& j);

/// Reads every *.json RunResult in a directory (or a single file, which may
/// hold one result or an array).
std::vector<RunResult> load_results(const std::filesystem::path& path);

}  // namespace trinv
