#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "trinv/config.hpp"
#include "trinv/evaluation.hpp"

namespace trinv {

/// Hidden behaviour of the simulated model on one item.
struct MimicPlan {
  std::string item;          // tag embedded in the prompt, "[item <id>]"
  std::string chosen;        // option the model picks
  bool correct = false;      // whether `chosen` is a reference answer
  bool aligned = true;       // whether its trace answers the user's question
  double confidence = 0.5;   // probability mass on the chosen token
  std::string q_star;        // question recovered from the trace
};

/// Rule-based stand-in for a chat, embedding and groundedness model, driven by
/// per-item plans and a generator seed. Replies depend only on the request
/// content, so every reply is recorded under the same digest ScriptedBackend
/// uses and the recording replays exactly.
///
/// Stages are recognised by phrases of the default prompt catalog.
class SimulatedBackend : public Backend {
 public:
  SimulatedBackend(std::map<std::string, MimicPlan> plans, std::uint64_t seed);

  bool reachable() override { return true; }
  Completion chat_once(std::span<const Message> messages, const SamplingParams& params) override;
  Embedding embed_once(std::string_view text) override;
  GroundednessResult groundedness_once(std::string_view context, std::string_view claim) override;

  /// Every reply so far, as a ScriptedBackend fixture set.
  nlohmann::json recorded() const;

 private:
  const MimicPlan& plan_for(std::string_view text) const;
  double draw(const MimicPlan& plan, std::string_view stage) const;
  void record(const std::string& digest, nlohmann::json reply);

  std::map<std::string, MimicPlan> plans_;
  std::uint64_t seed_;
  mutable std::mutex mu_;
  nlohmann::json recorded_ = nlohmann::json::object();
};

/// Bag-of-words feature-hashing embedding used by the simulator, unit norm.
Embedding hashed_embedding(std::string_view text, int dims = 64);

struct MimicOptions {
  std::vector<std::string> datasets = {"MMLU", "GSM-MC", "UMWP"};
  std::size_t per_dataset = 24;
  std::vector<Method> methods = {Method::TraceInversion, Method::Probs,   Method::AskCali,
                                 Method::Reflect,        Method::Cooperate, Method::Compete};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  bool cot_variants = false;
  std::uint64_t generator_seed = 7;
  std::string backend_id = "mimic";
};

struct MimicBundle {
  std::vector<DatasetFile> datasets;
  std::map<std::string, MimicPlan> plans;
  nlohmann::json fixtures;
  std::vector<RunResult> results;  // the runs that produced the fixtures
};

std::vector<DatasetFile> mimic_datasets(const MimicOptions& opts,
                                        std::map<std::string, MimicPlan>& plans);

/// Generates datasets, runs every configured (dataset, method, seed) against
/// the simulator and keeps the recorded fixtures.
MimicBundle generate_mimic(const MimicOptions& opts);

/// Writes <dir>/datasets/<name>.jsonl, <dir>/fixtures.json and a
/// <dir>/config.json whose endpoints replay the fixtures.
void write_mimic(const MimicBundle& bundle, const std::filesystem::path& dir);

}  // namespace trinv
