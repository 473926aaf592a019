#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>

#include "trinv/llm_backend.hpp"

namespace trinv {

/// Fixture-driven backend. The fixture set is a JSON object mapping request
/// digests to response objects:
///   chat:          {"text": "...", "logprobs": [[["B", -0.1], ...], ...],
///                   "finish_reason": "stop"}
///   embedding:     {"embedding": [0.1, 0.2, ...]}
///   groundedness:  {"risk": "yes"|"no", "score": 0.9}
/// Any response may also carry "delay_ms" and "error" ("unavailable" is
/// retryable, "protocol" is not). Never touches the network.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend(BackendEndpoint endpoint, nlohmann::json fixtures);

  static std::shared_ptr<ScriptedBackend> from_file(BackendEndpoint endpoint);
  static std::shared_ptr<ScriptedBackend> from_json(nlohmann::json fixtures,
                                                    bool logprobs = true);

  bool reachable() override { return true; }

  Completion chat_once(std::span<const Message> messages,
                       const SamplingParams& params) override;
  Embedding embed_once(std::string_view text) override;
  GroundednessResult groundedness_once(std::string_view context,
                                       std::string_view claim) override;

  const nlohmann::json& fixtures() const { return fixtures_; }

 private:
  const nlohmann::json& lookup(const std::string& digest, std::string_view hint) const;

  nlohmann::json fixtures_;
};

/// Builds fixture sets keyed by the same digests ScriptedBackend looks up.
class ScriptBuilder {
 public:
  ScriptBuilder& chat(std::span<const Message> messages, std::string text,
                      const std::optional<LogprobSummary>& logprobs = std::nullopt);
  ScriptBuilder& chat_user(const std::string& prompt, std::string text,
                           const std::optional<LogprobSummary>& logprobs = std::nullopt);
  ScriptBuilder& chat_error(std::span<const Message> messages, std::string error);
  ScriptBuilder& embed(const std::string& text, const std::vector<double>& vec);
  ScriptBuilder& ground(const std::string& context, const std::string& claim, bool risk,
                        std::optional<double> score = std::nullopt);
  /// Adds "delay_ms" to every response already recorded.
  ScriptBuilder& delay_all(int ms);
  ScriptBuilder& merge(const nlohmann::json& other);

  const nlohmann::json& json() const { return fixtures_; }
  std::shared_ptr<ScriptedBackend> build(bool logprobs = true) const;
  void write(const std::filesystem::path& path) const;

 private:
  nlohmann::json fixtures_ = nlohmann::json::object();
};

}  // namespace trinv
