#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "trinv/method.hpp"

namespace trinv {

/// Endpoint roles a config may define. Only "model" is required.
inline constexpr const char* kBackendRoles[] = {"model", "reconstructor", "judge", "embedder",
                                                "guard"};

/// The key-value document shared by the CLI and the gateway:
///
///   {
///     "endpoints": {"model": {"kind": "chat", "base_url": "...", "model_id": "...",
///                             "auth_env": "OPENAI_API_KEY", "logprobs": true}, ...},
///     "retry": {"max_attempts": 10, "base_delay_ms": 500, "factor": 2,
///               "max_delay_ms": 30000, "jitter": true},
///     "method": {"method": "TraceInversion", "scorers": ["SE", "TrInv-LLM", "GROUND"], ...},
///     "sampling": {"temperature": 0.1, "max_new_tokens": 1024},
///     "prompt_catalog": "prompts/default_catalog.json",
///     "concurrency": {"workers": 8, "max_in_flight": 8},
///     "gateway": {"host": "127.0.0.1", "port": 8080}
///   }
///
/// Relative paths resolve against the config file's directory. Secrets are
/// never stored, only the name of the env var that holds them.
struct Config {
  std::map<std::string, BackendEndpoint> endpoints;
  MethodConfig method;
  std::optional<std::filesystem::path> prompt_catalog;
  int workers = 8;
  std::string host = "127.0.0.1";
  int port = 8080;
};

Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const Config& c);
Config load_config(const std::filesystem::path& path);

MethodConfig method_config_from_json(const nlohmann::json& j, MethodConfig base = {});
nlohmann::json method_config_to_json(const MethodConfig& m);

BackendEndpoint endpoint_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                   const RetryPolicy& retry, int max_in_flight);
nlohmann::json endpoint_to_json(const BackendEndpoint& e);

Backends make_backends(const Config& c);
PromptCatalog load_prompts(const Config& c);

}  // namespace trinv
