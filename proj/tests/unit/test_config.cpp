#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "trinv/config.hpp"

using namespace trinv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base() {
  return json::parse(R"({
    "endpoints": {
      "model": {"kind": "chat", "base_url": "https://api.example.com/v1", "model_id": "phi-4",
                "auth_env": "EXAMPLE_API_KEY"},
      "embedder": {"kind": "embedding", "base_url": "http://localhost:8001/v1",
                   "model_id": "all-MiniLM-L6-v2"},
      "guard": {"kind": "groundedness", "base_url": "http://localhost:8002",
                "model_id": "granite-guardian-3.3-8b"}
    },
    "retry": {"max_attempts": 4, "base_delay_ms": 100, "factor": 3, "max_delay_ms": 900},
    "method": {"method": "Compete", "k_alternatives": 5, "scorers": ["SE", "GROUND"],
               "se_threshold": 0.6},
    "sampling": {"temperature": 0.0, "max_new_tokens": 256, "reasoning_effort": "medium"},
    "concurrency": {"workers": 3, "max_in_flight": 2},
    "gateway": {"host": "0.0.0.0", "port": 9000}
  })");
}

ErrorKind kind_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Input;
}

}  // namespace

TEST_CASE("config parses every section") {
  const auto c = config_from_json(base());
  const auto& m = c.endpoints.at("model");
  CHECK(m.kind == EndpointKind::Chat);
  CHECK(m.model_id == "phi-4");
  CHECK(*m.auth_env == "EXAMPLE_API_KEY");
  CHECK(m.retry.max_attempts == 4);
  CHECK(m.retry.base_delay.count() == 100);
  CHECK(m.retry.factor == 3.0);
  CHECK(m.max_in_flight == 2);
  CHECK(c.method.method == Method::Compete);
  CHECK(c.method.k_alternatives == 5);
  CHECK(c.method.scorers.enabled == std::vector<ScorerKind>{ScorerKind::SE, ScorerKind::Ground});
  CHECK(*c.method.scorers.se_threshold == 0.6);
  CHECK(c.method.sampling.temperature == 0.0);
  CHECK(c.method.sampling.max_new_tokens == 256);
  CHECK(*c.method.sampling.reasoning_effort == ReasoningEffort::Medium);
  CHECK(c.workers == 3);
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 9000);
}

TEST_CASE("defaults") {
  const auto c = config_from_json(json::parse(
      R"({"endpoints": {"model": {"base_url": "http://x"}}})"));
  CHECK(c.method.method == Method::TraceInversion);
  CHECK(c.method.sampling.temperature == doctest::Approx(0.1));
  CHECK(c.method.sampling.max_new_tokens == 1024);
  CHECK(c.method.probs_top_k == 5);
  CHECK(c.method.k_alternatives == 3);
  CHECK(c.method.expert_domains ==
        std::vector<std::string>{"factual", "commonsense", "mathematical"});
  const auto& r = c.endpoints.at("model").retry;
  CHECK(r.max_attempts == 10);
  CHECK(r.base_delay.count() == 500);
  CHECK(r.factor == 2.0);
  CHECK(r.max_delay.count() == 30000);
  CHECK(r.jitter);
}

TEST_CASE("embedded secrets are rejected") {
  for (const char* key : {"api_key", "token", "secret"}) {
    auto j = base();
    j["endpoints"]["model"][key] = "sk-live-123";
    CHECK(kind_of(j) == ErrorKind::Configuration);
  }
}

TEST_CASE("serialised config never carries a secret value") {
  ::setenv("EXAMPLE_API_KEY", "sk-do-not-leak", 1);
  const auto dumped = config_to_json(config_from_json(base())).dump();
  CHECK(dumped.find("sk-do-not-leak") == std::string::npos);
  CHECK(dumped.find("EXAMPLE_API_KEY") != std::string::npos);
  ::unsetenv("EXAMPLE_API_KEY");
}

TEST_CASE("structural errors") {
  auto unknown = base();
  unknown["endpoints"]["oracle"] = {{"base_url", "http://x"}};
  CHECK(kind_of(unknown) == ErrorKind::Configuration);
  auto no_model = base();
  no_model["endpoints"].erase("model");
  CHECK(kind_of(no_model) == ErrorKind::Configuration);
  auto bad_retry = base();
  bad_retry["retry"]["max_attempts"] = 0;
  CHECK(kind_of(bad_retry) == ErrorKind::Configuration);
  auto bad_method = base();
  bad_method["method"]["method"] = "Guess";
  CHECK(kind_of(bad_method) == ErrorKind::Configuration);
  auto bad_k = base();
  bad_k["method"]["k_alternatives"] = 0;
  CHECK(kind_of(bad_k) == ErrorKind::Configuration);
}

TEST_CASE("round trip through JSON") {
  const auto c = config_from_json(base());
  const auto again = config_from_json(config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));
  CHECK(method_config_to_json(method_config_from_json(method_config_to_json(c.method))) ==
        method_config_to_json(c.method));
}

TEST_CASE("relative paths resolve against the config directory") {
  const auto dir = fs::temp_directory_path() / "trinv_cfg";
  fs::create_directories(dir);
  std::ofstream(dir / "fixtures.json") << "{}";
  std::ofstream(dir / "config.json") << R"({
    "endpoints": {"model": {"kind": "scripted", "base_url": "fixtures.json"},
                  "embedder": {"kind": "scripted", "base_url": "fixtures.json"}},
    "prompt_catalog": "catalog.json"
  })";
  const auto c = load_config(dir / "config.json");
  CHECK(fs::path(c.endpoints.at("model").base_url) == dir / "fixtures.json");
  CHECK(*c.prompt_catalog == dir / "catalog.json");
  const auto b = make_backends(c);
  CHECK(b.model);
  CHECK(b.model == b.embedder);  // identical endpoints share one backend
  CHECK_FALSE(b.guard);
  fs::remove_all(dir);
}
