#include "trinv/config.hpp"

#include <fstream>

namespace trinv {

using nlohmann::json;

namespace {

RetryPolicy retry_from_json(const json& j) {
  RetryPolicy r;
  r.max_attempts = j.value("max_attempts", r.max_attempts);
  r.base_delay = std::chrono::milliseconds(j.value("base_delay_ms", r.base_delay.count()));
  r.factor = j.value("factor", r.factor);
  r.max_delay = std::chrono::milliseconds(j.value("max_delay_ms", r.max_delay.count()));
  r.jitter = j.value("jitter", r.jitter);
  if (r.max_attempts < 1) throw Error(ErrorKind::Configuration, "retry.max_attempts must be >= 1");
  if (r.factor < 1.0) throw Error(ErrorKind::Configuration, "retry.factor must be >= 1");
  return r;
}

json retry_to_json(const RetryPolicy& r) {
  return {{"max_attempts", r.max_attempts},
          {"base_delay_ms", r.base_delay.count()},
          {"factor", r.factor},
          {"max_delay_ms", r.max_delay.count()},
          {"jitter", r.jitter}};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

SamplingParams sampling_from_json(const json& j, SamplingParams s) {
  s.temperature = j.value("temperature", s.temperature);
  s.max_new_tokens = j.value("max_new_tokens", s.max_new_tokens);
  s.top_k_logprobs = j.value("top_k_logprobs", s.top_k_logprobs);
  if (auto it = j.find("reasoning_effort"); it != j.end() && !it->is_null()) {
    s.reasoning_effort = reasoning_effort_from_string(it->get<std::string>());
  }
  return s;
}

}  // namespace

BackendEndpoint endpoint_from_json(const json& j, const std::filesystem::path& base_dir,
                                   const RetryPolicy& retry, int max_in_flight) {
  BackendEndpoint e;
  e.kind = endpoint_kind_from_string(j.value("kind", std::string("chat")));
  e.base_url = j.at("base_url").get<std::string>();
  if (e.kind == EndpointKind::Scripted) e.base_url = resolve(base_dir, e.base_url).string();
  e.model_id = j.value("model_id", std::string());
  if (auto it = j.find("auth_env"); it != j.end() && !it->is_null()) {
    e.auth_env = it->get<std::string>();
  }
  if (j.contains("api_key") || j.contains("token") || j.contains("secret")) {
    throw Error(ErrorKind::Configuration,
                "endpoints must name an env var via auth_env, not embed a secret");
  }
  e.timeout_ms = j.value("timeout_ms", e.timeout_ms);
  e.logprobs = j.value("logprobs", e.logprobs);
  e.max_in_flight = j.value("max_in_flight", max_in_flight);
  e.retry = j.contains("retry") ? retry_from_json(j.at("retry")) : retry;
  return e;
}

json endpoint_to_json(const BackendEndpoint& e) {
  json j = {{"kind", to_string(e.kind)},
            {"base_url", e.base_url},
            {"model_id", e.model_id},
            {"timeout_ms", e.timeout_ms},
            {"logprobs", e.logprobs},
            {"max_in_flight", e.max_in_flight}};
  if (e.auth_env) j["auth_env"] = *e.auth_env;
  return j;
}

MethodConfig method_config_from_json(const json& j, MethodConfig m) {
  if (auto it = j.find("method"); it != j.end()) {
    try {
      m.method = method_from_string(it->get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorKind::Configuration, e.what());
    }
  }
  m.cot_variant = j.value("cot_variant", m.cot_variant);
  m.k_alternatives = j.value("k_alternatives", m.k_alternatives);
  m.expert_domains = j.value("expert_domains", m.expert_domains);
  if (auto it = j.find("threshold"); it != j.end()) {
    m.threshold = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
  }
  m.probs_top_k = j.value("probs_top_k", m.probs_top_k);
  if (auto it = j.find("scorers"); it != j.end()) {
    m.scorers.enabled.clear();
    for (const auto& s : *it) m.scorers.enabled.push_back(scorer_from_string(s.get<std::string>()));
  }
  if (auto it = j.find("se_threshold"); it != j.end()) {
    m.scorers.se_threshold =
        it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
  }
  m.scorers.calibrate_se = j.value("calibrate_se", m.scorers.calibrate_se);
  return m;
}

json method_config_to_json(const MethodConfig& m) {
  json scorers = json::array();
  for (auto k : m.scorers.enabled) scorers.push_back(to_string(k));
  json j = {{"method", to_string(m.method)},
            {"cot_variant", m.cot_variant},
            {"k_alternatives", m.k_alternatives},
            {"expert_domains", m.expert_domains},
            {"threshold", m.threshold ? json(*m.threshold) : json()},
            {"probs_top_k", m.probs_top_k},
            {"scorers", scorers},
            {"se_threshold", m.scorers.se_threshold ? json(*m.scorers.se_threshold) : json()},
            {"calibrate_se", m.scorers.calibrate_se}};
  return j;
}

Config config_from_json(const json& j, const std::filesystem::path& base_dir) {
  Config c;
  try {
    const RetryPolicy retry = j.contains("retry") ? retry_from_json(j.at("retry")) : RetryPolicy{};
    const json conc = j.value("concurrency", json::object());
    c.workers = conc.value("workers", c.workers);
    const int in_flight = conc.value("max_in_flight", 8);
    for (auto it = j.at("endpoints").begin(); it != j.at("endpoints").end(); ++it) {
      bool known = false;
      for (const char* role : kBackendRoles) known = known || it.key() == role;
      if (!known) throw Error(ErrorKind::Configuration, "unknown endpoint role '" + it.key() + "'");
      c.endpoints[it.key()] = endpoint_from_json(it.value(), base_dir, retry, in_flight);
    }
    if (!c.endpoints.count("model")) {
      throw Error(ErrorKind::Configuration, "config needs a 'model' endpoint");
    }
    c.method = method_config_from_json(j.value("method", json::object()));
    c.method.sampling = sampling_from_json(j.value("sampling", json::object()), c.method.sampling);
    if (auto it = j.find("prompt_catalog"); it != j.end() && !it->is_null()) {
      c.prompt_catalog = resolve(base_dir, it->get<std::string>());
    }
    const json gw = j.value("gateway", json::object());
    c.host = gw.value("host", c.host);
    c.port = gw.value("port", c.port);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Configuration, std::string("config: ") + e.what());
  }
  c.method.validate();
  return c;
}

json config_to_json(const Config& c) {
  json eps = json::object();
  for (const auto& [role, e] : c.endpoints) eps[role] = endpoint_to_json(e);
  const auto& model = c.endpoints.at("model");
  json sampling = {{"temperature", c.method.sampling.temperature},
                   {"max_new_tokens", c.method.sampling.max_new_tokens},
                   {"top_k_logprobs", c.method.sampling.top_k_logprobs}};
  if (c.method.sampling.reasoning_effort) {
    sampling["reasoning_effort"] = to_string(*c.method.sampling.reasoning_effort);
  }
  json j = {{"endpoints", eps},
            {"retry", retry_to_json(model.retry)},
            {"method", method_config_to_json(c.method)},
            {"sampling", sampling},
            {"concurrency", {{"workers", c.workers}, {"max_in_flight", model.max_in_flight}}},
            {"gateway", {{"host", c.host}, {"port", c.port}}}};
  if (c.prompt_catalog) j["prompt_catalog"] = c.prompt_catalog->string();
  return j;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Configuration, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

Backends make_backends(const Config& c) {
  Backends b;
  // Roles pointing at an identical endpoint share one backend (and its limiter).
  std::map<std::string, BackendPtr> by_endpoint;
  auto get = [&](const std::string& role) -> BackendPtr {
    auto it = c.endpoints.find(role);
    if (it == c.endpoints.end()) return nullptr;
    const auto key = endpoint_to_json(it->second).dump();
    auto& slot = by_endpoint[key];
    if (!slot) slot = make_backend(it->second);
    return slot;
  };
  b.model = get("model");
  b.reconstructor = get("reconstructor");
  b.judge = get("judge");
  b.embedder = get("embedder");
  b.guard = get("guard");
  return b;
}

PromptCatalog load_prompts(const Config& c) {
  return c.prompt_catalog ? PromptCatalog::load(*c.prompt_catalog) : PromptCatalog::defaults();
}

}  // namespace trinv
