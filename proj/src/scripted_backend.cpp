#include "trinv/scripted_backend.hpp"

#include <fstream>
#include <thread>

namespace trinv {

using nlohmann::json;

namespace {

void apply_common(const json& response) {
  if (auto it = response.find("delay_ms"); it != response.end()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(it->get<int>()));
  }
  if (auto it = response.find("error"); it != response.end()) {
    const auto what = it->get<std::string>();
    if (what == "unavailable") {
      throw Error(ErrorKind::Transient, "scripted backend unavailable");
    }
    throw Error(ErrorKind::Protocol, "scripted backend error: " + what);
  }
}

LogprobSummary parse_logprobs(const json& j) {
  LogprobSummary out;
  for (const auto& position : j) {
    auto& entries = out.emplace_back();
    for (const auto& e : position) {
      const double lp = e.at(1).get<double>();
      if (lp > 0.0) {
        throw Error(ErrorKind::Protocol, "fixture logprob > 0");
      }
      entries.emplace_back(e.at(0).get<std::string>(), lp);
    }
  }
  return out;
}

json logprobs_to_json(const LogprobSummary& s) {
  json out = json::array();
  for (const auto& position : s) {
    json p = json::array();
    for (const auto& [tok, lp] : position) p.push_back(json::array({tok, lp}));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

ScriptedBackend::ScriptedBackend(BackendEndpoint endpoint, json fixtures)
    : Backend(std::move(endpoint)), fixtures_(std::move(fixtures)) {
  if (!fixtures_.is_object()) {
    throw Error(ErrorKind::Configuration, "fixture set must be a JSON object");
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(BackendEndpoint endpoint) {
  std::ifstream in(endpoint.base_url);
  if (!in) {
    throw Error(ErrorKind::Io, "cannot open fixture file '" + endpoint.base_url + "'");
  }
  json fixtures;
  try {
    in >> fixtures;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Configuration,
                "fixture file '" + endpoint.base_url + "': " + e.what());
  }
  return std::make_shared<ScriptedBackend>(std::move(endpoint), std::move(fixtures));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(json fixtures, bool logprobs) {
  BackendEndpoint ep;
  ep.kind = EndpointKind::Scripted;
  ep.base_url = "<memory>";
  ep.model_id = "scripted";
  ep.logprobs = logprobs;
  ep.retry.base_delay = std::chrono::milliseconds(0);
  ep.retry.jitter = false;
  return std::make_shared<ScriptedBackend>(std::move(ep), std::move(fixtures));
}

const json& ScriptedBackend::lookup(const std::string& digest, std::string_view hint) const {
  auto it = fixtures_.find(digest);
  if (it == fixtures_.end()) {
    std::string shown(hint.substr(hint.size() > 400 ? hint.size() - 400 : 0));
    throw Error(ErrorKind::FixtureMiss, "no fixture for digest " + digest + " (" + shown + ")");
  }
  return *it;
}

Completion ScriptedBackend::chat_once(std::span<const Message> messages,
                                      const SamplingParams& params) {
  const auto& r = lookup(request_digest(messages),
                         messages.empty() ? std::string_view{} : messages.back().content);
  apply_common(r);
  Completion c;
  c.text = r.value("text", "");
  const auto finish = r.value("finish_reason", "stop");
  c.finish_reason = finish == "length" ? FinishReason::Length
                    : finish == "error" ? FinishReason::Error
                                        : FinishReason::Stop;
  if (params.want_logprobs && supports_logprobs()) {
    if (auto it = r.find("logprobs"); it != r.end()) {
      c.logprob_summary = parse_logprobs(*it);
    }
  }
  return c;
}

Embedding ScriptedBackend::embed_once(std::string_view text) {
  const auto& r = lookup(embed_digest(text), text);
  apply_common(r);
  const auto values = r.at("embedding").get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

GroundednessResult ScriptedBackend::groundedness_once(std::string_view context,
                                                      std::string_view claim) {
  const auto& r = lookup(groundedness_digest(context, claim), claim);
  apply_common(r);
  GroundednessResult g;
  const auto risk = r.at("risk").get<std::string>();
  if (risk != "yes" && risk != "no") {
    throw Error(ErrorKind::Protocol, "groundedness risk must be yes/no, got '" + risk + "'");
  }
  g.risk = risk == "yes";
  if (auto it = r.find("score"); it != r.end() && !it->is_null()) {
    g.score = it->get<double>();
  }
  return g;
}

ScriptBuilder& ScriptBuilder::chat(std::span<const Message> messages, std::string text,
                                   const std::optional<LogprobSummary>& logprobs) {
  nlohmann::json r = {{"text", std::move(text)}};
  if (logprobs) r["logprobs"] = logprobs_to_json(*logprobs);
  fixtures_[request_digest(messages)] = std::move(r);
  return *this;
}

ScriptBuilder& ScriptBuilder::chat_user(const std::string& prompt, std::string text,
                                        const std::optional<LogprobSummary>& logprobs) {
  const Message m{"user", prompt};
  return chat(std::span(&m, 1), std::move(text), logprobs);
}

ScriptBuilder& ScriptBuilder::chat_error(std::span<const Message> messages, std::string error) {
  fixtures_[request_digest(messages)] = nlohmann::json{{"error", std::move(error)}};
  return *this;
}

ScriptBuilder& ScriptBuilder::embed(const std::string& text, const std::vector<double>& vec) {
  fixtures_[embed_digest(text)] = nlohmann::json{{"embedding", vec}};
  return *this;
}

ScriptBuilder& ScriptBuilder::ground(const std::string& context, const std::string& claim,
                                     bool risk, std::optional<double> score) {
  nlohmann::json r = {{"risk", risk ? "yes" : "no"}};
  if (score) r["score"] = *score;
  fixtures_[groundedness_digest(context, claim)] = std::move(r);
  return *this;
}

ScriptBuilder& ScriptBuilder::delay_all(int ms) {
  for (auto& value : fixtures_) value["delay_ms"] = ms;
  return *this;
}

ScriptBuilder& ScriptBuilder::merge(const nlohmann::json& other) {
  for (auto it = other.begin(); it != other.end(); ++it) fixtures_[it.key()] = it.value();
  return *this;
}

std::shared_ptr<ScriptedBackend> ScriptBuilder::build(bool logprobs) const {
  return ScriptedBackend::from_json(fixtures_, logprobs);
}

void ScriptBuilder::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << fixtures_.dump(1) << '\n';
}

}  // namespace trinv
