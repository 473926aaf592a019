#include "trinv/http_backend.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

namespace trinv {

using nlohmann::json;

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::Configuration, "base_url needs a scheme: '" + base_url + "'");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

namespace {

class HttplibTransport : public Transport {
 public:
  HttplibTransport(std::string origin, int timeout_ms)
      : origin_(std::move(origin)), timeout_ms_(timeout_ms) {}

  // httplib::Client is not safe for concurrent use, so each call gets its own;
  // the backend's limiter bounds how many exist at once.
  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override {
    auto client = make_client();
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }

  bool ping() override {
    auto client = make_client();
    return static_cast<bool>(client.Get("/"));
  }

 private:
  httplib::Client make_client() const {
    httplib::Client c(origin_);
    const auto sec = timeout_ms_ / 1000;
    const auto usec = (timeout_ms_ % 1000) * 1000;
    c.set_connection_timeout(sec, usec);
    c.set_read_timeout(sec, usec);
    c.set_write_timeout(sec, usec);
    return c;
  }

  std::string origin_;
  int timeout_ms_;
};

json to_wire(std::span<const Message> messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"role", m.role}, {"content", m.content}});
  return out;
}

json parse_body(const HttpResponse& r, const char* what) {
  try {
    return json::parse(r.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string(what) + ": malformed JSON response: " + e.what());
  }
}

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& origin, int timeout_ms) {
  return std::make_unique<HttplibTransport>(origin, timeout_ms);
}

HttpBackend::HttpBackend(BackendEndpoint endpoint, std::unique_ptr<Transport> transport)
    : Backend(std::move(endpoint)), transport_(std::move(transport)) {
  auto [origin, prefix] = split_base_url(this->endpoint().base_url);
  path_prefix_ = prefix;
  if (!transport_) transport_ = make_http_transport(origin, this->endpoint().timeout_ms);
}

bool HttpBackend::reachable() { return transport_->ping(); }

HttpResponse HttpBackend::post(const std::string& route, const std::string& body) {
  std::map<std::string, std::string> headers;
  if (const auto& env = endpoint().auth_env) {
    const char* secret = std::getenv(env->c_str());
    if (secret == nullptr || *secret == '\0') {
      throw Error(ErrorKind::Configuration, "auth env var " + *env + " is not set");
    }
    headers["Authorization"] = std::string("Bearer ") + secret;
  }
  auto r = transport_->post(path_prefix_ + route, body, headers);
  if (r.status == 0) {
    throw Error(ErrorKind::Transient, "transport error on " + route + ": " + r.error);
  }
  if (r.status >= 500 || r.status == 429) {
    throw Error(ErrorKind::Transient, "HTTP " + std::to_string(r.status) + " on " + route);
  }
  if (r.status >= 400) {
    throw Error(ErrorKind::Protocol, "HTTP " + std::to_string(r.status) + " on " + route);
  }
  return r;
}

Completion HttpBackend::chat_once(std::span<const Message> messages,
                                  const SamplingParams& params) {
  json req = {{"model", endpoint().model_id},
              {"messages", to_wire(messages)},
              {"temperature", params.temperature},
              {"max_tokens", params.max_new_tokens}};
  const bool logprobs = params.want_logprobs && supports_logprobs();
  if (logprobs) {
    req["logprobs"] = true;
    req["top_logprobs"] = params.top_k_logprobs;
  }
  if (params.reasoning_effort) req["reasoning_effort"] = to_string(*params.reasoning_effort);
  if (params.seed) req["seed"] = *params.seed;

  const auto body = parse_body(post("/chat/completions", req.dump()), "chat");
  Completion c;
  try {
    const auto& choice = body.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    c.text = content.is_null() ? "" : content.get<std::string>();
    const auto finish = choice.value("finish_reason", json("stop"));
    if (finish.is_string() && finish.get<std::string>() == "length") {
      c.finish_reason = FinishReason::Length;
    }
    if (logprobs) {
      auto lp = choice.find("logprobs");
      if (lp != choice.end() && lp->is_object() && lp->contains("content") &&
          (*lp)["content"].is_array()) {
        LogprobSummary summary;
        for (const auto& tok : (*lp)["content"]) {
          auto& entries = summary.emplace_back();
          for (const auto& top : tok.at("top_logprobs")) {
            entries.emplace_back(top.at("token").get<std::string>(),
                                 std::min(0.0, top.at("logprob").get<double>()));
          }
        }
        c.logprob_summary = std::move(summary);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string("chat: unexpected response shape: ") + e.what());
  }
  return c;
}

Embedding HttpBackend::embed_once(std::string_view text) {
  const json req = {{"model", endpoint().model_id}, {"input", std::string(text)}};
  const auto body = parse_body(post("/embeddings", req.dump()), "embedding");
  try {
    const auto values = body.at("data").at(0).at("embedding").get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string("embedding: unexpected response shape: ") + e.what());
  }
}

GroundednessResult HttpBackend::groundedness_once(std::string_view context,
                                                  std::string_view claim) {
  const json req = {{"context", std::string(context)}, {"claim", std::string(claim)}};
  const auto body = parse_body(post("/groundedness", req.dump()), "groundedness");
  GroundednessResult g;
  try {
    const auto risk = body.at("risk").get<std::string>();
    if (risk != "yes" && risk != "no") {
      throw Error(ErrorKind::Protocol, "groundedness: risk must be yes/no, got '" + risk + "'");
    }
    g.risk = risk == "yes";
    if (auto it = body.find("score"); it != body.end() && it->is_number()) {
      g.score = it->get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string("groundedness: unexpected response shape: ") + e.what());
  }
  return g;
}

}  // namespace trinv
