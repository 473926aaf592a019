#include "trinv/gateway.hpp"

#include <httplib.h>

#include <chrono>
#include <thread>

#include "trinv/evaluation.hpp"

namespace trinv {

using nlohmann::json;

bool method_needs_options(Method m) {
  return m == Method::Probs || m == Method::AskCali || m == Method::Compete;
}

GatewayRequest gateway_request_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Input, "request body must be a JSON object");
  GatewayRequest r;
  try {
    const auto& p = j.at("prompt");
    if (!p.is_string()) throw Error(ErrorKind::Input, "'prompt' must be a string");
    r.prompt = p.get<std::string>();
    if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
      std::vector<std::string> opts;
      for (const auto& o : *it) {
        if (!o.is_string()) throw Error(ErrorKind::Input, "'options' must be strings");
        opts.push_back(to_upper(trim(o.get<std::string>())));
      }
      r.options = std::move(opts);
    }
    if (auto it = j.find("method_override"); it != j.end() && !it->is_null()) {
      try {
        r.method_override = method_from_string(it->get<std::string>());
      } catch (const Error& e) {
        throw Error(ErrorKind::Input, e.what());
      }
    }
    if (auto it = j.find("trace_wanted"); it != j.end() && !it->is_null()) {
      if (!it->is_boolean()) throw Error(ErrorKind::Input, "'trace_wanted' must be a boolean");
      r.trace_wanted = it->get<bool>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Input, std::string("malformed request: ") + e.what());
  }
  if (trim(r.prompt).empty()) throw Error(ErrorKind::Input, "'prompt' must be nonempty");
  if (r.options && r.options->empty()) throw Error(ErrorKind::Input, "'options' must be nonempty");
  return r;
}

json gateway_response_to_json(const GatewayResponse& r) {
  json j = {{"abstained", r.abstained},
            {"method", to_string(r.method)},
            {"latency_ms", r.latency_ms},
            {"diagnostics", {{"votes", r.votes}, {"scores", r.scores}}}};
  if (r.answer) j["answer"] = {{"parsed", r.answer->parsed}, {"raw_text", r.answer->raw_text}};
  for (const auto& [k, v] : r.diagnostics) j["diagnostics"][k] = v;
  return j;
}

struct Gateway::Server {
  httplib::Server http;
  std::thread thread;
};

Gateway::Gateway(std::shared_ptr<const Snapshot> snapshot) : snap_(std::move(snapshot)) {
  if (!snap_ || !snap_->backends.model) {
    throw Error(ErrorKind::Configuration, "gateway needs a model backend");
  }
  snap_->method.validate();
}

Gateway::~Gateway() { stop(); }

std::unique_ptr<Gateway> Gateway::from_config(const Config& config) {
  auto snap = std::make_shared<Snapshot>();
  snap->method = config.method;
  snap->backends = make_backends(config);
  snap->prompts = load_prompts(config);
  if (config.method.threshold) snap->thresholds[config.method.method] = *config.method.threshold;
  return std::make_unique<Gateway>(std::move(snap));
}

void Gateway::reload(std::shared_ptr<const Snapshot> snapshot) {
  if (!snapshot || !snapshot->backends.model) {
    throw Error(ErrorKind::Configuration, "gateway needs a model backend");
  }
  snapshot->method.validate();
  std::lock_guard lock(snap_mu_);
  snap_ = std::move(snapshot);
}

std::shared_ptr<const Gateway::Snapshot> Gateway::snapshot() const {
  std::lock_guard lock(snap_mu_);
  return snap_;
}

GatewayResponse Gateway::handle_query(const GatewayRequest& req) const {
  const auto snap = snapshot();
  MethodConfig cfg = snap->method;
  if (req.method_override && *req.method_override != cfg.method) {
    cfg.method = *req.method_override;
    cfg.threshold.reset();
  }
  if (auto it = snap->thresholds.find(cfg.method); it != snap->thresholds.end()) {
    apply_threshold(cfg, it->second);
  }
  if (method_needs_options(cfg.method) && !req.options) {
    throw Error(ErrorKind::Input,
                std::string(to_string(cfg.method)) + " requests must list 'options'");
  }

  QuerySample sample;
  const Message m{"user", req.prompt};
  sample.id = "req-" + request_digest(std::span(&m, 1));
  sample.prompt = req.prompt;
  sample.answerable = false;  // unknown online; correctness is never evaluated here
  if (req.options) sample.options = *req.options;

  const auto t0 = std::chrono::steady_clock::now();
  const DecideContext ctx{cfg, snap->backends, snap->prompts, 0};
  auto d = decide_sample(ctx, sample);
  if (record_latency_) {
    d.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  }
  log_decision({{"sample_id", sample.id}, {"prompt", sample.prompt},
                {"decision", decision_to_json(d)}});

  GatewayResponse r;
  r.abstained = d.abstain;
  r.method = d.method;
  r.latency_ms = d.latency_ms;
  r.votes = d.votes;
  r.scores = d.scores;
  if (!d.abstain || req.trace_wanted) r.answer = d.candidate;
  if (req.trace_wanted) r.diagnostics = d.diagnostics;
  return r;
}

void Gateway::set_decision_sink(std::function<void(const json&)> sink) {
  std::lock_guard lock(sink_mu_);
  sink_ = std::move(sink);
}

void Gateway::log_decision(const json& entry) const {
  std::lock_guard lock(sink_mu_);
  if (sink_) sink_(entry);
}

HttpReply Gateway::error_reply(int status, ErrorKind kind, const std::string& message) const {
  HttpReply r;
  r.status = status;
  r.body = json{{"error", {{"kind", to_string(kind)}, {"message", message}}}}.dump();
  if (status == 503) r.headers["Retry-After"] = std::to_string(retry_after_s_);
  return r;
}

HttpReply Gateway::handle_decide(const std::string& body) const {
  GatewayRequest req;
  try {
    req = gateway_request_from_json(json::parse(body));
  } catch (const json::exception& e) {
    return error_reply(400, ErrorKind::Input, std::string("malformed JSON: ") + e.what());
  } catch (const Error& e) {
    return error_reply(400, e.kind(), e.what());
  }
  try {
    HttpReply r;
    r.body = gateway_response_to_json(handle_query(req)).dump();
    return r;
  } catch (const Error& e) {
    ErrorKind cause = e.kind();
    if (const auto* d = dynamic_cast<const DecisionError*>(&e)) cause = d->cause();
    switch (cause) {
      case ErrorKind::Input:
        return error_reply(400, cause, e.what());
      case ErrorKind::BackendUnavailable:
      case ErrorKind::Transient:
        return error_reply(503, cause, e.what());
      case ErrorKind::Capability:
        return error_reply(501, cause, e.what());
      case ErrorKind::Protocol:
        return error_reply(502, cause, e.what());
      default:
        return error_reply(500, cause, e.what());
    }
  } catch (const std::exception& e) {
    return error_reply(500, ErrorKind::Decision, e.what());
  }
}

HttpReply Gateway::handle_health() const {
  const auto snap = snapshot();
  const auto& b = snap->backends;
  auto probe = [](const BackendPtr& p) -> json {
    if (!p) return "not configured";
    return p->reachable();
  };
  json kinds = {{"chat", probe(b.model)},
                {"embedding", probe(b.embedder)},
                {"groundedness", probe(b.guard)}};
  bool ok = true;
  for (const auto& v : kinds) ok = ok && (v.is_string() || v.get<bool>());
  if (b.judge && b.judge != b.model) ok = ok && b.judge->reachable();
  if (b.reconstructor && b.reconstructor != b.model) ok = ok && b.reconstructor->reachable();
  HttpReply r;
  r.status = ok ? 200 : 503;
  r.body = json{{"status", ok ? "ok" : "degraded"}, {"backends", kinds}}.dump();
  return r;
}

namespace {

void install_routes(httplib::Server& http, const Gateway& gw) {
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, "application/json");
  };
  http.Post("/v1/decide", [&gw, send](const httplib::Request& req, httplib::Response& res) {
    send(res, gw.handle_decide(req.body));
  });
  http.Get("/healthz", [&gw, send](const httplib::Request&, httplib::Response& res) {
    send(res, gw.handle_health());
  });
}

}  // namespace

int Gateway::start(const std::string& host, int port, int threads) {
  if (server_) throw Error(ErrorKind::Configuration, "gateway already running");
  auto s = std::make_unique<Server>();
  const auto n = static_cast<std::size_t>(std::max(1, threads));
  s->http.new_task_queue = [n] { return new httplib::ThreadPool(n); };
  install_routes(s->http, *this);
  const int bound = port == 0 ? s->http.bind_to_any_port(host) : s->http.bind_to_port(host, port)
                                                                     ? port
                                                                     : -1;
  if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
  s->thread = std::thread([srv = &s->http] { srv->listen_after_bind(); });
  s->http.wait_until_ready();
  server_ = std::move(s);
  return bound;
}

void Gateway::serve(const std::string& host, int port, int threads) {
  start(host, port, threads);
  server_->thread.join();
}

void Gateway::stop() {
  if (!server_) return;
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
  server_.reset();
}

}  // namespace trinv
