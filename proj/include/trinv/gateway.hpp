#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "trinv/config.hpp"

namespace trinv {

struct GatewayRequest {
  std::string prompt;
  std::optional<std::vector<std::string>> options;
  std::optional<Method> method_override;
  bool trace_wanted = false;
};

struct GatewayResponse {
  bool abstained = false;
  std::optional<ModelAnswer> answer;  // present iff !abstained or trace_wanted
  std::map<std::string, bool> votes;
  std::map<std::string, double> scores;
  std::map<std::string, std::string> diagnostics;  // only when trace_wanted
  Method method = Method::TraceInversion;
  std::int64_t latency_ms = 0;
};

/// Throws Error(Input) on a malformed body.
GatewayRequest gateway_request_from_json(const nlohmann::json& j);
nlohmann::json gateway_response_to_json(const GatewayResponse& r);

/// Methods whose decision depends on the option letters themselves; requests
/// for them must list the options.
bool method_needs_options(Method m);

struct HttpReply {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Abstention service. Holds a read-mostly snapshot (method config, backends,
/// prompts, cached thresholds) that reload() swaps atomically; requests never
/// share mutable state otherwise.
class Gateway {
 public:
  struct Snapshot {
    MethodConfig method;
    Backends backends;
    PromptCatalog prompts = PromptCatalog::defaults();
    std::map<Method, double> thresholds;  // calibrated p* per method
  };

  explicit Gateway(std::shared_ptr<const Snapshot> snapshot);
  static std::unique_ptr<Gateway> from_config(const Config& config);
  ~Gateway();

  void reload(std::shared_ptr<const Snapshot> snapshot);
  std::shared_ptr<const Snapshot> snapshot() const;

  /// Runs one decision. Throws trinv::Error on failure.
  GatewayResponse handle_query(const GatewayRequest& req) const;

  /// POST /v1/decide body -> reply, with the HTTP error mapping applied.
  HttpReply handle_decide(const std::string& body) const;
  /// GET /healthz: reachability of the chat, embedding and groundedness backends.
  HttpReply handle_health() const;

  /// Receives one JSON object per decision; calls are serialised.
  void set_decision_sink(std::function<void(const nlohmann::json&)> sink);
  void set_record_latency(bool on) { record_latency_ = on; }
  void set_retry_after_seconds(int s) { retry_after_s_ = s; }

  /// Binds and serves on a background thread; returns the bound port
  /// (port 0 picks a free one).
  int start(const std::string& host, int port, int threads = 16);
  /// Blocks serving until stop().
  void serve(const std::string& host, int port, int threads = 16);
  void stop();

 private:
  struct Server;

  void log_decision(const nlohmann::json& entry) const;
  HttpReply error_reply(int status, ErrorKind kind, const std::string& message) const;

  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snap_;
  mutable std::mutex sink_mu_;
  std::function<void(const nlohmann::json&)> sink_;
  bool record_latency_ = true;
  int retry_after_s_ = 5;
  std::unique_ptr<Server> server_;
};

}  // namespace trinv
