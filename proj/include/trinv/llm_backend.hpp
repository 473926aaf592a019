#pragma once

#include <Eigen/Core>

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trinv/core.hpp"
#include "trinv/retry.hpp"

namespace trinv {

enum class ReasoningEffort { Low, Medium, High };

std::string_view to_string(ReasoningEffort e);
ReasoningEffort reasoning_effort_from_string(std::string_view s);

struct SamplingParams {
  double temperature = 0.1;
  int max_new_tokens = 1024;
  bool want_logprobs = false;
  int top_k_logprobs = 5;
  std::optional<ReasoningEffort> reasoning_effort;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

enum class EndpointKind { Chat, Embedding, Groundedness, Scripted };

std::string_view to_string(EndpointKind k);
EndpointKind endpoint_kind_from_string(std::string_view s);

struct BackendEndpoint {
  EndpointKind kind = EndpointKind::Chat;
  std::string base_url;  // URL, or fixture path for Scripted
  std::string model_id;
  std::optional<std::string> auth_env;  // name of the env var holding the secret
  int timeout_ms = 60000;
  bool logprobs = true;  // whether the endpoint can return token logprobs
  int max_in_flight = 8;
  RetryPolicy retry;
};

enum class FinishReason { Stop, Length, Error };

struct Completion {
  std::string text;
  std::optional<LogprobSummary> logprob_summary;
  FinishReason finish_reason = FinishReason::Stop;
  int attempts = 1;
};

struct Message {
  std::string role;
  std::string content;
};

using Embedding = Eigen::VectorXd;

struct GroundednessResult {
  bool risk = false;
  std::optional<double> score;
  int attempts = 1;
};

/// Counting gate bounding in-flight calls per endpoint.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int slots) : free_(slots < 1 ? 1 : slots) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

  class Slot {
   public:
    explicit Slot(ConcurrencyLimiter& l) : l_(l) { l_.acquire(); }
    ~Slot() { l_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyLimiter& l_;
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int free_;
};

/// One endpoint. The *_once methods perform a single attempt and throw
/// Error(Transient) for retryable failures; callers go through chat_complete,
/// embed and groundedness_check, which add precondition checks, the limiter
/// and the retry loop.
class Backend {
 public:
  explicit Backend(BackendEndpoint endpoint)
      : endpoint_(std::move(endpoint)), limiter_(endpoint_.max_in_flight) {}
  virtual ~Backend() = default;

  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendEndpoint& endpoint() const { return endpoint_; }
  ConcurrencyLimiter& limiter() { return limiter_; }

  virtual bool supports_logprobs() const { return endpoint_.logprobs; }
  virtual bool reachable() = 0;

  virtual Completion chat_once(std::span<const Message> messages,
                               const SamplingParams& params) = 0;
  virtual Embedding embed_once(std::string_view text) = 0;
  virtual GroundednessResult groundedness_once(std::string_view context,
                                               std::string_view claim) = 0;

  /// Records the first embedding size and rejects later mismatches.
  void check_embedding_dim(Eigen::Index dim);

 private:
  BackendEndpoint endpoint_;
  ConcurrencyLimiter limiter_;
  std::atomic<Eigen::Index> embed_dim_{-1};
};

using BackendPtr = std::shared_ptr<Backend>;

Completion chat_complete(Backend& backend, std::span<const Message> messages,
                         const SamplingParams& params);
Embedding embed(Backend& backend, std::string_view text);
GroundednessResult groundedness_check(Backend& backend, std::string_view context,
                                      std::string_view claim);

/// Stable hex digest of a role-tagged message list (FNV-1a, 64 bit).
std::string request_digest(std::span<const Message> messages);
std::string embed_digest(std::string_view text);
std::string groundedness_digest(std::string_view context, std::string_view claim);

/// Scripted for Scripted endpoints, HTTP otherwise.
BackendPtr make_backend(const BackendEndpoint& endpoint);

}  // namespace trinv
