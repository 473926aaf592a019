#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>

#include "trinv/error.hpp"

namespace trinv {

struct RetryPolicy {
  int max_attempts = 10;
  std::chrono::milliseconds base_delay{500};
  double factor = 2.0;
  std::chrono::milliseconds max_delay{30000};
  bool jitter = true;
  /// Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
  std::optional<std::uint64_t> jitter_seed;
};

template <class T>
struct Attempted {
  T value;
  int attempts = 1;
};

/// Delay before retry number `retry` (1-based): full jitter over
/// [0, min(max_delay, base_delay * factor^(retry-1))].
template <class Rng>
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, Rng& rng) {
  const double ceiling =
      std::min(static_cast<double>(policy.max_delay.count()),
               static_cast<double>(policy.base_delay.count()) *
                   std::pow(policy.factor, static_cast<double>(retry - 1)));
  if (!policy.jitter || ceiling <= 0.0) {
    return std::chrono::milliseconds(static_cast<std::int64_t>(ceiling));
  }
  std::uniform_real_distribution<double> dist(0.0, ceiling);
  return std::chrono::milliseconds(static_cast<std::int64_t>(dist(rng)));
}

/// Runs `action` until it succeeds, retrying only ErrorKind::Transient
/// failures. Any other exception propagates on the first throw.
template <class F>
auto with_retries(const RetryPolicy& policy, F&& action)
    -> Attempted<std::invoke_result_t<F&>> {
  std::mt19937_64 rng(policy.jitter_seed ? *policy.jitter_seed : std::random_device{}());
  const int max_attempts = std::max(1, policy.max_attempts);
  std::string last_cause;
  for (int attempt = 1;; ++attempt) {
    try {
      return {action(), attempt};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Transient) throw;
      last_cause = e.what();
    }
    if (attempt >= max_attempts) {
      throw BackendUnavailable(last_cause, attempt);
    }
    const auto delay = backoff_delay(policy, attempt, rng);
    if (policy.sleep) {
      policy.sleep(delay);
    } else if (delay.count() > 0) {
      std::this_thread::sleep_for(delay);
    }
  }
}

}  // namespace trinv
