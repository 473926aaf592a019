#include "trinv/llm_backend.hpp"

#include <cctype>
#include <cstdio>

#include "trinv/http_backend.hpp"
#include "trinv/scripted_backend.hpp"

namespace trinv {

std::string_view to_string(ReasoningEffort e) {
  switch (e) {
    case ReasoningEffort::Low: return "low";
    case ReasoningEffort::Medium: return "medium";
    case ReasoningEffort::High: return "high";
  }
  return "medium";
}

ReasoningEffort reasoning_effort_from_string(std::string_view s) {
  if (s == "low") return ReasoningEffort::Low;
  if (s == "medium") return ReasoningEffort::Medium;
  if (s == "high") return ReasoningEffort::High;
  throw Error(ErrorKind::Configuration, "unknown reasoning effort '" + std::string(s) + "'");
}

std::string_view to_string(EndpointKind k) {
  switch (k) {
    case EndpointKind::Chat: return "chat";
    case EndpointKind::Embedding: return "embedding";
    case EndpointKind::Groundedness: return "groundedness";
    case EndpointKind::Scripted: return "scripted";
  }
  return "chat";
}

EndpointKind endpoint_kind_from_string(std::string_view s) {
  for (auto k : {EndpointKind::Chat, EndpointKind::Embedding, EndpointKind::Groundedness,
                 EndpointKind::Scripted}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::Configuration, "unknown endpoint kind '" + std::string(s) + "'");
}

void SamplingParams::validate() const {
  if (temperature < 0.0) {
    throw Error(ErrorKind::Configuration, "temperature must be >= 0");
  }
  if (max_new_tokens <= 0) {
    throw Error(ErrorKind::Configuration, "max_new_tokens must be positive");
  }
  if (want_logprobs && top_k_logprobs < 1) {
    throw Error(ErrorKind::Configuration, "top_k_logprobs must be >= 1 when logprobs are wanted");
  }
}

void Backend::check_embedding_dim(Eigen::Index dim) {
  Eigen::Index expected = -1;
  if (embed_dim_.compare_exchange_strong(expected, dim)) return;
  if (expected != dim) {
    throw Error(ErrorKind::Protocol, "embedding dimension changed from " +
                                         std::to_string(expected) + " to " +
                                         std::to_string(dim));
  }
}

namespace {

void require_kind(const Backend& b, EndpointKind wanted, const char* op) {
  const auto kind = b.endpoint().kind;
  if (kind != wanted && kind != EndpointKind::Scripted) {
    throw Error(ErrorKind::Configuration, std::string(op) + " needs a " +
                                              std::string(to_string(wanted)) +
                                              " endpoint, got " + std::string(to_string(kind)));
  }
}

}  // namespace

Completion chat_complete(Backend& backend, std::span<const Message> messages,
                         const SamplingParams& params) {
  require_kind(backend, EndpointKind::Chat, "chat_complete");
  params.validate();
  ConcurrencyLimiter::Slot slot(backend.limiter());
  auto [completion, attempts] = with_retries(
      backend.endpoint().retry, [&] { return backend.chat_once(messages, params); });
  completion.attempts = attempts;
  if (!params.want_logprobs || !backend.supports_logprobs()) {
    completion.logprob_summary.reset();
  } else if (completion.logprob_summary) {
    for (auto& position : *completion.logprob_summary) {
      if (position.size() > static_cast<std::size_t>(params.top_k_logprobs)) {
        position.resize(static_cast<std::size_t>(params.top_k_logprobs));
      }
    }
  }
  return completion;
}

Embedding embed(Backend& backend, std::string_view text) {
  require_kind(backend, EndpointKind::Embedding, "embed");
  if (text.empty()) {
    throw Error(ErrorKind::Input, "embed: empty text");
  }
  ConcurrencyLimiter::Slot slot(backend.limiter());
  auto result = with_retries(backend.endpoint().retry, [&] { return backend.embed_once(text); });
  backend.check_embedding_dim(result.value.size());
  return std::move(result.value);
}

GroundednessResult groundedness_check(Backend& backend, std::string_view context,
                                      std::string_view claim) {
  require_kind(backend, EndpointKind::Groundedness, "groundedness_check");
  ConcurrencyLimiter::Slot slot(backend.limiter());
  auto [result, attempts] = with_retries(
      backend.endpoint().retry, [&] { return backend.groundedness_once(context, claim); });
  result.attempts = attempts;
  return result;
}

namespace {

class Fnv1a {
 public:
  void update(std::string_view s) {
    for (unsigned char c : s) {
      hash_ ^= c;
      hash_ *= 0x100000001b3ULL;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
    return buf;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string request_digest(std::span<const Message> messages) {
  Fnv1a h;
  for (const auto& m : messages) {
    h.update(m.role);
    h.update("\x1f");
    h.update(m.content);
    h.update("\x1e");
  }
  return h.hex();
}

std::string embed_digest(std::string_view text) {
  const Message m{"embed", std::string(text)};
  return request_digest(std::span(&m, 1));
}

std::string groundedness_digest(std::string_view context, std::string_view claim) {
  const Message ms[] = {{"context", std::string(context)}, {"claim", std::string(claim)}};
  return request_digest(ms);
}

BackendPtr make_backend(const BackendEndpoint& endpoint) {
  if (endpoint.kind == EndpointKind::Scripted) {
    return ScriptedBackend::from_file(endpoint);
  }
  return std::make_shared<HttpBackend>(endpoint);
}

}  // namespace trinv
