#pragma once

#include <map>
#include <memory>
#include <string>

#include "trinv/llm_backend.hpp"

namespace trinv {

struct HttpResponse {
  int status = 0;  // 0: transport failure, see `error`
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
  virtual bool ping() = 0;
};

/// cpp-httplib transport rooted at an origin ("http://host:port").
std::unique_ptr<Transport> make_http_transport(const std::string& origin, int timeout_ms);

/// Splits "https://host:8000/v1" into {"https://host:8000", "/v1"}.
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

/// OpenAI-compatible chat/embedding client plus the {context, claim} ->
/// {risk, score} groundedness contract.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendEndpoint endpoint, std::unique_ptr<Transport> transport = nullptr);

  bool reachable() override;

  Completion chat_once(std::span<const Message> messages,
                       const SamplingParams& params) override;
  Embedding embed_once(std::string_view text) override;
  GroundednessResult groundedness_once(std::string_view context,
                                       std::string_view claim) override;

 private:
  HttpResponse post(const std::string& route, const std::string& body);

  std::unique_ptr<Transport> transport_;
  std::string path_prefix_;
};

}  // namespace trinv
