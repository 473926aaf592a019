#include <doctest.h>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "trinv/http_backend.hpp"
#include "trinv/scorers.hpp"
#include "trinv/scripted_backend.hpp"

using namespace trinv;
using nlohmann::json;
using testing::FakeTransport;
using testing::user;

namespace {

BackendEndpoint http_endpoint(EndpointKind kind) {
  BackendEndpoint e;
  e.kind = kind;
  e.base_url = "http://fake.local/v1";
  e.model_id = "m";
  e.retry.sleep = [](std::chrono::milliseconds) {};
  e.retry.jitter_seed = 3;
  return e;
}

std::string chat_body(const std::string& text) {
  return json{{"choices", {{{"message", {{"content", text}}}, {"finish_reason", "stop"}}}}}.dump();
}

LogprobSummary five_wide() {
  return {{{"B", -0.1}, {"A", -2.0}, {"C", -3.0}, {"D", -4.0}, {" ", -5.0}}};
}

}  // namespace

TEST_CASE("scripted chat echoes its fixture") {
  ScriptBuilder b;
  b.chat_user("What is 2+2?", "Final answer: B");
  auto backend = b.build();
  SamplingParams p;
  auto c = chat_complete(*backend, user("What is 2+2?"), p);
  CHECK(c.text == "Final answer: B");
  CHECK_FALSE(c.logprob_summary.has_value());
  CHECK(c.attempts == 1);
}

TEST_CASE("scripted logprobs carry exactly top-5 per position when requested") {
  ScriptBuilder b;
  b.chat_user("q", "B", five_wide());
  auto backend = b.build();
  SamplingParams p;
  p.want_logprobs = true;
  p.top_k_logprobs = 5;
  auto c = chat_complete(*backend, user("q"), p);
  REQUIRE(c.logprob_summary.has_value());
  REQUIRE(c.logprob_summary->size() == 1);
  CHECK(c.logprob_summary->front().size() == 5);
  for (const auto& [tok, lp] : c.logprob_summary->front()) CHECK(lp <= 0.0);
}

TEST_CASE("unknown fixture key fails loudly") {
  auto backend = ScriptBuilder{}.build();
  try {
    chat_complete(*backend, user("missing"), SamplingParams{});
    FAIL("expected a fixture miss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FixtureMiss);
  }
}

TEST_CASE("scripted transient errors go through the retry loop") {
  ScriptBuilder b;
  b.chat_error(user("q"), "unavailable");
  auto backend = b.build();
  try {
    chat_complete(*backend, user("q"), SamplingParams{});
    FAIL("expected BackendUnavailable");
  } catch (const BackendUnavailable& e) {
    CHECK(e.attempts() == backend->endpoint().retry.max_attempts);
  }
}

TEST_CASE("request digest depends on roles and content") {
  const std::vector<Message> a = {{"user", "hi"}};
  const std::vector<Message> b = {{"assistant", "hi"}};
  const std::vector<Message> c = {{"user", "h"}, {"user", "i"}};
  CHECK(request_digest(a) == request_digest(a));
  CHECK(request_digest(a) != request_digest(b));
  CHECK(request_digest(a) != request_digest(c));
}

TEST_CASE("scripted embeddings are deterministic and orthogonal fixtures give cosine 0") {
  ScriptBuilder b;
  b.embed("hello", {1, 0, 0}).embed("world", {0, 1, 0});
  auto backend = b.build();
  const auto v1 = embed(*backend, "hello");
  const auto v2 = embed(*backend, "hello");
  CHECK(v1 == v2);
  CHECK(v1.size() == 3);
  CHECK(v1[0] == 1.0);
  CHECK(cosine(v1, embed(*backend, "world")) == 0.0);
}

TEST_CASE("embedding dimension change is a protocol error") {
  ScriptBuilder b;
  b.embed("a", {1, 0, 0}).embed("b", {1, 0});
  auto backend = b.build();
  embed(*backend, "a");
  try {
    embed(*backend, "b");
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
}

TEST_CASE("scripted groundedness") {
  const std::string q = "Who was not comfortable using the phone?";
  const std::string bad = "Who is more likely to not be comfortable using the phone?";
  ScriptBuilder b;
  b.ground(q, q, false).ground(q, bad, true, 0.93);
  auto backend = b.build();
  CHECK_FALSE(groundedness_check(*backend, q, q).risk);
  auto g = groundedness_check(*backend, q, bad);
  CHECK(g.risk);
  REQUIRE(g.score.has_value());
  CHECK(*g.score == doctest::Approx(0.93));
}

TEST_CASE("HTTP chat retries nine 500s and succeeds on attempt ten") {
  std::vector<HttpResponse> replies(9, HttpResponse{500, "oops", ""});
  replies.push_back({200, chat_body("Final answer: B"), ""});
  auto transport = std::make_unique<FakeTransport>(replies);
  auto* t = transport.get();
  HttpBackend backend(http_endpoint(EndpointKind::Chat), std::move(transport));
  auto c = chat_complete(backend, user("q"), SamplingParams{});
  CHECK(c.text == "Final answer: B");
  CHECK(c.attempts == 10);
  CHECK(t->requests.size() == 10);
  CHECK(t->requests.front().path == "/v1/chat/completions");
}

TEST_CASE("HTTP chat failing ten times is backend-unavailable") {
  std::vector<HttpResponse> replies(11, HttpResponse{503, "", ""});
  replies.back() = {200, chat_body("late"), ""};
  auto transport = std::make_unique<FakeTransport>(replies);
  auto* t = transport.get();
  HttpBackend backend(http_endpoint(EndpointKind::Chat), std::move(transport));
  try {
    chat_complete(backend, user("q"), SamplingParams{});
    FAIL("expected BackendUnavailable");
  } catch (const BackendUnavailable& e) {
    CHECK(e.attempts() == 10);
  }
  CHECK(t->requests.size() == 10);
}

TEST_CASE("HTTP chat wire format") {
  json body = {{"choices",
                {{{"message", {{"content", "B"}}},
                  {"logprobs",
                   {{"content",
                     {{{"token", "B"},
                       {"top_logprobs",
                        {{{"token", "B"}, {"logprob", -0.05}},
                         {{"token", "A"}, {"logprob", -3.1}}}}}}}}}}}}};
  auto transport = std::make_unique<FakeTransport>(std::vector<HttpResponse>{{200, body.dump(), ""}});
  auto* t = transport.get();
  HttpBackend backend(http_endpoint(EndpointKind::Chat), std::move(transport));
  SamplingParams p;
  p.want_logprobs = true;
  p.top_k_logprobs = 2;
  p.reasoning_effort = ReasoningEffort::Medium;
  auto c = chat_complete(backend, user("question"), p);
  const auto req = json::parse(t->requests.at(0).body);
  CHECK(req["model"] == "m");
  CHECK(req["messages"][0]["role"] == "user");
  CHECK(req["messages"][0]["content"] == "question");
  CHECK(req["temperature"].get<double>() == doctest::Approx(0.1));
  CHECK(req["max_tokens"] == 1024);
  CHECK(req["logprobs"] == true);
  CHECK(req["top_logprobs"] == 2);
  CHECK(req["reasoning_effort"] == "medium");
  REQUIRE(c.logprob_summary.has_value());
  CHECK((*c.logprob_summary)[0].size() == 2);
  CHECK((*c.logprob_summary)[0][1].first == "A");
}

TEST_CASE("HTTP 4xx is a protocol error without retries") {
  auto transport = std::make_unique<FakeTransport>(
      std::vector<HttpResponse>{{400, "bad", ""}, {200, chat_body("x"), ""}});
  auto* t = transport.get();
  HttpBackend backend(http_endpoint(EndpointKind::Chat), std::move(transport));
  try {
    chat_complete(backend, user("q"), SamplingParams{});
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
  CHECK(t->requests.size() == 1);
}

TEST_CASE("HTTP embedding and groundedness wire formats") {
  auto et = std::make_unique<FakeTransport>(std::vector<HttpResponse>{
      {200, R"({"data":[{"embedding":[0.5,0.5]}]})", ""}});
  auto* etp = et.get();
  HttpBackend embedder(http_endpoint(EndpointKind::Embedding), std::move(et));
  auto v = embed(embedder, "text");
  CHECK(v.size() == 2);
  CHECK(json::parse(etp->requests[0].body)["input"] == "text");
  CHECK(etp->requests[0].path == "/v1/embeddings");

  auto gt = std::make_unique<FakeTransport>(std::vector<HttpResponse>{
      {200, R"({"risk":"yes","score":0.8})", ""}, {200, R"({"risk":"maybe"})", ""}});
  auto* gtp = gt.get();
  HttpBackend guard(http_endpoint(EndpointKind::Groundedness), std::move(gt));
  auto g = groundedness_check(guard, "ctx", "claim");
  CHECK(g.risk);
  CHECK(*g.score == doctest::Approx(0.8));
  const auto req = json::parse(gtp->requests[0].body);
  CHECK(req["context"] == "ctx");
  CHECK(req["claim"] == "claim");
  try {
    groundedness_check(guard, "ctx", "claim");
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
}

TEST_CASE("kind mismatch is a configuration error") {
  auto transport = std::make_unique<FakeTransport>(std::vector<HttpResponse>{});
  HttpBackend embedder(http_endpoint(EndpointKind::Embedding), std::move(transport));
  try {
    chat_complete(embedder, user("q"), SamplingParams{});
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Configuration);
  }
}

TEST_CASE("auth comes from the named env var") {
  auto e = http_endpoint(EndpointKind::Chat);
  e.auth_env = "TRINV_TEST_SECRET_VAR";
  ::unsetenv("TRINV_TEST_SECRET_VAR");
  {
    auto transport = std::make_unique<FakeTransport>(std::vector<HttpResponse>{});
    HttpBackend backend(e, std::move(transport));
    CHECK_THROWS_AS(chat_complete(backend, user("q"), SamplingParams{}), Error);
  }
  ::setenv("TRINV_TEST_SECRET_VAR", "s3cret", 1);
  auto transport = std::make_unique<FakeTransport>(
      std::vector<HttpResponse>{{200, chat_body("ok"), ""}});
  auto* t = transport.get();
  HttpBackend backend(e, std::move(transport));
  chat_complete(backend, user("q"), SamplingParams{});
  CHECK(t->requests[0].headers.at("Authorization") == "Bearer s3cret");
  ::unsetenv("TRINV_TEST_SECRET_VAR");
}

TEST_CASE("split_base_url") {
  CHECK(split_base_url("https://h:8000/v1/") == std::pair<std::string, std::string>{"https://h:8000", "/v1"});
  CHECK(split_base_url("http://h") == std::pair<std::string, std::string>{"http://h", ""});
  CHECK_THROWS_AS(split_base_url("h/v1"), Error);
}
