#pragma once

// Shared helpers for the unit and acceptance tests.

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "trinv/http_backend.hpp"
#include "trinv/scripted_backend.hpp"
#include "trinv/tables.hpp"
#include "trinv/trace_inversion.hpp"

namespace testing {

inline trinv::QuerySample make_sample(std::string id, std::string prompt, bool answerable,
                                      std::vector<std::string> refs,
                                      std::vector<std::string> options = {}) {
  trinv::QuerySample s;
  s.id = std::move(id);
  s.prompt = std::move(prompt);
  s.answerable = answerable;
  s.references = std::move(refs);
  s.options = std::move(options);
  return s;
}

inline std::vector<trinv::Message> user(const std::string& content) {
  return {trinv::Message{"user", content}};
}

/// Forwards to another backend and keeps every chat payload it sees.
class RecordingBackend : public trinv::Backend {
 public:
  explicit RecordingBackend(trinv::BackendPtr inner)
      : Backend(inner->endpoint()), inner_(std::move(inner)) {}

  bool reachable() override { return inner_->reachable(); }
  bool supports_logprobs() const override { return inner_->supports_logprobs(); }

  trinv::Completion chat_once(std::span<const trinv::Message> messages,
                              const trinv::SamplingParams& params) override {
    {
      std::lock_guard lock(mu_);
      chats_.emplace_back(messages.begin(), messages.end());
    }
    return inner_->chat_once(messages, params);
  }
  trinv::Embedding embed_once(std::string_view text) override { return inner_->embed_once(text); }
  trinv::GroundednessResult groundedness_once(std::string_view context,
                                              std::string_view claim) override {
    return inner_->groundedness_once(context, claim);
  }

  std::vector<std::vector<trinv::Message>> chats() const {
    std::lock_guard lock(mu_);
    return chats_;
  }

 private:
  trinv::BackendPtr inner_;
  mutable std::mutex mu_;
  std::vector<std::vector<trinv::Message>> chats_;
};

/// Transport returning queued responses in order and recording requests.
class FakeTransport : public trinv::Transport {
 public:
  struct Request {
    std::string path;
    std::string body;
    std::map<std::string, std::string> headers;
  };

  explicit FakeTransport(std::vector<trinv::HttpResponse> replies) : replies_(std::move(replies)) {}

  trinv::HttpResponse post(const std::string& path, const std::string& body,
                           const std::map<std::string, std::string>& headers) override {
    std::lock_guard lock(mu_);
    requests.push_back({path, body, headers});
    if (next_ >= replies_.size()) return {0, "", "no more replies"};
    return replies_[next_++];
  }
  bool ping() override { return true; }

  std::vector<Request> requests;

 private:
  std::mutex mu_;
  std::vector<trinv::HttpResponse> replies_;
  std::size_t next_ = 0;
};

/// What the scripted pipeline says about one sample.
struct TiScript {
  std::string trace;         // model's CoT output
  std::string reconstruction;  // reconstructor output
  std::vector<double> q_vec;
  std::vector<double> q_star_vec;
  std::string judge = "Final answer: YES";
  bool risk = false;
};

/// Records every fixture a Trace Inversion decision on `s` will request.
/// `q_star` must equal what reconstruct_query extracts from `t.reconstruction`.
inline void script_trace_inversion(trinv::ScriptBuilder& b, const trinv::QuerySample& s,
                                   const TiScript& t, const std::string& q_star) {
  const auto& prompts = trinv::PromptCatalog::defaults();
  b.chat(user(trinv::apply_cot_variant(s.prompt)), t.trace);
  trinv::ReasoningTrace trace;
  trace.id = s.id;
  trace.steps_text = t.trace;
  b.chat(trinv::reconstruction_request(trace), t.reconstruction);
  b.embed(s.prompt, t.q_vec);
  b.embed(q_star, t.q_star_vec);
  b.chat(user(trinv::render(prompts.get("trace_inversion", "judge"),
                            {{"q1", s.prompt}, {"q2", q_star}})),
         t.judge);
  b.ground(s.prompt, q_star, t.risk);
}

/// One row of the printed abstain-accuracy table.
struct Table1Row {
  std::string model;
  std::string method;
  std::vector<double> datasets;  // nine, in canonical order
  double mk = 0, comp = 0, bs = 0, overall = 0;
};

inline std::vector<Table1Row> load_table1(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<Table1Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> f;
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    Table1Row r;
    r.model = f[0];
    r.method = f[1];
    const int ds_cols[] = {2, 3, 4, 6, 7, 8, 10, 11, 12};
    for (int c : ds_cols) r.datasets.push_back(std::stod(f[static_cast<std::size_t>(c)]));
    r.mk = std::stod(f[5]);
    r.comp = std::stod(f[9]);
    r.bs = std::stod(f[13]);
    r.overall = std::stod(f[14]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Printed cells as single-seed RunResults (backend = model).
inline std::vector<trinv::RunResult> table1_results(const std::vector<Table1Row>& rows) {
  std::vector<trinv::RunResult> out;
  const auto names = trinv::canonical_datasets();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.datasets.size(); ++i) {
      trinv::RunResult rr;
      rr.method = trinv::method_from_string(r.method);
      rr.dataset = std::string(names[i]);
      rr.domain_group = trinv::default_domain(rr.dataset);
      rr.backend = r.model;
      rr.a_acc = r.datasets[i];
      out.push_back(rr);
    }
  }
  return out;
}

struct Table2Row {
  std::string method;
  double gaps[3];
};

inline std::vector<Table2Row> load_table2(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<Table2Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    Table2Row r;
    std::getline(ss, r.method, ',');
    for (double& g : r.gaps) {
      std::string tok;
      std::getline(ss, tok, ',');
      g = std::stod(tok);
    }
    rows.push_back(r);
  }
  return rows;
}

/// Exhaustive E(t) minimiser over {0.01..0.99}, smallest t on ties.
inline double brute_force_threshold(const std::vector<trinv::ConfidenceRecord>& dev) {
  double best_t = -1;
  long best = -1;
  for (int k = 1; k <= 99; ++k) {
    const double t = k / 100.0;
    long e = 0;
    for (const auto& r : dev) {
      if (r.confidence < t && r.correct) ++e;
      if (r.confidence >= t && !r.correct) ++e;
    }
    if (best < 0 || e < best) {
      best = e;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace testing
