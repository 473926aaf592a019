#include "trinv/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "trinv/baselines.hpp"

namespace trinv {

using nlohmann::json;

std::string_view to_string(RunStatus s) { return s == RunStatus::Ok ? "ok" : "failed"; }

std::string RunResult::label() const {
  std::string l(to_string(method));
  if (cot_variant) l += "+CoT";
  return l;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads; the first exception
/// of each index is stored in errors[i].
template <class F>
std::vector<std::exception_ptr> parallel_for(std::size_t n, int workers, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto count = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  return errors;
}

ErrorKind root_kind(const Error& e) {
  if (const auto* d = dynamic_cast<const DecisionError*>(&e)) return d->cause();
  return e.kind();
}

/// Errors that point at the harness or its fixtures rather than at one sample.
bool fatal(ErrorKind k) { return k == ErrorKind::FixtureMiss || k == ErrorKind::Configuration; }

std::string describe(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const Error& e) {
    if (fatal(root_kind(e))) throw;
    return std::string(to_string(e.kind())) + ": " + e.what();
  } catch (const std::exception& e) {
    return e.what();
  }
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> calibration_split(
    std::size_t n, double fraction, std::uint64_t seed, const std::string& dataset) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw Error(ErrorKind::Configuration, "dev fraction must lie in [0,1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ fnv1a(dataset));
  std::shuffle(order.begin(), order.end(), rng);
  auto dev_n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (fraction > 0.0 && dev_n == 0 && n >= 2) dev_n = 1;
  std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_n));
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(dev_n), order.end());
  std::sort(dev.begin(), dev.end());
  std::sort(rest.begin(), rest.end());
  return {dev, rest};
}

RunOutput run_experiment(MethodConfig cfg, const DatasetFile& dataset, const Backends& backends,
                         std::uint64_t seed, const RunOptions& options,
                         const PromptCatalog& prompts) {
  cfg.sampling.seed = seed;
  cfg.validate();
  if (dataset.samples.empty()) throw Error(ErrorKind::Input, "dataset has no samples");

  RunOutput out;
  auto& res = out.result;
  res.method = cfg.method;
  res.cot_variant = cfg.cot_variant;
  res.dataset = dataset.name;
  res.domain_group = dataset.domain_group;
  res.backend = options.backend_id;
  res.seed = seed;

  std::vector<std::size_t> scored_idx(dataset.samples.size());
  std::iota(scored_idx.begin(), scored_idx.end(), 0);

  if (cfg.needs_calibration()) {
    auto [dev, rest] =
        calibration_split(dataset.samples.size(), options.dev_fraction, seed, dataset.name);
    scored_idx = std::move(rest);
    res.dev_size = dev.size();
    const DecideContext ctx{cfg, backends, prompts, seed};
    std::vector<std::optional<ConfidenceRecord>> recs(dev.size());
    auto errors = parallel_for(dev.size(), options.workers, [&](std::size_t i) {
      recs[i] = calibration_record(ctx, dataset.samples[dev[i]]);
    });
    for (std::size_t i = 0; i < dev.size(); ++i) {
      if (errors[i]) {
        describe(errors[i]);  // rethrows fatal errors; other dev failures are skipped
      } else {
        out.calibration.push_back(*recs[i]);
      }
    }
    if (out.calibration.empty()) {
      throw Error(ErrorKind::Calibration, "no usable dev samples to calibrate on");
    }
    const double p_star = calibrate_threshold(out.calibration);
    apply_threshold(cfg, p_star);
    res.calibrated_threshold = p_star;
  }

  const DecideContext ctx{cfg, backends, prompts, seed};
  out.decisions.resize(scored_idx.size());
  auto errors = parallel_for(scored_idx.size(), options.workers, [&](std::size_t i) {
    const auto& s = dataset.samples[scored_idx[i]];
    const auto t0 = std::chrono::steady_clock::now();
    auto d = decide_sample(ctx, s);
    d.latency_ms = options.record_latency
                       ? std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count()
                       : 0;
    out.decisions[i].decision = std::move(d);
  });

  std::vector<AbstainDecision> ok_decisions;
  std::vector<QuerySample> ok_samples;
  for (std::size_t i = 0; i < scored_idx.size(); ++i) {
    const auto& s = dataset.samples[scored_idx[i]];
    auto& rec = out.decisions[i];
    rec.sample_id = s.id;
    if (errors[i]) {
      rec.error = describe(errors[i]);
      rec.decision.reset();
      ++res.failures;
      continue;
    }
    rec.should_abstain = should_abstain_label(s, rec.decision->candidate);
    ok_decisions.push_back(*rec.decision);
    ok_samples.push_back(s);
  }

  res.counts = tally(ok_decisions, ok_samples);
  res.scored = ok_decisions.size();
  if (res.counts.total() > 0) {
    res.a_acc = abstain_accuracy(res.counts);
    res.r_acc = try_reliable_accuracy(res.counts);
  }
  const double fail_rate =
      scored_idx.empty() ? 0.0
                         : static_cast<double>(res.failures) / static_cast<double>(scored_idx.size());
  res.status = (fail_rate > options.max_failure_rate || res.counts.total() == 0) ? RunStatus::Failed
                                                                                  : RunStatus::Ok;
  if (options.decision_log) {
    write_decision_log(*options.decision_log, out.decisions);
    res.decision_log = options.decision_log->string();
  }
  return out;
}

json decision_to_json(const AbstainDecision& d) {
  json cand = {{"raw_text", d.candidate.raw_text}, {"parsed", d.candidate.parsed}};
  if (d.candidate.logprob_summary) {
    json lp = json::array();
    for (const auto& pos : *d.candidate.logprob_summary) {
      json row = json::array();
      for (const auto& [tok, v] : pos) row.push_back(json::array({tok, v}));
      lp.push_back(std::move(row));
    }
    cand["logprobs"] = std::move(lp);
  }
  return {{"abstain", d.abstain},
          {"candidate", std::move(cand)},
          {"votes", d.votes},
          {"scores", d.scores},
          {"diagnostics", d.diagnostics},
          {"method", to_string(d.method)},
          {"latency_ms", d.latency_ms}};
}

AbstainDecision decision_from_json(const json& j) {
  AbstainDecision d;
  try {
    d.abstain = j.at("abstain").get<bool>();
    const auto& c = j.at("candidate");
    d.candidate.raw_text = c.value("raw_text", std::string());
    d.candidate.parsed = c.value("parsed", std::string(kUnparsed));
    if (auto it = c.find("logprobs"); it != c.end()) {
      LogprobSummary lp;
      for (const auto& row : *it) {
        auto& pos = lp.emplace_back();
        for (const auto& pair : row) {
          pos.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
        }
      }
      d.candidate.logprob_summary = std::move(lp);
    }
    d.votes = j.value("votes", std::map<std::string, bool>{});
    d.scores = j.value("scores", std::map<std::string, double>{});
    d.diagnostics = j.value("diagnostics", std::map<std::string, std::string>{});
    d.method = method_from_string(j.at("method").get<std::string>());
    d.latency_ms = j.value("latency_ms", std::int64_t{0});
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("decision: ") + e.what());
  }
  return d;
}

json record_to_json(const DecisionRecord& r) {
  json j = {{"sample_id", r.sample_id}};
  if (r.decision) {
    j["should_abstain"] = r.should_abstain;
    j["decision"] = decision_to_json(*r.decision);
  } else {
    j["error"] = r.error;
  }
  return j;
}

DecisionRecord record_from_json(const json& j) {
  DecisionRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    if (auto it = j.find("decision"); it != j.end()) {
      r.decision = decision_from_json(*it);
      r.should_abstain = j.value("should_abstain", false);
    } else {
      r.error = j.value("error", std::string());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("decision record: ") + e.what());
  }
  return r;
}

void write_decision_log(const std::filesystem::path& path, const std::vector<DecisionRecord>& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& r : log) out << record_to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<DecisionRecord> read_decision_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<DecisionRecord> log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      log.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Schema,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

json result_to_json(const RunResult& r) {
  json j = {{"method", to_string(r.method)},
            {"cot_variant", r.cot_variant},
            {"dataset", r.dataset},
            {"domain_group", to_string(r.domain_group)},
            {"backend", r.backend},
            {"seed", r.seed},
            {"counts", {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp}, {"fn", r.counts.fn}}},
            {"a_acc", r.a_acc ? json(*r.a_acc) : json()},
            {"r_acc", r.r_acc ? json(*r.r_acc) : json()},
            {"scored", r.scored},
            {"failures", r.failures},
            {"dev_size", r.dev_size},
            {"status", to_string(r.status)},
            {"decision_log", r.decision_log}};
  if (r.calibrated_threshold) j["calibrated_threshold"] = *r.calibrated_threshold;
  return j;
}

RunResult result_from_json(const json& j) {
  RunResult r;
  try {
    r.method = method_from_string(j.at("method").get<std::string>());
    r.cot_variant = j.value("cot_variant", false);
    r.dataset = j.at("dataset").get<std::string>();
    r.domain_group = j.contains("domain_group")
                         ? domain_group_from_string(j.at("domain_group").get<std::string>())
                         : default_domain(r.dataset);
    r.backend = j.value("backend", std::string("unknown"));
    r.seed = j.value("seed", std::uint64_t{0});
    if (auto it = j.find("counts"); it != j.end()) {
      r.counts = {it->at("tp").get<std::int64_t>(), it->at("tn").get<std::int64_t>(),
                  it->at("fp").get<std::int64_t>(), it->at("fn").get<std::int64_t>()};
    }
    if (auto it = j.find("a_acc"); it != j.end() && !it->is_null()) r.a_acc = it->get<double>();
    if (auto it = j.find("r_acc"); it != j.end() && !it->is_null()) r.r_acc = it->get<double>();
    r.scored = j.value("scored", std::size_t{0});
    r.failures = j.value("failures", std::size_t{0});
    r.dev_size = j.value("dev_size", std::size_t{0});
    if (auto it = j.find("calibrated_threshold"); it != j.end() && !it->is_null()) {
      r.calibrated_threshold = it->get<double>();
    }
    r.status = j.value("status", std::string("ok")) == "failed" ? RunStatus::Failed : RunStatus::Ok;
    r.decision_log = j.value("decision_log", std::string());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("run result: ") + e.what());
  }
  return r;
}

std::vector<RunResult> load_results(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<RunResult> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + f.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Schema, f.string() + ": " + e.what());
    }
    if (j.is_array()) {
      for (const auto& item : j) out.push_back(result_from_json(item));
    } else if (j.is_object() && j.contains("method") && j.contains("dataset")) {
      out.push_back(result_from_json(j));
    }
  }
  return out;
}

}  // namespace trinv
