#include "trinv/mimic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace trinv {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

std::string item_tag(std::string_view text) {
  const auto start = text.rfind("[item ");
  if (start == std::string_view::npos) return {};
  const auto end = text.find(']', start);
  if (end == std::string_view::npos) return {};
  return std::string(text.substr(start + 6, end - start - 6));
}

/// Letter following `marker` ("option C" -> "C").
std::string letter_after(std::string_view text, std::string_view marker) {
  const auto at = text.rfind(marker);
  if (at == std::string_view::npos) return {};
  const auto pos = at + marker.size();
  if (pos >= text.size() || !std::isupper(static_cast<unsigned char>(text[pos]))) return {};
  return std::string(1, text[pos]);
}

std::string fixed2(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string_view::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

}  // namespace

Embedding hashed_embedding(std::string_view text, int dims) {
  Embedding v = Embedding::Zero(dims);
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    const auto h = fnv1a(tok);
    v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dims))] += (h >> 32) & 1 ? 1.0 : -1.0;
    tok.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      tok += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  if (const double n = v.norm(); n > 0.0) v /= n;
  return v;
}

SimulatedBackend::SimulatedBackend(std::map<std::string, MimicPlan> plans, std::uint64_t seed)
    : Backend([] {
        BackendEndpoint e;
        e.kind = EndpointKind::Scripted;
        e.base_url = "simulated";
        e.model_id = "mimic";
        e.retry.base_delay = std::chrono::milliseconds(0);
        e.retry.jitter = false;
        return e;
      }()),
      plans_(std::move(plans)),
      seed_(seed) {}

const MimicPlan& SimulatedBackend::plan_for(std::string_view text) const {
  auto it = plans_.find(item_tag(text));
  if (it == plans_.end()) throw Error(ErrorKind::FixtureMiss, "simulator: no item tag in request: " + std::string(text.substr(0, 200)));
  return it->second;
}

double SimulatedBackend::draw(const MimicPlan& plan, std::string_view stage) const {
  const auto h = fnv1a(stage, fnv1a(plan.item, seed_ * 0x9E3779B97F4A7C15ULL + 1));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void SimulatedBackend::record(const std::string& digest, json reply) {
  std::lock_guard lock(mu_);
  recorded_[digest] = std::move(reply);
}

json SimulatedBackend::recorded() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

Completion SimulatedBackend::chat_once(std::span<const Message> messages,
                                       const SamplingParams&) {
  if (messages.empty()) throw Error(ErrorKind::Input, "empty conversation");
  const std::string& c = messages.back().content;
  std::string all;
  for (const auto& m : messages) all += m.content + "\n";
  const auto& p = plan_for(all);
  json reply;
  std::string text;

  if (contains(c, "Reasoning Trace:")) {
    text = "Reconstructed query: " + p.q_star;
  } else if (contains(c, "Do the following two prompts")) {
    const bool same = p.aligned != (draw(p, "judge") < 0.15);
    text = same ? "YES" : "NO";
  } else if (contains(c, "Provide the probability your guess")) {
    const double v = std::clamp(p.confidence + (draw(p, "askcali") - 0.5) * 0.3, 0.0, 1.0);
    text = "Probability: " + fixed2(v);
  } else if (contains(c, "Is the above answer correct?")) {
    text = std::string("Final answer: ") + (draw(p, "reflect") < (p.correct ? 0.8 : 0.45) ? "A" : "B");
  } else if (contains(c, "generate domain-specific knowledge")) {
    const auto d = c.find("domain \"");
    const auto domain = d == std::string::npos ? std::string("general")
                                               : c.substr(d + 8, c.find('"', d + 8) - d - 8);
    text = "Background on " + domain + " facts for [item " + p.item + "].";
  } else if (contains(c, "Review the proposed answer")) {
    const auto k = c.find("Knowledge:");
    const bool good = draw(p, "feedback:" + c.substr(k, c.find('\n', k) - k)) <
                      (p.correct ? 0.75 : 0.4);
    text = good ? "The proposed answer looks right." : "The proposed answer looks doubtful.";
  } else if (contains(c, "Based on feedback")) {
    const auto right = count_of(c, "looks right");
    const auto doubt = count_of(c, "looks doubtful");
    text = std::string("Final answer: ") + (right > doubt ? "A" : "B");
  } else if (contains(c, "Alternative answer:")) {
    text = "Supporting knowledge for option " + letter_after(c, "Alternative answer: ") +
           " on [item " + p.item + "].";
  } else if (contains(c, "Answer the question using this knowledge")) {
    const auto alt = letter_after(c, "option ");
    const bool sway = !alt.empty() && draw(p, "compete:" + alt) < (p.correct ? 0.2 : 0.6);
    text = "New answer: " + (sway ? alt : p.chosen);
  } else if (contains(c, "Provide step-by-step reasoning")) {
    text = "Step 1: The question asks: " + p.q_star + "\nStep 2: Weighing the options, " +
           p.chosen + " fits best.\nFinal answer: " + p.chosen;
  } else {
    // Plain answer or AskCali guess.
    text = p.chosen;
  }
  Completion out;
  reply["text"] = text;
  if (text.find("Final answer: " + p.chosen) != std::string::npos || text == p.chosen) {
    // Answer-bearing replies carry one logprob position for the chosen letter.
    const double rest = 1.0 - p.confidence;
    std::vector<std::pair<std::string, double>> top = {{p.chosen, p.confidence}};
    for (const char* l : {"A", "B", "C", "D"}) {
      if (p.chosen != l) top.emplace_back(l, rest * 0.3);
    }
    top.resize(4, {"E", rest * 0.3});
    top.emplace_back("I", rest * 0.1);
    std::stable_sort(top.begin(), top.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    json pos = json::array();
    LogprobSummary lp(1);
    for (const auto& [tok, prob] : top) {
      const double l = std::log(std::max(prob, 1e-9));
      pos.push_back(json::array({tok, l}));
      lp[0].emplace_back(tok, l);
    }
    reply["logprobs"] = json::array({pos});
    out.logprob_summary = std::move(lp);
  }
  record(request_digest(messages), std::move(reply));
  out.text = std::move(text);
  return out;
}

Embedding SimulatedBackend::embed_once(std::string_view text) {
  Embedding v = hashed_embedding(text);
  record(embed_digest(text), {{"embedding", std::vector<double>(v.data(), v.data() + v.size())}});
  return v;
}

GroundednessResult SimulatedBackend::groundedness_once(std::string_view context,
                                                       std::string_view claim) {
  const auto& p = plan_for(claim);
  GroundednessResult g;
  g.risk = (!p.aligned) != (draw(p, "ground") < 0.2);
  g.score = g.risk ? 0.8 : 0.2;
  record(groundedness_digest(context, claim), {{"risk", g.risk ? "yes" : "no"}, {"score", *g.score}});
  return g;
}

std::vector<DatasetFile> mimic_datasets(const MimicOptions& opts,
                                        std::map<std::string, MimicPlan>& plans) {
  static const std::vector<std::string> kTopics[] = {
      {"fraction", "ratio", "triangle", "prime", "interest", "velocity", "angle", "volume"},
      {"passage", "narrator", "character", "motive", "event", "scene", "letter", "journey"},
      {"group", "neighbor", "claim", "policy", "rumor", "campaign", "belief", "tenant"},
      {"device", "recipe", "garden", "market", "harbor", "library", "engine", "season"}};
  static const std::vector<std::string> kSubjects = {"merchant", "student", "farmer", "pilot",
                                                     "teacher",  "doctor",  "driver", "artist"};
  const std::vector<std::string> letters = {"A", "B", "C", "D"};

  std::vector<DatasetFile> out;
  for (const auto& name : opts.datasets) {
    DatasetFile ds;
    ds.name = name;
    ds.domain_group = default_domain(name);
    const auto& topics = kTopics[static_cast<int>(ds.domain_group)];
    const bool mixed = [&] {
      for (auto g : {DomainGroup::MathKnowledge, DomainGroup::Comprehension, DomainGroup::BiasesSafety}) {
        if (unanswerable_dataset(g) == std::optional<std::string_view>(name)) return true;
      }
      return false;
    }();
    std::string lower = name;
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (std::size_t i = 0; i < opts.per_dataset; ++i) {
      char idbuf[64];
      std::snprintf(idbuf, sizeof idbuf, "%s-%04zu", lower.c_str(), i);
      const std::string id = idbuf;
      std::mt19937_64 rng(fnv1a(id, opts.generator_seed * 0x9E3779B97F4A7C15ULL + 3));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };

      const auto topic = pick(topics);
      const auto subject = pick(kSubjects);
      const auto other_topic = pick(topics);
      const std::string stem = "Which option best describes the " + topic + " of the " +
                               subject + " in case " + std::to_string(i) + "?";

      QuerySample s;
      s.id = id;
      s.dataset = name;
      s.domain_group = ds.domain_group;
      s.answerable = !(mixed && u(rng) < 0.4);
      s.scenario = s.answerable ? Scenario::Answerable : Scenario::Unanswerable;
      s.prompt = "[item " + id + "] " + stem;
      for (std::size_t k = 0; k < letters.size(); ++k) {
        s.prompt += "\n" + letters[k] + ". " + topic + " reading " + std::to_string(k + 1 + i % 5);
      }
      const auto ref = letters[rng() % letters.size()];
      if (s.answerable) s.references = {ref};

      MimicPlan p;
      p.item = id;
      const bool correct = s.answerable && u(rng) < 0.65;
      if (correct) {
        p.chosen = ref;
      } else {
        do {
          p.chosen = letters[rng() % letters.size()];
        } while (s.answerable && p.chosen == ref);
      }
      p.correct = correct;
      const double align_p = correct ? 0.85 : (s.answerable ? 0.35 : 0.3);
      p.aligned = u(rng) < align_p;
      p.confidence = correct ? 0.55 + 0.42 * u(rng) : 0.3 + 0.55 * u(rng);
      p.q_star = p.aligned ? "Which option describes the " + topic + " of the " + subject +
                                 " in case " + std::to_string(i) + "? [item " + id + "]"
                           : "Which " + pick(kSubjects) + " is more likely to face a " +
                                 other_topic + " dispute? [item " + id + "]";
      plans[id] = p;
      ds.samples.push_back(std::move(s));
    }
    out.push_back(std::move(ds));
  }
  return out;
}

MimicBundle generate_mimic(const MimicOptions& opts) {
  MimicBundle b;
  b.datasets = mimic_datasets(opts, b.plans);
  auto sim = std::make_shared<SimulatedBackend>(b.plans, opts.generator_seed);
  Backends backends{sim, nullptr, nullptr, sim, sim};
  RunOptions ro;
  ro.backend_id = opts.backend_id;
  ro.record_latency = false;
  for (const auto& ds : b.datasets) {
    for (auto m : opts.methods) {
      for (bool cot : {false, true}) {
        if (cot && (!opts.cot_variants || m == Method::TraceInversion)) continue;
        for (auto seed : opts.seeds) {
          MethodConfig cfg;
          cfg.method = m;
          cfg.cot_variant = cot;
          b.results.push_back(run_experiment(cfg, ds, backends, seed, ro).result);
        }
      }
    }
  }
  b.fixtures = sim->recorded();
  return b;
}

void write_mimic(const MimicBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "datasets");
  std::filesystem::create_directories(dir / "runs");
  for (const auto& ds : bundle.datasets) {
    write_dataset(ds, dir / "datasets" / (ds.name + ".jsonl"));
  }
  {
    std::ofstream out(dir / "fixtures.json");
    if (!out) throw Error(ErrorKind::Io, "cannot write fixtures");
    out << bundle.fixtures.dump() << '\n';
  }
  for (const auto& r : bundle.results) {
    std::ofstream out(dir / "runs" /
                      (r.dataset + "_" + r.label() + "_seed" + std::to_string(r.seed) + ".json"));
    out << result_to_json(r).dump(2) << '\n';
  }
  const json scripted = {{"kind", "scripted"}, {"base_url", "fixtures.json"}, {"model_id", "mimic"}};
  const json cfg = {{"endpoints", {{"model", scripted}, {"embedder", scripted}, {"guard", scripted}}},
                    {"retry", {{"max_attempts", 3}, {"base_delay_ms", 0}, {"jitter", false}}},
                    {"method", {{"method", "TraceInversion"}}},
                    {"concurrency", {{"workers", 8}}},
                    {"gateway", {{"host", "127.0.0.1"}, {"port", 8080}}}};
  std::ofstream out(dir / "config.json");
  if (!out) throw Error(ErrorKind::Io, "cannot write config");
  out << cfg.dump(2) << '\n';
}

}  // namespace trinv
