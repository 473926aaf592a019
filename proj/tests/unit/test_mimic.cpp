#include <doctest.h>

#include <filesystem>

#include "trinv/mimic.hpp"
#include "trinv/scorers.hpp"

using namespace trinv;
namespace fs = std::filesystem;

namespace {

MimicOptions small() {
  MimicOptions o;
  o.per_dataset = 10;
  o.seeds = {0, 1};
  o.cot_variants = true;
  return o;
}

}  // namespace

TEST_CASE("hashed embedding is deterministic and unit length") {
  const auto a = hashed_embedding("who was not comfortable using the phone");
  CHECK(a == hashed_embedding("who was not comfortable using the phone"));
  CHECK(a.size() == 64);
  CHECK(a.norm() == doctest::Approx(1.0));
  CHECK(cosine(a, hashed_embedding("something else entirely about trains")) < 0.99);
}

TEST_CASE("mimic datasets respect the sample schema") {
  std::map<std::string, MimicPlan> plans;
  const auto ds = mimic_datasets(small(), plans);
  REQUIRE(ds.size() == 3);
  for (const auto& d : ds) {
    CHECK(d.samples.size() == 10);
    for (const auto& s : d.samples) CHECK_NOTHROW(s.validate());
  }
  bool any_unanswerable = false;
  for (const auto& s : ds[2].samples) any_unanswerable = any_unanswerable || !s.answerable;
  CHECK(any_unanswerable);
}

TEST_CASE("generation is reproducible") {
  const auto a = generate_mimic(small());
  const auto b = generate_mimic(small());
  CHECK(a.fixtures == b.fixtures);
  REQUIRE(a.results.size() == b.results.size());
  // 3 datasets x (6 methods + 5 CoT variants) x 2 seeds
  CHECK(a.results.size() == 3 * 11 * 2);
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    CHECK(result_to_json(a.results[i]) == result_to_json(b.results[i]));
    CHECK(a.results[i].status == RunStatus::Ok);
  }
}

TEST_CASE("recorded fixtures replay every run exactly") {
  const auto bundle = generate_mimic(small());
  const auto dir = fs::temp_directory_path() / "trinv_mimic_replay";
  fs::remove_all(dir);
  write_mimic(bundle, dir);
  const auto cfg = load_config(dir / "config.json");
  const auto backends = make_backends(cfg);
  RunOptions ro;
  ro.backend_id = "mimic";
  ro.record_latency = false;
  for (const auto& expected : bundle.results) {
    const auto ds = load_dataset(dir / "datasets" / (expected.dataset + ".jsonl"));
    MethodConfig m;
    m.method = expected.method;
    m.cot_variant = expected.cot_variant;
    const auto got = run_experiment(m, ds, backends, expected.seed, ro).result;
    CHECK_MESSAGE(result_to_json(got) == result_to_json(expected), expected.label(), " ",
                  expected.dataset, " seed ", expected.seed);
  }
  CHECK(load_results(dir / "runs").size() == bundle.results.size());
  fs::remove_all(dir);
}
