#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "trinv/core.hpp"

using namespace trinv;
using testing::make_sample;

namespace {

ModelAnswer answer(std::string parsed) {
  ModelAnswer a;
  a.parsed = std::move(parsed);
  a.raw_text = "Final answer: " + a.parsed;
  return a;
}

AbstainDecision decision(bool abstain, std::string parsed) {
  AbstainDecision d;
  d.abstain = abstain;
  d.candidate = answer(std::move(parsed));
  return d;
}

// Counts computed cell by cell, independent of tally().
ConfusionCounts oracle_counts(const std::vector<AbstainDecision>& ds,
                              const std::vector<QuerySample>& ss) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bool wrong = !ss[i].answerable;
    if (!wrong) {
      wrong = true;
      for (const auto& r : ss[i].references) {
        if (ds[i].candidate.parsed != "Z" && to_upper(r) == ds[i].candidate.parsed) wrong = false;
      }
    }
    if (ds[i].abstain && wrong) ++c.tp;
    if (!ds[i].abstain && !wrong) ++c.tn;
    if (ds[i].abstain && !wrong) ++c.fp;
    if (!ds[i].abstain && wrong) ++c.fn;
  }
  return c;
}

}  // namespace

TEST_CASE("should_abstain_label examples") {
  CHECK_FALSE(should_abstain_label(make_sample("a", "q", true, {"B"}), answer("B")));
  CHECK(should_abstain_label(make_sample("b", "q", false, {}), answer("A")));
  CHECK(should_abstain_label(make_sample("c", "q", true, {"C"}), answer("Z")));
  CHECK_FALSE(should_abstain_label(make_sample("d", "q", true, {" b "}), answer("B")));
}

TEST_CASE("Z never matches even a Z reference") {
  CHECK(should_abstain_label(make_sample("z", "q", true, {"Z"}), answer("Z")));
}

TEST_CASE("tally examples") {
  std::vector<QuerySample> correct(4, make_sample("s", "q", true, {"A"}));
  std::vector<AbstainDecision> answered(4, decision(false, "A"));
  CHECK(tally(answered, correct) == ConfusionCounts{0, 4, 0, 0});

  std::vector<QuerySample> unans(3, make_sample("u", "q", false, {}));
  std::vector<AbstainDecision> abst(3, decision(true, "A"));
  CHECK(tally(abst, unans) == ConfusionCounts{3, 0, 0, 0});

  // One of each cell, enumerated by hand.
  std::vector<QuerySample> mixed = {make_sample("1", "q", false, {}),
                                    make_sample("2", "q", true, {"A"}),
                                    make_sample("3", "q", true, {"A"}),
                                    make_sample("4", "q", true, {"A"})};
  std::vector<AbstainDecision> mixed_d = {decision(true, "B"), decision(false, "A"),
                                          decision(true, "A"), decision(false, "C")};
  CHECK(tally(mixed_d, mixed) == ConfusionCounts{1, 1, 1, 1});
}

TEST_CASE("tally rejects mismatched lengths") {
  std::vector<QuerySample> ss(2, make_sample("s", "q", true, {"A"}));
  std::vector<AbstainDecision> ds(1, decision(false, "A"));
  try {
    tally(ds, ss);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
}

TEST_CASE("metric examples") {
  CHECK(abstain_accuracy({1, 1, 1, 1}) == doctest::Approx(0.5));
  CHECK(abstain_accuracy({0, 7, 0, 0}) == 1.0);
  CHECK(abstain_accuracy({3, 4, 2, 1}) == doctest::Approx(7.0 / 10.0).epsilon(1e-15));
  CHECK(reliable_accuracy({0, 7, 0, 0}) == 1.0);
  CHECK(reliable_accuracy({3, 4, 2, 1}) == doctest::Approx(4.0 / 5.0).epsilon(1e-15));
  CHECK(reliable_accuracy({5, 0, 0, 5}) == 0.0);
}

TEST_CASE("undefined metrics raise instead of returning a number") {
  try {
    abstain_accuracy({});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedMetric);
  }
  try {
    reliable_accuracy({4, 0, 2, 0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedMetric);
  }
  CHECK_FALSE(try_reliable_accuracy({4, 0, 2, 0}).has_value());
}

TEST_CASE("validate enforces sample invariants") {
  CHECK_THROWS_AS(make_sample("x", "q", true, {}).validate(), Error);
  auto s = make_sample("x", "q", false, {});
  s.scenario = Scenario::Answerable;
  CHECK_THROWS_AS(s.validate(), Error);
  s.scenario = Scenario::FalsePremise;
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("property: tally invariants over random decision lists") {
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> letter(0, 4);
  const char* letters[] = {"A", "B", "C", "D", "Z"};
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<QuerySample> ss;
    std::vector<AbstainDecision> ds;
    for (std::size_t i = 0; i < n; ++i) {
      const bool ans = coin(rng);
      ss.push_back(make_sample("s" + std::to_string(i), "q", ans,
                               ans ? std::vector<std::string>{letters[letter(rng) % 4]}
                                   : std::vector<std::string>{}));
      ds.push_back(decision(coin(rng), letters[letter(rng)]));
    }
    const auto c = tally(ds, ss);
    CHECK(c == oracle_counts(ds, ss));
    CHECK(c.total() == static_cast<std::int64_t>(n));
    const double a = abstain_accuracy(c);
    CHECK((a >= 0.0 && a <= 1.0));
    if (auto r = try_reliable_accuracy(c)) CHECK((*r >= 0.0 && *r <= 1.0));

    // Permutation leaves the counts unchanged.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<QuerySample> ps;
    std::vector<AbstainDecision> pd;
    for (auto i : idx) {
      ps.push_back(ss[i]);
      pd.push_back(ds[i]);
    }
    CHECK(tally(pd, ps) == c);
  }
}
