#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "searn/core.hpp"
#include "searn/tasks.hpp"

using namespace searn;

namespace {

SequenceInstance make_instance(std::vector<int> gold, int id = 0) {
  SequenceInstance inst;
  inst.id = id;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    Token tok;
    tok.surface = "w" + std::to_string(t);
    inst.sentence.tokens.push_back(tok);
  }
  inst.gold = std::move(gold);
  return inst;
}

// Classifier that always prefers one action, everywhere.
std::shared_ptr<LinearClassifier> constant_classifier(int k, ActionId preferred) {
  auto clf = std::make_shared<LinearClassifier>(k);
  clf->bias(preferred) = 1.0;
  return clf;
}

FeatureConfig small_features() {
  FeatureConfig cfg;
  cfg.hasher = FeatureHasher{12};
  return cfg;
}

}  // namespace

TEST_CASE("advance appends the action and bumps t") {
  SequenceInstance inst = make_instance({0, 1, 2, 3});
  SequenceLabelTask task(4, small_features());
  SearchState s0 = task.start_state(inst);

  SearchState s1 = advance(s0, 2, task);
  CHECK(s1.prefix == std::vector<ActionId>{2});
  CHECK(s1.t() == 1);

  SearchState s2{&inst, {1, 0}};
  SearchState s3 = advance(s2, 3, task);
  CHECK(s3.prefix == std::vector<ActionId>{1, 0, 3});
  CHECK(s3.t() == 3);
}

TEST_CASE("advance rejects terminal states") {
  SequenceInstance inst = make_instance({0, 1});
  SequenceLabelTask task(2, small_features());
  SearchState terminal{&inst, {0, 1}};
  CHECK_THROWS_AS(advance(terminal, 0, task), TerminalState);
}

TEST_CASE("policy_choose: degenerate mixtures") {
  SequenceInstance inst = make_instance({1, 0, 1});
  SequenceLabelTask task(2, small_features());
  RandomStream rng(7);

  MixturePolicy h_only = MixturePolicy::single(constant_classifier(2, 1));
  SearchState s0 = task.start_state(inst);
  CHECK(policy_choose(h_only, s0, task, rng) == 1);

  MixturePolicy pi_only = MixturePolicy::initial_only();
  SearchState s3{&inst, {1, 0}};
  // reference label at t = 2
  CHECK(policy_choose(pi_only, s3, task, rng) == 1);
}

TEST_CASE("policy_choose errors on unlabeled instance with initial policy") {
  SequenceInstance inst = make_instance({});
  Token tok;
  tok.surface = "x";
  inst.sentence.tokens.push_back(tok);
  SequenceLabelTask task(2, small_features());
  MixturePolicy pi_only = MixturePolicy::initial_only();
  RandomStream rng(1);
  SearchState s0 = task.start_state(inst);
  CHECK_THROWS_AS(policy_choose(pi_only, s0, task, rng), MissingReference);
}

TEST_CASE("policy_choose draws components at their weights") {
  SequenceInstance inst = make_instance({0, 0, 0, 0});
  SequenceLabelTask task(2, small_features());
  auto h_prime = constant_classifier(2, 1);
  MixturePolicy mix({MixtureComponent{h_prime, 0.25}, MixtureComponent{nullptr, 0.75}}, 1);

  RandomStream rng(42);
  SearchState s0 = task.start_state(inst);
  int h_prime_count = 0;
  for (int i = 0; i < 100000; ++i) {
    if (policy_choose(mix, s0, task, rng) == 1) ++h_prime_count;  // pi picks 0, h' picks 1
  }
  // Binomial(100000, 0.25), 3 sigma ~ 411; the spec band is +-500.
  CHECK(h_prime_count > 24500);
  CHECK(h_prime_count < 25500);
}

TEST_CASE("interpolate algebra") {
  auto c1 = constant_classifier(2, 0);
  auto c2 = constant_classifier(2, 1);
  auto c3 = constant_classifier(2, 0);

  SECTION("beta = 1 replaces the mixture") {
    MixturePolicy h = MixturePolicy::initial_only();
    MixturePolicy next = interpolate(h, c1, 1.0);
    REQUIRE(next.size() == 1);
    CHECK(next.components()[0].classifier == c1);
    CHECK(next.components()[0].weight == 1.0);
  }

  SECTION("beta = 0 is a no-op") {
    MixturePolicy h = MixturePolicy::single(c1);
    MixturePolicy next = interpolate(h, c2, 0.0);
    REQUIRE(next.size() == 1);
    CHECK(next.components()[0].classifier == c1);
  }

  SECTION("pi weight decays by (1 - beta) per iteration") {
    MixturePolicy h = MixturePolicy::initial_only();
    h = interpolate(h, c1, 0.1);
    h = interpolate(h, c2, 0.1);
    h = interpolate(h, c3, 0.1);
    CHECK(h.initial_policy_weight() == Catch::Approx(0.9 * 0.9 * 0.9).margin(1e-15));
    double sum = 0.0;
    for (const auto& c : h.components()) sum += c.weight;
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("strip_initial_policy renormalizes proportionally") {
  auto c1 = constant_classifier(2, 0);
  auto c2 = constant_classifier(2, 1);
  auto c3 = constant_classifier(2, 0);

  MixturePolicy h = MixturePolicy::initial_only();
  h = interpolate(h, c1, 0.1);
  h = interpolate(h, c2, 0.1);
  h = interpolate(h, c3, 0.1);
  double pi_w = h.initial_policy_weight();

  MixturePolicy stripped = strip_initial_policy(h);
  CHECK_FALSE(stripped.has_initial_component());
  double sum = 0.0;
  for (const auto& c : stripped.components()) sum += c.weight;
  CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  // each learned weight scaled by 1 / (1 - pi_w)
  CHECK(stripped.components()[0].weight ==
        Catch::Approx(h.components()[0].weight / (1.0 - pi_w)).margin(1e-15));

  SECTION("single-classifier policy is unchanged") {
    MixturePolicy single = MixturePolicy::single(c1);
    MixturePolicy out = strip_initial_policy(single);
    REQUIRE(out.size() == 1);
    CHECK(out.components()[0].weight == 1.0);
  }

  SECTION("pi-only policy cannot be stripped") {
    CHECK_THROWS_AS(strip_initial_policy(MixturePolicy::initial_only()), NoLearnedComponent);
  }
}

TEST_CASE("rollout is deterministic given the seed") {
  SequenceInstance inst = make_instance({1, 0, 1, 0});
  SequenceLabelTask task(2, small_features());
  auto c1 = constant_classifier(2, 0);
  MixturePolicy mix({MixtureComponent{c1, 0.5}, MixtureComponent{nullptr, 0.5}}, 1);

  RandomStream a(123), b(123);
  Trajectory ta = rollout(mix, task.start_state(inst), task, a);
  Trajectory tb = rollout(mix, task.start_state(inst), task, b);
  CHECK(ta.actions == tb.actions);
  CHECK(ta.final_output == tb.final_output);
  REQUIRE(ta.loss.has_value());
  CHECK(*ta.loss == *tb.loss);
}

TEST_CASE("initial-policy rollout on noise-free data has zero loss") {
  SequenceInstance inst = make_instance({1, 2, 0, 1});
  SequenceLabelTask task(3, small_features());
  RandomStream rng(5);
  Trajectory t = rollout(MixturePolicy::initial_only(), task.start_state(inst), task, rng);
  REQUIRE(t.loss.has_value());
  CHECK(*t.loss == 0.0);
  CHECK(t.final_output == inst.gold);
}

TEST_CASE("uniform-random policy mean Hamming loss matches Binomial(4, 1/2)") {
  SequenceInstance inst = make_instance({0, 0, 0, 0});
  SequenceLabelTask task(2, small_features());
  // Two deterministic classifiers at equal weight = a uniform coin per step.
  MixturePolicy mix(
      {MixtureComponent{constant_classifier(2, 0), 0.5},
       MixtureComponent{constant_classifier(2, 1), 0.5}},
      1);
  RandomStream rng(99);
  double total = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    RandomStream r = rng.split(i);
    Trajectory t = rollout(mix, task.start_state(inst), task, r);
    total += *t.loss;
  }
  CHECK(total / trials == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("mixture weights sum to one through random interpolate/strip sequences") {
  RandomStream rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    MixturePolicy h = MixturePolicy::initial_only();
    int steps = 1 + rng.bounded(6);
    double pi_expected = 1.0;
    for (int i = 0; i < steps; ++i) {
      double beta = 0.05 + 0.9 * rng.uniform();
      h = interpolate(h, constant_classifier(2, rng.bounded(2)), beta);
      pi_expected *= (1.0 - beta);
      double sum = 0.0;
      for (const auto& c : h.components()) sum += c.weight;
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }
    // closed form vs incremental computation
    REQUIRE(h.initial_policy_weight() == Catch::Approx(pi_expected).margin(1e-12));
    MixturePolicy stripped = strip_initial_policy(h);
    double sum = 0.0;
    for (const auto& c : stripped.components()) sum += c.weight;
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
  }
}
