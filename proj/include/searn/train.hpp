#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "searn/core.hpp"
#include "searn/cost_learn.hpp"
#include "searn/errors.hpp"
#include "searn/rng.hpp"

namespace searn {

enum class CostMode { Approximation, MonteCarlo, SingleSample };
enum class BetaMode { Fixed, Analytic, DevLineSearch };

struct SearnConfig {
  BetaMode beta_mode = BetaMode::Fixed;
  double beta = 0.5;                     // Fixed mode
  std::vector<double> beta_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int max_iterations = 5;
  double pi_weight_stop_threshold = 1e-4;
  CostMode cost_mode = CostMode::Approximation;
  int mc_samples = 1;
  int beam_width = 1;  // applied by the caller via beam_wrap
  std::uint64_t seed = 0;
  CostSensitiveConfig learner;
  int dev_rollouts = 1;  // rollouts per dev instance in line search / dev loss
};

struct IterationReport {
  int iteration = 0;
  double cs_loss = 0.0;
  double pi_weight = 0.0;
  std::size_t example_count = 0;
  double running_avg_loss = 0.0;
  double beta = 0.0;
  std::optional<double> dev_loss;
};

struct BoundInputs {
  double T = 1.0;
  double c_max = 0.0;
  double L_pi = 0.0;
  double ell_avg = 0.0;
};

// L(D, pi) + 2 T ell_avg ln T + (1 + ln T) c_max / T
inline double theorem2_bound(const BoundInputs& in) {
  double ln_t = std::log(in.T);
  return in.L_pi + 2.0 * in.T * in.ell_avg * ln_t + (1.0 + ln_t) * in.c_max / in.T;
}

namespace detail {

constexpr std::uint64_t kSaltRollout = 0x11;
constexpr std::uint64_t kSaltMonteCarlo = 0x22;
constexpr std::uint64_t kSaltSingleSample = 0x33;
constexpr std::uint64_t kSaltIteration = 0x44;
constexpr std::uint64_t kSaltTrain = 0x55;
constexpr std::uint64_t kSaltDev = 0x66;

inline std::uint64_t state_key(const SearchState& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h ^= static_cast<std::uint64_t>(s.instance->id) + 0x9e37u;
  h *= 0x100000001b3ull;
  for (ActionId a : s.prefix) {
    h ^= static_cast<std::uint64_t>(a) + 0x517cu;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

// Expected completion loss of taking `action` at `state` and then following
// `policy`, under the configured estimation strategy.
//
//  - Approximation: complete with the initial policy; exact when the
//    reference is noise-free.
//  - MonteCarlo(n): mean loss over n independent policy rollouts.
//  - SingleSample: one rollout whose random draws are tied across all
//    sibling actions of the same state.
inline double estimate_action_cost(const MixturePolicy& policy, const SearchState& state,
                                   ActionId action, const Task& task, const SearnConfig& config,
                                   const RandomStream& rng) {
  switch (config.cost_mode) {
    case CostMode::Approximation:
      return task.completion_loss(state, action);
    case CostMode::MonteCarlo: {
      double total = 0.0;
      std::uint64_t key = detail::state_key(state);
      for (int i = 0; i < config.mc_samples; ++i) {
        RandomStream r = rng.split(detail::kSaltMonteCarlo, key,
                                   static_cast<std::uint64_t>(action) * 1000003u +
                                       static_cast<std::uint64_t>(i));
        Trajectory traj = rollout(policy, advance(state, action, task), task, r);
        if (!traj.loss) throw MissingReference("estimate_action_cost: rollout without reference");
        total += *traj.loss;
      }
      return total / static_cast<double>(config.mc_samples);
    }
    case CostMode::SingleSample: {
      // The salt deliberately excludes the action so siblings share draws.
      RandomStream r = rng.split(detail::kSaltSingleSample, detail::state_key(state), 0);
      Trajectory traj = rollout(policy, advance(state, action, task), task, r);
      if (!traj.loss) throw MissingReference("estimate_action_cost: rollout without reference");
      return *traj.loss;
    }
  }
  return 0.0;
}

// Per-action regrets at `state`: estimated completion cost minus the minimum
// over legal actions.  Masked actions are priced at the instance's maximum
// loss before normalization so they are never preferred.
inline std::vector<double> regret_costs(const MixturePolicy& policy, const SearchState& state,
                                        const Task& task, const SearnConfig& config,
                                        const RandomStream& rng) {
  if (task.is_terminal(state)) throw TerminalState("regret_costs: terminal state");
  auto mask = task.action_mask(state);
  int k = task.action_count();
  std::vector<double> costs(static_cast<std::size_t>(k), 0.0);
  double min_cost = std::numeric_limits<double>::infinity();
  double ceiling = task.max_loss(*state.instance);
  for (ActionId a = 0; a < k; ++a) {
    if (!mask[a]) {
      costs[static_cast<std::size_t>(a)] = ceiling;
      continue;
    }
    double c = estimate_action_cost(policy, state, a, task, config, rng);
    costs[static_cast<std::size_t>(a)] = c;
    min_cost = std::min(min_cost, c);
  }
  for (double& c : costs) c -= min_cost;
  return costs;
}

// One rollout under the current policy; one cost-sensitive example per
// visited non-terminal state.
inline std::vector<CostSensitiveExample> generate_examples(const MixturePolicy& policy,
                                                           const Instance& instance,
                                                           const Task& task,
                                                           const SearnConfig& config,
                                                           const RandomStream& rng) {
  SearchState start = task.start_state(instance);
  if (!task.has_reference(start))
    throw MissingReference("generate_examples: instance has no reference");
  RandomStream roll_rng =
      rng.split(detail::kSaltRollout, static_cast<std::uint64_t>(instance.id));
  Trajectory traj = rollout(policy, start, task, roll_rng);
  std::vector<CostSensitiveExample> out;
  out.reserve(traj.states.size());
  for (const SearchState& s : traj.states) {
    CostSensitiveExample ex;
    ex.features = task.features(s);
    ex.costs = regret_costs(policy, s, task, config, rng);
    out.push_back(std::move(ex));
  }
  return out;
}

// Mean structured loss of `policy` on `instances` by rollout, with
// per-instance tied seeds so that alternative policies are compared on the
// same draws.
inline double mean_rollout_loss(const MixturePolicy& policy,
                                const std::vector<const Instance*>& instances, const Task& task,
                                const RandomStream& rng, int rollouts_per_instance = 1) {
  if (instances.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (int r = 0; r < rollouts_per_instance; ++r) {
      RandomStream stream = rng.split(detail::kSaltDev, i, static_cast<std::uint64_t>(r));
      Trajectory traj = rollout(policy, task.start_state(*instances[i]), task, stream);
      if (!traj.loss) throw MissingReference("mean_rollout_loss: instance has no reference");
      total += *traj.loss;
    }
  }
  return total / (static_cast<double>(instances.size()) * rollouts_per_instance);
}

// Dev-set line search over interpolation coefficients.  Each candidate is
// scored with identical per-instance seeds; ties break toward the larger
// beta (faster movement away from the initial policy).
inline double beta_line_search(const std::vector<const Instance*>& dev,
                               const std::vector<double>& candidates,
                               const MixturePolicy& current,
                               std::shared_ptr<const LinearClassifier> learned, const Task& task,
                               const SearnConfig& config, const RandomStream& rng) {
  if (candidates.empty()) throw EmptyInput("beta_line_search: no candidates");
  double best_beta = candidates.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (double beta : candidates) {
    MixturePolicy tentative = interpolate(current, learned, beta);
    double loss = mean_rollout_loss(tentative, dev, task, rng, config.dev_rollouts);
    if (loss < best_loss || (loss == best_loss && beta > best_beta)) {
      best_loss = loss;
      best_beta = beta;
    }
  }
  return best_beta;
}

struct SearnResult {
  MixturePolicy policy;  // stripped of the initial policy
  std::vector<IterationReport> reports;
};

using IterationCallback = std::function<void(const IterationReport&)>;

inline int max_horizon(const std::vector<const Instance*>& instances, const Task& task) {
  int t = 1;
  for (const Instance* x : instances) t = std::max(t, task.horizon(*x));
  return t;
}

// The main training loop: start from the initial policy, repeatedly generate
// cost-sensitive examples under the current policy, learn a classifier,
// interpolate, and stop once the initial policy's weight is insignificant
// (or the iteration budget runs out).  Returns the final policy without the
// initial-policy component.
inline SearnResult searn_train(const std::vector<const Instance*>& train,
                               const std::vector<const Instance*>& dev, const Task& task,
                               const SearnConfig& config,
                               const IterationCallback& on_iteration = {}) {
  if (train.empty()) throw EmptyInput("searn_train: empty dataset");
  RandomStream root(config.seed);
  MixturePolicy policy = MixturePolicy::initial_only();
  std::vector<IterationReport> reports;
  double cs_sum = 0.0;
  int horizon_t = max_horizon(train, task);

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    RandomStream iter_rng = root.split(detail::kSaltIteration, static_cast<std::uint64_t>(iter));

    std::vector<CostSensitiveExample> examples;
    for (std::size_t i = 0; i < train.size(); ++i) {
      auto per_instance = generate_examples(policy, *train[i], task, config, iter_rng.split(i));
      for (auto& ex : per_instance) examples.push_back(std::move(ex));
    }

    RandomStream train_rng = iter_rng.split(detail::kSaltTrain);
    std::shared_ptr<const LinearClassifier> learned =
        train_cost_sensitive(examples, config.learner, train_rng);
    double cs = classifier_cs_loss(*learned, examples);

    double beta = config.beta;
    switch (config.beta_mode) {
      case BetaMode::Fixed:
        break;
      case BetaMode::Analytic:
        beta = 1.0 / (static_cast<double>(horizon_t) * horizon_t * horizon_t);
        break;
      case BetaMode::DevLineSearch:
        if (!dev.empty())
          beta = beta_line_search(dev, config.beta_grid, policy, learned, task, config,
                                  iter_rng.split(detail::kSaltDev));
        break;
    }

    policy = interpolate(policy, learned, beta);

    cs_sum += cs;
    IterationReport report;
    report.iteration = iter;
    report.cs_loss = cs;
    report.pi_weight = policy.initial_policy_weight();
    report.example_count = examples.size();
    report.running_avg_loss = cs_sum / static_cast<double>(iter);
    report.beta = beta;
    if (!dev.empty())
      report.dev_loss = mean_rollout_loss(policy, dev, task, iter_rng.split(detail::kSaltDev),
                                          config.dev_rollouts);
    reports.push_back(report);
    if (on_iteration) on_iteration(report);

    if (policy.initial_policy_weight() < config.pi_weight_stop_threshold) break;
  }

  if (reports.empty()) throw NoLearnedComponent("searn_train: no iteration completed");
  return SearnResult{strip_initial_policy(policy), std::move(reports)};
}

// One iteration with beta = 1: a classifier trained on states produced by
// the initial policy, i.e. true-history conditioning.
inline SearnResult baseline_memm(const std::vector<const Instance*>& train, const Task& task,
                                 const SearnConfig& config) {
  SearnConfig one = config;
  one.max_iterations = 1;
  one.beta_mode = BetaMode::Fixed;
  one.beta = 1.0;
  return searn_train(train, {}, task, one);
}

// The same single iteration, intended to be called with a task whose
// feature extractor has structural (prefix-dependent) features disabled, so
// the classifier depends only on the input.
inline SearnResult baseline_independent(const std::vector<const Instance*>& train,
                                        const Task& task_without_structural_features,
                                        const SearnConfig& config) {
  return baseline_memm(train, task_without_structural_features, config);
}

// --------------------------------------------------------------------------
// Exact evaluation on enumerable problems
// --------------------------------------------------------------------------

namespace exact {

constexpr std::size_t kMaxEnumerationStates = 2'000'000;

inline void check_enumerable(const std::vector<const Instance*>& instances, const Task& task,
                             std::size_t max_components) {
  if (max_components > 4)
    throw TooLargeToEnumerate("exact: more than 4 mixture components");
  for (const Instance* x : instances) {
    double states = 1.0;
    int t = task.horizon(*x);
    for (int i = 0; i < t; ++i) {
      states *= task.action_count();
      if (states > static_cast<double>(kMaxEnumerationStates))
        throw TooLargeToEnumerate("exact: state space too large");
    }
  }
}

// Probability that the mixture picks each action at s (components are
// deterministic given the state).
inline std::vector<double> action_probs(const MixturePolicy& policy, const SearchState& s,
                                        const Task& task) {
  std::vector<double> probs(static_cast<std::size_t>(task.action_count()), 0.0);
  auto mask = task.action_mask(s);
  for (const auto& comp : policy.components()) {
    ActionId a;
    if (comp.is_initial_policy())
      a = task.initial_policy_action(s);
    else
      a = comp.classifier->predict(task.features(s), mask);
    probs[static_cast<std::size_t>(a)] += comp.weight;
  }
  return probs;
}

// Expected final loss of following `policy` from `s`.
inline double policy_loss_from(const MixturePolicy& policy, const SearchState& s,
                               const Task& task) {
  if (task.is_terminal(s)) return task.final_loss(s);
  std::vector<double> probs = action_probs(policy, s, task);
  double total = 0.0;
  for (ActionId a = 0; a < task.action_count(); ++a) {
    if (probs[static_cast<std::size_t>(a)] == 0.0) continue;
    total += probs[static_cast<std::size_t>(a)] *
             policy_loss_from(policy, advance(s, a, task), task);
  }
  return total;
}

inline double policy_loss(const MixturePolicy& policy,
                          const std::vector<const Instance*>& instances, const Task& task) {
  double total = 0.0;
  for (const Instance* x : instances)
    total += policy_loss_from(policy, task.start_state(*x), task);
  return total / static_cast<double>(instances.size());
}

// Exact per-action regrets at s under `policy`.
inline std::vector<double> exact_regrets(const MixturePolicy& policy, const SearchState& s,
                                         const Task& task) {
  auto mask = task.action_mask(s);
  int k = task.action_count();
  std::vector<double> costs(static_cast<std::size_t>(k), 0.0);
  double min_cost = std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < k; ++a) {
    if (!mask[a]) {
      costs[static_cast<std::size_t>(a)] = task.max_loss(*s.instance);
      continue;
    }
    costs[static_cast<std::size_t>(a)] = policy_loss_from(policy, advance(s, a, task), task);
    min_cost = std::min(min_cost, costs[static_cast<std::size_t>(a)]);
  }
  for (double& c : costs) c -= min_cost;
  return costs;
}

// Cost-sensitive loss of `h_prime` on the state distribution induced by
// running `h`: expected regret of h_prime's choice, averaged over the T
// timesteps of each instance and over instances.
inline double cs_loss(const MixturePolicy& h, const LinearClassifier& h_prime,
                      const std::vector<const Instance*>& instances, const Task& task) {
  double total = 0.0;
  for (const Instance* x : instances) {
    double acc = 0.0;
    std::function<void(const SearchState&, double)> walk = [&](const SearchState& s,
                                                               double pmass) {
      if (task.is_terminal(s) || pmass == 0.0) return;
      std::vector<double> regrets = exact_regrets(h, s, task);
      ActionId pred = h_prime.predict(task.features(s), task.action_mask(s));
      acc += pmass * regrets[static_cast<std::size_t>(pred)];
      std::vector<double> probs = action_probs(h, s, task);
      for (ActionId a = 0; a < task.action_count(); ++a) {
        if (probs[static_cast<std::size_t>(a)] == 0.0) continue;
        walk(advance(s, a, task), pmass * probs[static_cast<std::size_t>(a)]);
      }
    };
    walk(task.start_state(*x), 1.0);
    total += acc / static_cast<double>(task.horizon(*x));
  }
  return total / static_cast<double>(instances.size());
}

// E_x max_y c_y over the instance set, by enumerating all outputs.
inline double c_max(const std::vector<const Instance*>& instances, const Task& task) {
  double total = 0.0;
  for (const Instance* x : instances) {
    double worst = 0.0;
    std::function<void(const SearchState&)> walk = [&](const SearchState& s) {
      if (task.is_terminal(s)) {
        worst = std::max(worst, task.final_loss(s));
        return;
      }
      auto mask = task.action_mask(s);
      for (ActionId a = 0; a < task.action_count(); ++a)
        if (mask[a]) walk(advance(s, a, task));
    };
    walk(task.start_state(*x));
    total += worst;
  }
  return total / static_cast<double>(instances.size());
}

}  // namespace exact

struct Lemma1Result {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// Checks the single-iteration degradation inequality
//
//   L(D, h_new) <= L(D, h) + T beta lCS_h(h') + (1/2) beta^2 T^2 c_max
//
// exactly, by enumerating every trajectory of every instance.
inline Lemma1Result lemma1_check(const std::vector<const Instance*>& instances, const Task& task,
                                 const MixturePolicy& h,
                                 std::shared_ptr<const LinearClassifier> h_prime, double beta) {
  if (instances.empty()) throw EmptyInput("lemma1_check: no instances");
  exact::check_enumerable(instances, task, h.size() + 1);
  double t_max = static_cast<double>(max_horizon(instances, task));
  double l_h = exact::policy_loss(h, instances, task);
  double l_cs = exact::cs_loss(h, *h_prime, instances, task);
  double cmax = exact::c_max(instances, task);
  MixturePolicy h_new = interpolate(h, std::move(h_prime), beta);
  Lemma1Result r;
  r.lhs = exact::policy_loss(h_new, instances, task);
  r.rhs = l_h + t_max * beta * l_cs + 0.5 * beta * beta * t_max * t_max * cmax;
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

}  // namespace searn
