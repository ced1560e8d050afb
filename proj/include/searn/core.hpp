#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "searn/errors.hpp"
#include "searn/feature_vector.hpp"
#include "searn/linear_classifier.hpp"
#include "searn/rng.hpp"

namespace searn {

// Opaque input instance.  Concrete tasks subclass this (see tasks.hpp) and
// downcast internally; the search machinery never looks inside.
struct Instance {
  virtual ~Instance() = default;
  int id = 0;
};

// A point in the search space: the input plus the prefix of decisions made
// so far.  Immutable by convention; advance() returns a new state.
struct SearchState {
  const Instance* instance = nullptr;
  std::vector<ActionId> prefix;

  int t() const { return static_cast<int>(prefix.size()); }
};

// One structured problem: action alphabet, transitions (implicit in the
// prefix), legality mask, features, reference-optimal action, losses and the
// output map from decision prefixes to task-level outputs.
class Task {
 public:
  virtual ~Task() = default;

  virtual int action_count() const = 0;
  virtual bool is_terminal(const SearchState& s) const = 0;

  virtual std::vector<std::uint8_t> action_mask(const SearchState& s) const {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(action_count()), 1);
  }

  virtual FeatureVector features(const SearchState& s) const = 0;

  virtual bool has_reference(const SearchState& s) const = 0;

  // The reference-optimal action from s: minimizes total loss assuming all
  // future decisions are also made optimally.  Requires reference labels.
  virtual ActionId initial_policy_action(const SearchState& s) const = 0;

  // Loss of taking `a` at `s` and completing optimally afterwards.  The
  // default rolls the initial policy forward; concrete tasks override with
  // closed forms.
  virtual double completion_loss(const SearchState& s, ActionId a) const;

  // Optimal completion loss from s itself (no action forced).
  virtual double completion_loss_from(const SearchState& s) const;

  // Loss of a terminal state against the reference.
  virtual double final_loss(const SearchState& s) const = 0;

  // The output map f: decision prefix -> task-level output (per-token labels
  // for the tasks in this library).  Must tolerate incomplete prefixes.
  virtual std::vector<int> output_labels(const SearchState& s) const = 0;

  // Upper bound on the number of decisions for this instance.
  virtual int horizon(const Instance& x) const = 0;

  // Maximum achievable loss on this instance (the all-wrong output).
  virtual double max_loss(const Instance& x) const = 0;

  SearchState start_state(const Instance& x) const { return SearchState{&x, {}}; }
};

inline SearchState advance(const SearchState& s, ActionId a, const Task& task) {
  if (task.is_terminal(s)) throw TerminalState("advance: state is terminal");
  auto mask = task.action_mask(s);
  if (a < 0 || a >= static_cast<ActionId>(mask.size()) || !mask[a])
    throw IllegalAction("advance: action " + std::to_string(a) + " masked out at t=" +
                        std::to_string(s.t()));
  SearchState next{s.instance, s.prefix};
  next.prefix.push_back(a);
  return next;
}

inline double Task::completion_loss(const SearchState& s, ActionId a) const {
  if (!has_reference(s)) throw MissingReference("completion_loss: instance has no reference");
  SearchState cur = advance(s, a, *this);
  while (!is_terminal(cur)) cur = advance(cur, initial_policy_action(cur), *this);
  return final_loss(cur);
}

inline double Task::completion_loss_from(const SearchState& s) const {
  if (is_terminal(s)) return final_loss(s);
  return completion_loss(s, initial_policy_action(s));
}

// --------------------------------------------------------------------------
// Policies
// --------------------------------------------------------------------------

// One arm of a stochastic mixture.  A null classifier is the initial-policy
// marker.
struct MixtureComponent {
  std::shared_ptr<const LinearClassifier> classifier;
  double weight = 0.0;

  bool is_initial_policy() const { return classifier == nullptr; }
};

constexpr double kWeightSumTolerance = 1e-9;

// A stochastic interpolation of learned classifiers and, optionally, the
// initial policy.  Every evaluation draws a fresh component by weight.
class MixturePolicy {
 public:
  MixturePolicy() = default;
  MixturePolicy(std::vector<MixtureComponent> components, int generation)
      : components_(std::move(components)), generation_(generation) {
    validate();
  }

  static MixturePolicy initial_only() {
    return MixturePolicy({MixtureComponent{nullptr, 1.0}}, 0);
  }

  static MixturePolicy single(std::shared_ptr<const LinearClassifier> clf) {
    return MixturePolicy({MixtureComponent{std::move(clf), 1.0}}, 1);
  }

  const std::vector<MixtureComponent>& components() const { return components_; }
  int generation() const { return generation_; }

  bool has_initial_component() const {
    for (const auto& c : components_)
      if (c.is_initial_policy()) return true;
    return false;
  }

  double initial_policy_weight() const {
    for (const auto& c : components_)
      if (c.is_initial_policy()) return c.weight;
    return 0.0;
  }

  std::size_t size() const { return components_.size(); }

  void validate() const {
    double sum = 0.0;
    int markers = 0;
    for (const auto& c : components_) {
      if (c.weight < 0.0) throw std::invalid_argument("mixture weight < 0");
      if (c.is_initial_policy()) ++markers;
      sum += c.weight;
    }
    if (markers > 1) throw std::invalid_argument("more than one initial-policy component");
    if (std::abs(sum - 1.0) > kWeightSumTolerance)
      throw std::invalid_argument("mixture weights sum to " + std::to_string(sum));
  }

 private:
  std::vector<MixtureComponent> components_;
  int generation_ = 0;
};

// h <- beta * learned + (1 - beta) * h.  The new component is prepended.
inline MixturePolicy interpolate(const MixturePolicy& current,
                                 std::shared_ptr<const LinearClassifier> learned, double beta) {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("beta outside [0, 1]");
  if (beta == 0.0) return current;
  std::vector<MixtureComponent> next;
  next.push_back(MixtureComponent{std::move(learned), beta});
  for (const auto& c : current.components()) {
    double w = c.weight * (1.0 - beta);
    if (w > 0.0) next.push_back(MixtureComponent{c.classifier, w});
  }
  return MixturePolicy(std::move(next), current.generation() + 1);
}

// Remove the initial-policy component and renormalize the learned weights
// proportionally.
inline MixturePolicy strip_initial_policy(const MixturePolicy& policy) {
  double pi_weight = policy.initial_policy_weight();
  if (!policy.has_initial_component()) return policy;
  std::vector<MixtureComponent> kept;
  for (const auto& c : policy.components())
    if (!c.is_initial_policy()) kept.push_back(c);
  if (kept.empty()) throw NoLearnedComponent("strip: policy has no learned component");
  for (auto& c : kept) c.weight /= (1.0 - pi_weight);
  return MixturePolicy(std::move(kept), policy.generation());
}

// Draw one component by weight (a fresh draw per call), then return that
// component's action.
inline ActionId policy_choose(const MixturePolicy& policy, const SearchState& s, const Task& task,
                              RandomStream& rng) {
  policy.validate();
  double u = rng.uniform();
  const MixtureComponent* chosen = &policy.components().back();
  double cum = 0.0;
  for (const auto& c : policy.components()) {
    cum += c.weight;
    if (u < cum) {
      chosen = &c;
      break;
    }
  }
  if (chosen->is_initial_policy()) {
    if (!task.has_reference(s))
      throw MissingReference("policy_choose: initial policy on unlabeled instance");
    return task.initial_policy_action(s);
  }
  auto mask = task.action_mask(s);
  ActionId a = chosen->classifier->predict(task.features(s), mask);
  if (a < 0) throw IllegalAction("policy_choose: no legal action");
  return a;
}

struct Trajectory {
  std::vector<SearchState> states;  // the states where decisions were made
  std::vector<ActionId> actions;
  SearchState final_state;
  std::vector<int> final_output;
  std::optional<double> loss;
};

// Run the policy from `start` to a terminal state.
inline Trajectory rollout(const MixturePolicy& policy, SearchState start, const Task& task,
                          RandomStream& rng) {
  Trajectory traj;
  SearchState cur = std::move(start);
  while (!task.is_terminal(cur)) {
    ActionId a = policy_choose(policy, cur, task, rng);
    SearchState next = advance(cur, a, task);
    traj.states.push_back(std::move(cur));
    traj.actions.push_back(a);
    cur = std::move(next);
  }
  traj.final_output = task.output_labels(cur);
  if (task.has_reference(cur)) traj.loss = task.final_loss(cur);
  traj.final_state = std::move(cur);
  return traj;
}

}  // namespace searn
