#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "searn/core.hpp"
#include "searn/errors.hpp"
#include "searn/feature_vector.hpp"

namespace searn {

// Scores queue insertions; higher is better.  Defaults to zero everywhere,
// in which case ordering falls back to insertion order.
using BeamScorer = std::function<double(const SearchState&, ActionId)>;

struct BeamEntry {
  SearchState state;
  double score = 0.0;
  int birth = 0;                  // insertion step, breaks score ties
  std::vector<ActionId> expanded; // base actions already taken from this entry
};

struct BeamQueueState {
  std::vector<BeamEntry> entries;            // score desc, birth asc
  std::optional<std::size_t> completed;      // best terminal entry, if any
};

// Views any queue-driven search over a base task as greedy search in an
// abstract space whose states are bounded queues of base states.
//
// Abstract actions: id = queue_index * base_k + base_action expands one
// queue entry with one base action; the final id is "finish", legal exactly
// when a completed base state sits in the queue.  An expansion inserts the
// chosen child by cumulative score (the child always survives truncation --
// the policy asked for it), keeps the parent for its remaining untried
// actions, and drops the worst overflow entry.  With beam_width = 1 this
// reduces exactly to the base task.
class BeamTask : public Task {
 public:
  BeamTask(const Task& base, int beam_width, BeamScorer scorer = {},
           FeatureHasher hasher = FeatureHasher{20})
      : base_(base), width_(beam_width), scorer_(std::move(scorer)), hasher_(hasher) {}

  const Task& base() const { return base_; }
  int beam_width() const { return width_; }

  ActionId finish_action() const { return width_ * base_.action_count(); }

  int action_count() const override { return width_ * base_.action_count() + 1; }

  BeamQueueState interpret(const SearchState& s) const {
    BeamQueueState q;
    BeamEntry root;
    root.state = base_.start_state(*s.instance);
    q.entries.push_back(std::move(root));
    int step = 0;
    for (ActionId aa : s.prefix) {
      ++step;
      if (aa == finish_action()) break;
      apply_expansion(q, aa, step);
    }
    refresh_completed(q);
    return q;
  }

  bool is_terminal(const SearchState& s) const override {
    if (!s.prefix.empty() && s.prefix.back() == finish_action()) return true;
    if (s.t() >= horizon_cap(*s.instance)) return true;
    BeamQueueState q = interpret(s);
    return !any_expansion_legal(q) && !q.completed.has_value();
  }

  std::vector<std::uint8_t> action_mask(const SearchState& s) const override {
    BeamQueueState q = interpret(s);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(action_count()), 0);
    int base_k = base_.action_count();
    for (std::size_t qi = 0; qi < q.entries.size(); ++qi) {
      const BeamEntry& e = q.entries[qi];
      if (base_.is_terminal(e.state)) continue;
      auto base_mask = base_.action_mask(e.state);
      for (ActionId a = 0; a < base_k; ++a) {
        if (!base_mask[a]) continue;
        if (std::find(e.expanded.begin(), e.expanded.end(), a) != e.expanded.end()) continue;
        mask[static_cast<std::size_t>(qi) * base_k + static_cast<std::size_t>(a)] = 1;
      }
    }
    if (q.completed) mask[static_cast<std::size_t>(finish_action())] = 1;
    return mask;
  }

  // The top entry's base features plus queue-rank indicators.
  FeatureVector features(const SearchState& s) const override {
    BeamQueueState q = interpret(s);
    FeatureVector top = base_.features(q.entries.front().state);
    std::vector<FeatureVector::Entry> raw(top.entries().begin(), top.entries().end());
    for (std::size_t i = 0; i < q.entries.size(); ++i) {
      std::string rank = std::to_string(i);
      raw.push_back({hasher_.structural("beam:occ[" + rank + "]"), 1.0});
      raw.push_back({hasher_.structural("beam:depth[" + rank + "]=" +
                                        std::to_string(q.entries[i].state.t())),
                     1.0});
      if (base_.is_terminal(q.entries[i].state))
        raw.push_back({hasher_.structural("beam:goal[" + rank + "]"), 1.0});
    }
    if (q.completed) raw.push_back({hasher_.structural("beam:finishable"), 1.0});
    return FeatureVector::from_entries(std::move(raw));
  }

  bool has_reference(const SearchState& s) const override {
    return base_.has_reference(base_.start_state(*s.instance));
  }

  ActionId initial_policy_action(const SearchState& s) const override {
    BeamQueueState q = interpret(s);
    int base_k = base_.action_count();
    double best_value = std::numeric_limits<double>::infinity();
    // Secondary key: the created child's own completion loss, so ties
    // resolve toward expansions that extend an optimal path instead of
    // dithering on stale entries.  Finish wins any remaining tie so the
    // optimal rollout terminates.
    double best_tiekey = std::numeric_limits<double>::infinity();
    ActionId best_action = -1;
    if (q.completed) {
      best_value = base_.final_loss(q.entries[*q.completed].state);
      best_tiekey = -1.0;
      best_action = finish_action();
    }
    for (std::size_t qi = 0; qi < q.entries.size(); ++qi) {
      const BeamEntry& e = q.entries[qi];
      if (base_.is_terminal(e.state)) continue;
      auto base_mask = base_.action_mask(e.state);
      for (ActionId a = 0; a < base_k; ++a) {
        if (!base_mask[a]) continue;
        if (std::find(e.expanded.begin(), e.expanded.end(), a) != e.expanded.end()) continue;
        BeamQueueState next = q;
        apply_expansion(next, static_cast<ActionId>(qi) * base_k + a, s.t() + 1);
        double value = queue_completion_loss(next);
        double tiekey = base_.completion_loss_from(next.entries[child_rank(next, s.t() + 1)].state);
        if (value < best_value - 1e-12 ||
            (value < best_value + 1e-12 && tiekey < best_tiekey - 1e-12)) {
          best_value = value;
          best_tiekey = tiekey;
          best_action = static_cast<ActionId>(qi) * base_k + a;
        }
      }
    }
    if (best_action < 0) throw IllegalAction("beam initial policy: no legal action");
    return best_action;
  }

  double completion_loss(const SearchState& s, ActionId a) const override {
    BeamQueueState q = interpret(s);
    if (a == finish_action()) {
      if (!q.completed) throw IllegalAction("beam completion_loss: finish not legal");
      return base_.final_loss(q.entries[*q.completed].state);
    }
    apply_expansion(q, a, s.t() + 1);
    return queue_completion_loss(q);
  }

  double completion_loss_from(const SearchState& s) const override {
    return queue_completion_loss(interpret(s));
  }

  double final_loss(const SearchState& s) const override {
    return base_.final_loss(selected_entry(s).state);
  }

  std::vector<int> output_labels(const SearchState& s) const override {
    return base_.output_labels(selected_entry(s).state);
  }

  int horizon(const Instance& x) const override { return horizon_cap(x); }

  double max_loss(const Instance& x) const override { return base_.max_loss(x); }

 private:
  int horizon_cap(const Instance& x) const {
    return width_ * (base_.horizon(x) + base_.action_count()) + 1;
  }

  // Entry picked when the trajectory ends: the selected goal after finish,
  // otherwise the best-scoring entry (forced cutoffs).
  BeamEntry selected_entry(const SearchState& s) const {
    BeamQueueState q = interpret(s);
    if (!s.prefix.empty() && s.prefix.back() == finish_action() && q.completed)
      return q.entries[*q.completed];
    return q.entries.front();
  }

  static std::size_t child_rank(const BeamQueueState& q, int birth) {
    for (std::size_t i = 0; i < q.entries.size(); ++i)
      if (q.entries[i].birth == birth) return i;
    return 0;
  }

  void refresh_completed(BeamQueueState& q) const {
    q.completed.reset();
    for (std::size_t i = 0; i < q.entries.size(); ++i) {
      if (base_.is_terminal(q.entries[i].state)) {
        q.completed = i;
        break;  // entries are sorted, the first terminal is the best
      }
    }
  }

  bool any_expansion_legal(const BeamQueueState& q) const {
    int base_k = base_.action_count();
    for (const BeamEntry& e : q.entries) {
      if (base_.is_terminal(e.state)) continue;
      auto base_mask = base_.action_mask(e.state);
      for (ActionId a = 0; a < base_k; ++a) {
        if (!base_mask[a]) continue;
        if (std::find(e.expanded.begin(), e.expanded.end(), a) == e.expanded.end()) return true;
      }
    }
    return false;
  }

  void apply_expansion(BeamQueueState& q, ActionId abstract_action, int step) const {
    int base_k = base_.action_count();
    std::size_t qi = static_cast<std::size_t>(abstract_action) / base_k;
    ActionId a = abstract_action % base_k;
    if (qi >= q.entries.size())
      throw IllegalAction("beam expansion: queue index out of range");
    BeamEntry& parent = q.entries[qi];

    BeamEntry child;
    child.state = advance(parent.state, a, base_);
    child.score = parent.score + (scorer_ ? scorer_(parent.state, a) : 0.0);
    child.birth = step;
    parent.expanded.insert(
        std::lower_bound(parent.expanded.begin(), parent.expanded.end(), a), a);

    auto better = [](const BeamEntry& x, const BeamEntry& y) {
      if (x.score != y.score) return x.score > y.score;
      return x.birth < y.birth;
    };
    if (static_cast<int>(q.entries.size()) < width_) {
      q.entries.insert(
          std::upper_bound(q.entries.begin(), q.entries.end(), child, better),
          std::move(child));
    } else {
      // Full queue: the chosen child always enters; the worst of the rest
      // falls out.
      q.entries.pop_back();
      q.entries.insert(
          std::upper_bound(q.entries.begin(), q.entries.end(), child, better),
          std::move(child));
    }
    refresh_completed(q);
  }

  // Optimal completion loss achievable from some entry of the queue.
  double queue_completion_loss(const BeamQueueState& q) const {
    double best = std::numeric_limits<double>::infinity();
    for (const BeamEntry& e : q.entries)
      best = std::min(best, base_.completion_loss_from(e.state));
    return best;
  }

  const Task& base_;
  int width_;
  BeamScorer scorer_;
  FeatureHasher hasher_;
};

inline BeamTask beam_wrap(const Task& base, int beam_width, BeamScorer scorer = {},
                          FeatureHasher hasher = FeatureHasher{20}) {
  if (beam_width < 1) throw std::invalid_argument("beam_wrap: width must be >= 1");
  return BeamTask(base, beam_width, std::move(scorer), hasher);
}

}  // namespace searn
