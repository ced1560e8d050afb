#pragma once

// Brute-force oracles shared by the unit and acceptance suites.  Everything
// here enumerates the full completion space, independently of the library's
// closed forms.

#include <limits>
#include <vector>

#include "searn/core.hpp"

namespace oracles {

using searn::ActionId;
using searn::SearchState;
using searn::Task;

// Minimum achievable loss over all completions from s.
inline double best_completion_loss(const Task& task, const SearchState& s) {
  if (task.is_terminal(s)) return task.final_loss(s);
  auto mask = task.action_mask(s);
  double best = std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < task.action_count(); ++a) {
    if (!mask[a]) continue;
    best = std::min(best, best_completion_loss(task, advance(s, a, task)));
  }
  return best;
}

// All first actions that achieve the optimal completion loss.
inline std::vector<ActionId> optimal_first_actions(const Task& task, const SearchState& s) {
  auto mask = task.action_mask(s);
  std::vector<double> values(static_cast<std::size_t>(task.action_count()),
                             std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < task.action_count(); ++a) {
    if (!mask[a]) continue;
    values[static_cast<std::size_t>(a)] = best_completion_loss(task, advance(s, a, task));
    best = std::min(best, values[static_cast<std::size_t>(a)]);
  }
  std::vector<ActionId> out;
  for (ActionId a = 0; a < task.action_count(); ++a)
    if (values[static_cast<std::size_t>(a)] <= best + 1e-12) out.push_back(a);
  return out;
}

// Maximum achievable loss over all completions (for c_max style checks).
inline double worst_completion_loss(const Task& task, const SearchState& s) {
  if (task.is_terminal(s)) return task.final_loss(s);
  auto mask = task.action_mask(s);
  double worst = -std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < task.action_count(); ++a) {
    if (!mask[a]) continue;
    worst = std::max(worst, worst_completion_loss(task, advance(s, a, task)));
  }
  return worst;
}

}  // namespace oracles
