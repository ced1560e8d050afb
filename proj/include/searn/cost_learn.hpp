#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "searn/errors.hpp"
#include "searn/feature_vector.hpp"
#include "searn/linear_classifier.hpp"
#include "searn/rng.hpp"

namespace searn {

// Feature vector paired with one non-negative cost per action, in regret
// form: the cheapest action has cost exactly 0.
struct CostSensitiveExample {
  FeatureVector features;
  std::vector<double> costs;

  int action_count() const { return static_cast<int>(costs.size()); }
};

struct WeightedBinaryExample {
  FeatureVector features;
  int label = 1;  // -1 or +1
  double importance = 1.0;
};

struct ActionPair {
  ActionId first = 0;   // lower action id
  ActionId second = 0;  // higher action id

  bool operator<(const ActionPair& o) const {
    return first != o.first ? first < o.first : second < o.second;
  }
  bool operator==(const ActionPair& o) const {
    return first == o.first && second == o.second;
  }
};

// --------------------------------------------------------------------------
// Weighted-all-pairs reduction
// --------------------------------------------------------------------------
//
// For a cost vector c over k actions, let n(t) = |{m : c_m <= t}| and
//
//     G(v) = integral from 0 to v of dt / n(t).
//
// The pair (i, j) with c_i != c_j yields one binary example preferring the
// cheaper action, with importance |G(c_i) - G(c_j)|.  Equal costs yield
// nothing.  G is piecewise linear with breakpoints at the sorted cost
// values, so it is evaluated exactly.

inline std::vector<double> wap_g_values(const std::vector<double>& costs) {
  std::vector<double> sorted(costs);
  std::sort(sorted.begin(), sorted.end());
  // G at each sorted position; ties share a value.
  std::vector<double> g(sorted.size(), 0.0);
  for (std::size_t m = 1; m < sorted.size(); ++m) {
    // On [sorted[m-1], sorted[m]) exactly the first m' costs are <= t, where
    // m' counts entries equal to sorted[m-1] as well.
    std::size_t n_le = m;
    while (n_le < sorted.size() && sorted[n_le] == sorted[m - 1]) ++n_le;
    g[m] = g[m - 1] + (sorted[m] - sorted[m - 1]) / static_cast<double>(n_le);
  }
  // Map each original cost to its G value.
  std::vector<double> out(costs.size());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), costs[i]);
    out[i] = g[static_cast<std::size_t>(it - sorted.begin())];
  }
  return out;
}

inline std::vector<std::pair<ActionPair, WeightedBinaryExample>> wap_reduce(
    const std::vector<CostSensitiveExample>& examples) {
  std::vector<std::pair<ActionPair, WeightedBinaryExample>> out;
  if (examples.empty()) return out;
  int k = examples.front().action_count();
  if (k < 2) throw MismatchedActionCount("wap_reduce: need at least 2 actions");
  for (const auto& ex : examples) {
    if (ex.action_count() != k)
      throw MismatchedActionCount("wap_reduce: inconsistent action counts");
    std::vector<double> g = wap_g_values(ex.costs);
    for (ActionId i = 0; i < k; ++i) {
      for (ActionId j = i + 1; j < k; ++j) {
        if (ex.costs[i] == ex.costs[j]) continue;
        WeightedBinaryExample b;
        b.features = ex.features;
        b.label = ex.costs[i] < ex.costs[j] ? +1 : -1;  // +1 prefers action i
        b.importance = std::abs(g[i] - g[j]);
        if (b.importance > 0.0) out.push_back({ActionPair{i, j}, std::move(b)});
      }
    }
  }
  return out;
}

// Costing: rejection-sample on importance.  Each example is kept with
// probability importance / max importance; kept examples become unweighted.
inline std::vector<WeightedBinaryExample> costing_resample(
    const std::vector<WeightedBinaryExample>& examples, RandomStream& rng) {
  if (examples.empty()) throw EmptyInput("costing_resample: no examples");
  double max_imp = 0.0;
  for (const auto& e : examples) max_imp = std::max(max_imp, e.importance);
  std::vector<WeightedBinaryExample> kept;
  if (max_imp <= 0.0) return kept;
  for (const auto& e : examples) {
    if (rng.uniform() < e.importance / max_imp) {
      WeightedBinaryExample u = e;
      u.importance = 1.0;
      kept.push_back(std::move(u));
    }
  }
  return kept;
}

// --------------------------------------------------------------------------
// Binary learners
// --------------------------------------------------------------------------

struct BinaryScorer {
  SparseWeights weights;
  double bias = 0.0;

  double score(const FeatureVector& f) const { return sparse_dot(weights, f) + bias; }
  int classify(const FeatureVector& f) const { return score(f) >= 0.0 ? +1 : -1; }
};

// Averaged perceptron.  Importance scales the update magnitude; training
// order is reshuffled each epoch.
inline BinaryScorer train_binary_perceptron(const std::vector<WeightedBinaryExample>& examples,
                                            int epochs, RandomStream& rng) {
  if (examples.empty()) throw EmptyInput("train_binary_perceptron: no examples");
  SparseWeights w, sum_w;
  std::unordered_map<std::uint32_t, std::int64_t> last;
  double b = 0.0, sum_b = 0.0;
  std::int64_t last_b = 0, step = 0;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const auto& e = examples[idx];
      double margin = (sparse_dot(w, e.features) + b) * e.label;
      if (margin <= 0.0) {
        for (const auto& [fi, fv] : e.features.entries()) {
          double& wi = w[fi];
          sum_w[fi] += wi * static_cast<double>(step - last[fi]);
          last[fi] = step;
          wi += e.label * e.importance * fv;
        }
        sum_b += b * static_cast<double>(step - last_b);
        last_b = step;
        b += e.label * e.importance;
      }
      ++step;
    }
  }

  BinaryScorer out;
  if (step == 0) return out;
  for (auto& [fi, wi] : w) {
    double total = sum_w[fi] + wi * static_cast<double>(step - last[fi]);
    double avg = total / static_cast<double>(step);
    if (avg != 0.0) out.weights[fi] = avg;
  }
  out.bias = (sum_b + b * static_cast<double>(step - last_b)) / static_cast<double>(step);
  return out;
}

struct LearningRateSchedule {
  double initial = 0.5;
  double decay = 1e-3;  // eta_t = initial / (1 + decay * t)

  double rate(std::int64_t t) const { return initial / (1.0 + decay * static_cast<double>(t)); }
};

// Importance-weighted regularized log-loss and its gradient:
//
//   O(w, b) = (1/N) sum_e imp_e * log(1 + exp(-y_e (w.x_e + b)))
//           + (l2/2) (|w|^2 + b^2)
//
// Exposed separately so the objective can be checked against finite
// differences and full-batch reference runs.
inline double logreg_objective(const std::vector<WeightedBinaryExample>& examples,
                               const SparseWeights& w, double b, double l2) {
  double loss = 0.0;
  for (const auto& e : examples) {
    double m = -(sparse_dot(w, e.features) + b) * e.label;
    // log(1 + exp(m)) without overflow
    loss += e.importance * (m > 30.0 ? m : std::log1p(std::exp(m)));
  }
  loss /= static_cast<double>(examples.size());
  double reg = b * b;
  for (const auto& [fi, wi] : w) reg += wi * wi;
  return loss + 0.5 * l2 * reg;
}

inline std::pair<SparseWeights, double> logreg_gradient(
    const std::vector<WeightedBinaryExample>& examples, const SparseWeights& w, double b,
    double l2) {
  SparseWeights gw;
  double gb = 0.0;
  double n = static_cast<double>(examples.size());
  for (const auto& e : examples) {
    double f = sparse_dot(w, e.features) + b;
    double sig = 1.0 / (1.0 + std::exp(e.label * f));  // sigma(-y f)
    double coeff = -e.label * sig * e.importance / n;
    for (const auto& [fi, fv] : e.features.entries()) gw[fi] += coeff * fv;
    gb += coeff;
  }
  for (const auto& [fi, wi] : w) gw[fi] += l2 * wi;
  gb += l2 * b;
  return {std::move(gw), gb};
}

inline double gradient_norm(const std::pair<SparseWeights, double>& g) {
  double s = g.second * g.second;
  for (const auto& [fi, gi] : g.first) s += gi * gi;
  return std::sqrt(s);
}

struct LogRegConfig {
  double l2 = 1e-4;
  int epochs = 20;
  LearningRateSchedule schedule;
  // Deterministic full-batch refinement after the stochastic pass, so the
  // returned weights sit at a stationary point on desk-scale data.
  int polish_steps = 200;
  double polish_tolerance = 1e-6;
};

inline BinaryScorer train_binary_logreg(const std::vector<WeightedBinaryExample>& examples,
                                        const LogRegConfig& config, RandomStream& rng) {
  if (examples.empty()) throw EmptyInput("train_binary_logreg: no examples");
  // SGD with lazily applied L2: w = scale * v.
  SparseWeights v;
  double scale = 1.0, b = 0.0;
  std::int64_t t = 0;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const auto& e = examples[idx];
      double eta = config.schedule.rate(t++);
      double f = scale * sparse_dot(v, e.features) + b;
      double sig = 1.0 / (1.0 + std::exp(e.label * f));
      double coeff = e.label * sig * e.importance;
      scale *= (1.0 - eta * config.l2);
      if (scale < 1e-9) {
        for (auto& [fi, vi] : v) vi *= scale;
        scale = 1.0;
      }
      for (const auto& [fi, fv] : e.features.entries()) v[fi] += eta * coeff * fv / scale;
      b = b * (1.0 - eta * config.l2) + eta * coeff;
    }
  }

  SparseWeights w;
  for (const auto& [fi, vi] : v) {
    double wi = vi * scale;
    if (wi != 0.0) w[fi] = wi;
  }

  // Full-batch polish with backtracking.
  double step_size = config.schedule.rate(t);
  for (int it = 0; it < config.polish_steps; ++it) {
    auto g = logreg_gradient(examples, w, b, config.l2);
    if (gradient_norm(g) < config.polish_tolerance) break;
    double before = logreg_objective(examples, w, b, config.l2);
    while (step_size > 1e-12) {
      SparseWeights w2 = w;
      for (const auto& [fi, gi] : g.first) w2[fi] -= step_size * gi;
      double b2 = b - step_size * g.second;
      if (logreg_objective(examples, w2, b2, config.l2) < before) {
        w = std::move(w2);
        b = b2;
        step_size *= 1.3;
        break;
      }
      step_size *= 0.5;
    }
    if (step_size <= 1e-12) break;
  }

  BinaryScorer out;
  for (const auto& [fi, wi] : w)
    if (wi != 0.0) out.weights[fi] = wi;
  out.bias = b;
  return out;
}

// --------------------------------------------------------------------------
// Cost-sensitive multiclass training
// --------------------------------------------------------------------------

enum class LearnerKind { Perceptron, LogReg };

struct CostSensitiveConfig {
  LearnerKind learner = LearnerKind::LogReg;
  int perceptron_epochs = 10;
  LogRegConfig logreg;
  bool apply_costing = true;
};

// Weighted-all-pairs + costing over the chosen binary learner.  Pairwise
// scorers fold into per-action weights: each pair (i, j) adds its scorer to
// action i and subtracts it from action j, so argmax over actions equals the
// summed-pairwise-margin tournament.
inline std::shared_ptr<const LinearClassifier> train_cost_sensitive(
    const std::vector<CostSensitiveExample>& examples, const CostSensitiveConfig& config,
    RandomStream& rng) {
  if (examples.empty()) throw EmptyInput("train_cost_sensitive: no examples");
  int k = examples.front().action_count();
  auto clf = std::make_shared<LinearClassifier>(k);

  auto pairs = wap_reduce(examples);
  std::map<ActionPair, std::vector<WeightedBinaryExample>> by_pair;
  for (auto& [tag, ex] : pairs) by_pair[tag].push_back(std::move(ex));

  int pair_index = 0;
  for (auto& [tag, pair_examples] : by_pair) {
    RandomStream pair_rng = rng.split(0x7a1u, static_cast<std::uint64_t>(tag.first),
                                      static_cast<std::uint64_t>(tag.second));
    std::vector<WeightedBinaryExample> train_set;
    if (config.apply_costing) {
      train_set = costing_resample(pair_examples, pair_rng);
      if (train_set.empty()) continue;
    } else {
      train_set = pair_examples;
    }
    BinaryScorer scorer;
    if (config.learner == LearnerKind::Perceptron)
      scorer = train_binary_perceptron(train_set, config.perceptron_epochs, pair_rng);
    else
      scorer = train_binary_logreg(train_set, config.logreg, pair_rng);

    for (const auto& [fi, wi] : scorer.weights) {
      clf->weights(tag.first)[fi] += wi;
      clf->weights(tag.second)[fi] -= wi;
    }
    clf->bias(tag.first) += scorer.bias;
    clf->bias(tag.second) -= scorer.bias;
    ++pair_index;
  }
  (void)pair_index;
  return clf;
}

// Mean cost of the classifier's predictions; 0 means per-state optimal
// because costs are regrets.
inline double classifier_cs_loss(const LinearClassifier& clf,
                                 const std::vector<CostSensitiveExample>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) {
    if (ex.action_count() != clf.action_count())
      throw MismatchedActionCount("classifier_cs_loss: action count mismatch");
    total += ex.costs[clf.predict(ex.features)];
  }
  return total / static_cast<double>(examples.size());
}

}  // namespace searn
