#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "searn/feature_vector.hpp"

namespace searn {

using ActionId = std::int32_t;

using SparseWeights = std::unordered_map<std::uint32_t, double>;

inline double sparse_dot(const SparseWeights& w, const FeatureVector& f) {
  double s = 0.0;
  for (const auto& [idx, val] : f.entries()) {
    auto it = w.find(idx);
    if (it != w.end()) s += it->second * val;
  }
  return s;
}

// Multiclass linear scorer: one sparse weight vector and bias per action.
// Prediction is argmax of score; ties break toward the lowest action id.
class LinearClassifier {
 public:
  explicit LinearClassifier(int action_count)
      : weights_(action_count), bias_(action_count, 0.0) {}

  int action_count() const { return static_cast<int>(bias_.size()); }

  double score(const FeatureVector& f, ActionId a) const {
    return sparse_dot(weights_[a], f) + bias_[a];
  }

  std::vector<double> scores(const FeatureVector& f) const {
    std::vector<double> out(bias_.size());
    for (ActionId a = 0; a < action_count(); ++a) out[a] = score(f, a);
    return out;
  }

  ActionId predict(const FeatureVector& f) const {
    return predict(f, std::span<const std::uint8_t>{});
  }

  // Masked argmax; empty mask means all actions legal.
  ActionId predict(const FeatureVector& f, std::span<const std::uint8_t> mask) const {
    ActionId best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < action_count(); ++a) {
      if (!mask.empty() && !mask[a]) continue;
      double s = score(f, a);
      if (s > best_score) {
        best_score = s;
        best = a;
      }
    }
    return best;
  }

  SparseWeights& weights(ActionId a) { return weights_[a]; }
  const SparseWeights& weights(ActionId a) const { return weights_[a]; }
  double& bias(ActionId a) { return bias_[a]; }
  double bias(ActionId a) const { return bias_[a]; }

 private:
  std::vector<SparseWeights> weights_;
  std::vector<double> bias_;
};

}  // namespace searn
