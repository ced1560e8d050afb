#pragma once

#include <string>
#include <vector>

#include "searn/errors.hpp"
#include "searn/model_io.hpp"
#include "searn/tasks.hpp"

namespace searn {

struct EvalReport {
  LossKind loss = LossKind::Hamming;
  std::size_t instance_count = 0;

  // Hamming
  double mean_hamming = 0.0;  // mean per-token error rate
  long total_hamming = 0;
  long total_tokens = 0;

  // F1 from globally pooled span counts (not averaged per sentence)
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long pooled_intersection = 0;
  long pooled_gold = 0;
  long pooled_predicted = 0;

  std::vector<double> per_sentence;

  double aggregate() const { return loss == LossKind::Hamming ? mean_hamming : f1; }
};

// Compare gold and predicted label sequences.  For F1, labels are BIO tag
// ids and spans pool across the corpus; precision with zero predicted spans
// reports as 0.
inline EvalReport evaluate(const std::vector<std::vector<int>>& gold,
                           const std::vector<std::vector<int>>& predicted, LossKind loss) {
  if (gold.size() != predicted.size())
    throw LengthMismatch("evaluate: sentence count mismatch (" + std::to_string(gold.size()) +
                         " gold vs " + std::to_string(predicted.size()) + " predicted)");
  EvalReport report;
  report.loss = loss;
  report.instance_count = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size())
      throw LengthMismatch("evaluate: token count mismatch in sentence " + std::to_string(i));
    if (loss == LossKind::Hamming) {
      int h = hamming_loss(gold[i], predicted[i]);
      report.total_hamming += h;
      report.total_tokens += static_cast<long>(gold[i].size());
      report.per_sentence.push_back(static_cast<double>(h));
    } else {
      std::vector<ChunkSpan> y = bio_decode(gold[i]);
      std::vector<ChunkSpan> y_hat = bio_decode(predicted[i]);
      report.per_sentence.push_back(f1_and_cost(y, y_hat).first);
      std::vector<ChunkSpan> sy(y);
      std::sort(sy.begin(), sy.end());
      for (const auto& s : y_hat)
        if (std::binary_search(sy.begin(), sy.end(), s)) ++report.pooled_intersection;
      report.pooled_gold += static_cast<long>(y.size());
      report.pooled_predicted += static_cast<long>(y_hat.size());
    }
  }
  if (loss == LossKind::Hamming) {
    report.mean_hamming = report.total_tokens == 0
                              ? 0.0
                              : static_cast<double>(report.total_hamming) /
                                    static_cast<double>(report.total_tokens);
  } else {
    report.precision = report.pooled_predicted == 0
                           ? 0.0
                           : static_cast<double>(report.pooled_intersection) /
                                 static_cast<double>(report.pooled_predicted);
    report.recall = report.pooled_gold == 0
                        ? 0.0
                        : static_cast<double>(report.pooled_intersection) /
                              static_cast<double>(report.pooled_gold);
    long denom = report.pooled_gold + report.pooled_predicted;
    report.f1 = denom == 0 ? 1.0
                           : 2.0 * static_cast<double>(report.pooled_intersection) /
                                 static_cast<double>(denom);
  }
  return report;
}

}  // namespace searn
