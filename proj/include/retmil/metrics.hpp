#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace retmil {

// counts[true][predicted]
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

ConfusionMatrix confusion_matrix(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                 std::size_t num_classes);

// Mean per-class recall. Every class must occur in y_true.
double balanced_accuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                         std::size_t num_classes);

// Support-weighted mean of per-class F1; a class with precision + recall = 0 scores 0.
double weighted_f1(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                   std::size_t num_classes);

// Classes whose F1 fell back to 0 because nothing was predicted or recalled.
std::vector<std::size_t> f1_zero_division_classes(std::span<const std::size_t> y_true,
                                                  std::span<const std::size_t> y_pred, std::size_t num_classes);

// Mann-Whitney AUC for binary labels: P(score_pos > score_neg) with ties as 1/2.
double roc_auc(std::span<const std::size_t> y_true, std::span<const double> scores);

}  // namespace retmil
