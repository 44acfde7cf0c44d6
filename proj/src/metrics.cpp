#include "retmil/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "retmil/error.hpp"

namespace retmil {

namespace {

void check_inputs(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred, std::size_t classes) {
    if (y_true.size() != y_pred.size()) throw InputError("metrics: label and prediction counts differ");
    if (y_true.empty()) throw InputError("metrics: no samples");
    if (classes == 0) throw InputError("metrics: num_classes must be positive");
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] >= classes || y_pred[i] >= classes) {
            throw InputError("metrics: class index out of range at sample " + std::to_string(i));
        }
    }
}

void require_all_classes(const ConfusionMatrix& cm) {
    for (std::size_t c = 0; c < cm.size(); ++c) {
        if (std::accumulate(cm[c].begin(), cm[c].end(), std::size_t{0}) == 0) {
            throw InputError("metrics: class " + std::to_string(c) + " has no true samples");
        }
    }
}

struct ClassCounts {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;
};

ClassCounts counts_for(const ConfusionMatrix& cm, std::size_t c) {
    ClassCounts k;
    for (std::size_t j = 0; j < cm.size(); ++j) {
        k.support += cm[c][j];
        if (j != c) {
            k.fn += cm[c][j];
            k.fp += cm[j][c];
        }
    }
    k.tp = cm[c][c];
    return k;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                 std::size_t num_classes) {
    check_inputs(y_true, y_pred, num_classes);
    ConfusionMatrix cm(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) ++cm[y_true[i]][y_pred[i]];
    return cm;
}

double balanced_accuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                         std::size_t num_classes) {
    const auto cm = confusion_matrix(y_true, y_pred, num_classes);
    require_all_classes(cm);
    double total = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto k = counts_for(cm, c);
        total += static_cast<double>(k.tp) / static_cast<double>(k.support);
    }
    return total / static_cast<double>(num_classes);
}

double weighted_f1(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                   std::size_t num_classes) {
    const auto cm = confusion_matrix(y_true, y_pred, num_classes);
    require_all_classes(cm);
    double total = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto k = counts_for(cm, c);
        // F1 = 2TP / (2TP + FP + FN), which is 0 exactly when precision + recall = 0.
        const std::size_t denom = 2 * k.tp + k.fp + k.fn;
        const double f1 = k.tp == 0 ? 0.0 : 2.0 * static_cast<double>(k.tp) / static_cast<double>(denom);
        total += static_cast<double>(k.support) * f1;
    }
    return total / static_cast<double>(y_true.size());
}

std::vector<std::size_t> f1_zero_division_classes(std::span<const std::size_t> y_true,
                                                  std::span<const std::size_t> y_pred, std::size_t num_classes) {
    const auto cm = confusion_matrix(y_true, y_pred, num_classes);
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts_for(cm, c).tp == 0) out.push_back(c);
    }
    return out;
}

double roc_auc(std::span<const std::size_t> y_true, std::span<const double> scores) {
    if (y_true.size() != scores.size()) throw InputError("roc_auc: label and score counts differ");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 1) {
            pos.push_back(scores[i]);
        } else if (y_true[i] == 0) {
            neg.push_back(scores[i]);
        } else {
            throw InputError("roc_auc: labels must be 0 or 1");
        }
    }
    if (pos.empty() || neg.empty()) throw InputError("roc_auc: both classes must be present");
    // Rank-based count: for each positive, negatives strictly below plus half the ties.
    std::sort(neg.begin(), neg.end());
    double wins = 0.0;
    for (double p : pos) {
        const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
        const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
        wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace retmil
