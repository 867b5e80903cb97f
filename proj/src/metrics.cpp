#include "tradegraph/metrics.hpp"

#include "tradegraph/common.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace tradegraph {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of midranks (1-based) of the positives.
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            const int y = labels[order[t]];
            if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
            if (y == 1) {
                rank_sum += midrank;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw Error("AUC is undefined when only one class is present");
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

Evaluation evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
    if (scores.empty() || scores.size() != labels.size()) throw DimensionError("evaluation needs equal nonempty inputs");
    std::size_t tp = 0, fp = 0, fn = 0, pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] >= threshold;
        if (labels[i] == 1) {
            ++pos;
            flagged ? ++tp : ++fn;
        } else if (labels[i] == 0) {
            if (flagged) ++fp;
        } else {
            throw Error("labels must be 0 or 1");
        }
    }
    Evaluation e;
    e.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    e.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    e.f1 = e.precision + e.recall > 0.0 ? 2.0 * e.precision * e.recall / (e.precision + e.recall) : 0.0;
    if (pos > 0 && pos < scores.size()) e.auc = roc_auc(scores, labels);
    return e;
}

} // namespace tradegraph
