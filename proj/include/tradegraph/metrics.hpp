#pragma once

#include <optional>
#include <span>

namespace tradegraph {

/// Mann-Whitney AUC with midranks for ties. Throws Error unless both classes occur.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Fraud (label 1) is the positive class. Values lie in [0, 1].
struct Evaluation {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    std::optional<double> auc; // empty when only one class is present
};

Evaluation evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

} // namespace tradegraph
