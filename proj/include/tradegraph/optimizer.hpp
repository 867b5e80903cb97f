#pragma once

#include "tradegraph/model.hpp"

namespace tradegraph {

struct OptimizerState {
    ModelParams m;
    ModelParams v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerState for_params(const ModelParams& params);
};

/// Adam with decoupled weight decay: theta <- theta - lr*wd*theta, then the Adam update.
/// Throws NumericError naming the tensor if the update is not finite.
void optimizer_step(ModelParams& params, const ModelParams& grad, OptimizerState& opt, double lr, double weight_decay);

} // namespace tradegraph
