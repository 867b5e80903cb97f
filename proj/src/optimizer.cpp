#include "tradegraph/optimizer.hpp"

#include <cmath>

namespace tradegraph {

OptimizerState OptimizerState::for_params(const ModelParams& params) {
    OptimizerState s;
    s.m = ModelParams::zeros_like(params);
    s.v = ModelParams::zeros_like(params);
    return s;
}

void optimizer_step(ModelParams& params, const ModelParams& grad, OptimizerState& opt, double lr, double weight_decay) {
    if (!params.same_layout(grad) || !params.same_layout(opt.m) || !params.same_layout(opt.v))
        throw DimensionError("optimizer state does not match the parameter layout");
    ++opt.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));

    // Walk the four structures in lockstep by flattening names to tensors.
    std::vector<Matrix*> p, m, v;
    std::vector<const Matrix*> g;
    std::vector<std::string> names;
    params.for_each([&](const std::string& name, Matrix& t) { p.push_back(&t); names.push_back(name); });
    opt.m.for_each([&](const std::string&, Matrix& t) { m.push_back(&t); });
    opt.v.for_each([&](const std::string&, Matrix& t) { v.push_back(&t); });
    grad.for_each([&](const std::string&, const Matrix& t) { g.push_back(&t); });

    for (std::size_t t = 0; t < p.size(); ++t) {
        Matrix& theta = *p[t];
        if (weight_decay != 0.0) theta *= 1.0 - lr * weight_decay;
        m[t]->array() = opt.beta1 * m[t]->array() + (1.0 - opt.beta1) * g[t]->array();
        v[t]->array() = opt.beta2 * v[t]->array() + (1.0 - opt.beta2) * g[t]->array().square();
        theta.array() -= lr * (m[t]->array() / bc1) / ((v[t]->array() / bc2).sqrt() + opt.eps);
        if (!theta.allFinite()) throw NumericError(names[t], "optimizer update is not finite");
    }
}

} // namespace tradegraph
