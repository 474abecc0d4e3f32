#include "eclf/optim.hpp"

#include <algorithm>
#include <cmath>

namespace eclf {

template <typename S>
Optimizer<S>::Optimizer(OptimizerConfig cfg, const ParamStore<S>& store) : cfg_(cfg) {
    slots_.resize(store.params.size());
    if (cfg_.kind == OptimizerKind::adam) {
        for (std::size_t i = 0; i < store.params.size(); ++i) {
            slots_[i].m = TensorT<S>(store.params[i].value.shape);
            slots_[i].v = TensorT<S>(store.params[i].value.shape);
        }
    }
}

template <typename S>
void Optimizer<S>::step(ParamStore<S>& store, const std::vector<std::string>& groups) {
    require(slots_.size() == store.params.size(), "optimizer state does not match parameter store");
    for (std::size_t i = 0; i < store.params.size(); ++i) {
        auto& p = store.params[i];
        if (p.frozen) continue;
        if (!groups.empty() && std::find(groups.begin(), groups.end(), p.group) == groups.end()) continue;
        if (!p.grad.all_finite())
            throw std::runtime_error("non-finite gradient for parameter '" + p.name + "'");

        auto& slot = slots_[i];
        slot.steps += 1;
        if (cfg_.kind == OptimizerKind::sgd) {
            for (std::int64_t k = 0; k < p.value.size(); ++k)
                p.value[k] -= static_cast<S>(cfg_.learning_rate) * p.grad[k];
            continue;
        }
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(slot.steps));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(slot.steps));
        for (std::int64_t k = 0; k < p.value.size(); ++k) {
            const double g = static_cast<double>(p.grad[k]);
            const double m = b1 * static_cast<double>(slot.m[k]) + (1.0 - b1) * g;
            const double v = b2 * static_cast<double>(slot.v[k]) + (1.0 - b2) * g * g;
            slot.m[k] = static_cast<S>(m);
            slot.v[k] = static_cast<S>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p.value[k] -= static_cast<S>(cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon));
        }
    }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace eclf
