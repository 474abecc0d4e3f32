#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eclf/nn.hpp"

namespace eclf {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Per-parameter moment state. Slots are indexed in parameter-store order;
/// each slot carries its own update count so disjoint groups can be stepped
/// at different cadences with correct bias correction.
template <typename S>
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerConfig cfg, const ParamStore<S>& store);

    /// Applies one update to every non-frozen parameter whose group is in
    /// `groups` (empty list = all). Throws on non-finite gradients, naming
    /// the offending parameter. Requires exclusive access to the store.
    void step(ParamStore<S>& store, const std::vector<std::string>& groups = {});

    const OptimizerConfig& config() const { return cfg_; }

    struct Slot {
        TensorT<S> m, v;
        std::int64_t steps = 0;
    };
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    OptimizerConfig cfg_;
    std::vector<Slot> slots_;
};

}  // namespace eclf
