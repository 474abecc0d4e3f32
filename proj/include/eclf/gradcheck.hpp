#pragma once

#include <functional>

#include "eclf/nn.hpp"
#include "eclf/rng.hpp"

namespace eclf {

/// A differentiable scalar target over a parameter store.
///   loss           — pure evaluation at the current parameter values
///   backward       — zeroes grads, re-evaluates, and fills store gradients
///   kink_signature — optional hash of every ReLU mask in the graph; probes
///                    whose +/-eps evaluations change a mask straddle a kink
///                    and are skipped (the FD oracle is invalid there)
template <typename S>
struct GradCheckTarget {
    std::function<double()> loss;
    std::function<void()> backward;
    std::function<std::uint64_t()> kink_signature;
};

/// Central finite differences on `probes` randomly chosen scalar parameters
/// (non-frozen). Returns the max over probes of
///   |analytic - fd| / max(|analytic|, |fd|, 1e-8).
/// Throws if the loss evaluates non-finite.
template <typename S>
double grad_check(ParamStore<S>& store, const GradCheckTarget<S>& target, int probes, double eps,
                  Rng& rng);

}  // namespace eclf
