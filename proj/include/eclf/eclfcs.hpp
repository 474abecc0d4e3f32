#pragma once

#include <vector>

#include "eclf/vae.hpp"

namespace eclf {

/// Zeroes the CFVS slice belonging to the *other* class; the class's own
/// slice and the NCFV pass through. Idempotent.
std::vector<real> gate(const std::vector<real>& z, int class_id, const LatentLayout& layout);

/// Batch version over [N, D] with per-sample classes.
Tensor gate_batch(const Tensor& z, const std::vector<int>& labels, const LatentLayout& layout);

/// Gradient of gate_batch: the same zeroing applied to upstream gradients.
Tensor gate_batch_backward(const Tensor& dz_gated, const std::vector<int>& labels,
                           const LatentLayout& layout);

/// Concatenation [cfvs1, cfvs2] fed to classifiers in place of CFV.
std::vector<real> merge(const std::vector<real>& cfvs1, const std::vector<real>& cfvs2);

/// Which class-specific slice a classifiable-feature index belongs to:
/// 0 for CFVS1, 1 for CFVS2 (plain layouts always report 0).
int feature_source(const LatentLayout& layout, int classifiable_index);

}  // namespace eclf
