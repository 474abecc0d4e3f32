#include "eclf/eclfcs.hpp"

namespace eclf {

namespace {

Range inactive_slice(const LatentLayout& layout, int class_id) {
    require(layout.is_class_specific(), "gate requires a class-specific layout");
    require(class_id == 0 || class_id == 1, "gate: unknown class " + std::to_string(class_id) +
                                                " (class-specific mode is two-class)");
    return class_id == 0 ? *layout.cfvs2 : *layout.cfvs1;
}

}  // namespace

std::vector<real> gate(const std::vector<real>& z, int class_id, const LatentLayout& layout) {
    require(static_cast<int>(z.size()) == layout.total_dim, "gate: latent length mismatch");
    const Range off = inactive_slice(layout, class_id);
    std::vector<real> out = z;
    for (int i = off.begin; i < off.end; ++i) out[static_cast<std::size_t>(i)] = real(0);
    return out;
}

Tensor gate_batch(const Tensor& z, const std::vector<int>& labels, const LatentLayout& layout) {
    require(z.ndim() == 2 && z.dim(1) == layout.total_dim, "gate_batch: bad latent shape");
    require(static_cast<int>(labels.size()) == z.dim(0), "gate_batch: label count mismatch");
    Tensor out = z;
    const int d = layout.total_dim;
    for (int i = 0; i < z.dim(0); ++i) {
        const Range off = inactive_slice(layout, labels[static_cast<std::size_t>(i)]);
        for (int k = off.begin; k < off.end; ++k) out[static_cast<std::int64_t>(i) * d + k] = real(0);
    }
    return out;
}

Tensor gate_batch_backward(const Tensor& dz_gated, const std::vector<int>& labels,
                           const LatentLayout& layout) {
    return gate_batch(dz_gated, labels, layout);
}

std::vector<real> merge(const std::vector<real>& cfvs1, const std::vector<real>& cfvs2) {
    std::vector<real> out = cfvs1;
    out.insert(out.end(), cfvs2.begin(), cfvs2.end());
    return out;
}

int feature_source(const LatentLayout& layout, int classifiable_index) {
    if (!layout.is_class_specific()) return 0;
    require(classifiable_index >= 0 && classifiable_index < layout.classifiable_dim(),
            "feature_source: index out of range");
    return classifiable_index < layout.cfvs1->size() ? 0 : 1;
}

}  // namespace eclf
