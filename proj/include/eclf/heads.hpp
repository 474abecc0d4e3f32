#pragma once

#include <string>
#include <vector>

#include "eclf/nn.hpp"

namespace eclf {

/// Three fully connected layers with ReLU between; the shape family shared
/// by the adversarial discriminator, the supportive classifier and the
/// final classifier.
struct HeadSpec {
    int input_dim = 0;
    std::vector<int> hidden;  // defaults to {input, input/2}
    int classes = 0;

    static HeadSpec with_defaults(int input_dim, int classes);
    void validate() const;
};

/// Builds the 3-layer head into `store` under `prefix` and `group`.
Net<real> build_head(ParamStore<real>& store, const std::string& prefix, const HeadSpec& spec,
                     std::uint64_t seed, const std::string& group);

/// Softmax cross-entropy against the ground-truth class; trains the
/// discriminator itself.
double discriminator_loss(const Tensor& logits, const std::vector<int>& labels,
                          Tensor* dlogits = nullptr);

/// Cross-entropy from the predicted distribution to the uniform one; the
/// encoder minimizes this, reaching ln(classes) exactly when the
/// discriminator is maximally uncertain.
double adversarial_encoder_loss(const Tensor& logits, Tensor* dlogits = nullptr);

/// Softmax cross-entropy on the CFV head; encourages classifiable structure.
double supportive_loss(const Tensor& logits, const std::vector<int>& labels,
                       Tensor* dlogits = nullptr);

}  // namespace eclf
