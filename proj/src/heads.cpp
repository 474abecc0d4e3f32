#include "eclf/heads.hpp"

#include <cmath>

namespace eclf {

HeadSpec HeadSpec::with_defaults(int input_dim, int classes) {
    HeadSpec s;
    s.input_dim = input_dim;
    s.classes = classes;
    // [input, input/2], floored at [16, 8]: narrower ReLU heads collapse to
    // constants at desk-scale latent widths
    s.hidden = {std::max(16, input_dim), std::max(8, input_dim / 2)};
    return s;
}

void HeadSpec::validate() const {
    require(input_dim >= 1, "head input_dim must be >= 1");
    require(classes >= 2, "head needs at least 2 classes");
    require(hidden.size() == 2, "head has exactly 3 dense layers (2 hidden widths)");
    for (int h : hidden) require(h >= 1, "head hidden widths must be >= 1");
}

Net<real> build_head(ParamStore<real>& store, const std::string& prefix, const HeadSpec& spec,
                     std::uint64_t seed, const std::string& group) {
    spec.validate();
    Net<real> net;
    net.layers.push_back(make_layer<real>(
        store, LayerSpec::dense(prefix + ".fc1", spec.input_dim, spec.hidden[0]), seed, group));
    net.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    net.layers.push_back(make_layer<real>(
        store, LayerSpec::dense(prefix + ".fc2", spec.hidden[0], spec.hidden[1]), seed, group));
    net.layers.push_back(Layer<real>{LayerSpec::relu(), -1, -1});
    net.layers.push_back(make_layer<real>(
        store, LayerSpec::dense(prefix + ".fc3", spec.hidden[1], spec.classes), seed, group));
    return net;
}

double discriminator_loss(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
    return softmax_cross_entropy<real>(logits, labels, dlogits);
}

double adversarial_encoder_loss(const Tensor& logits, Tensor* dlogits) {
    require(logits.ndim() == 2, "adversarial_encoder_loss expects [N x C] logits");
    const int n = logits.dim(0), c = logits.dim(1);
    if (dlogits) *dlogits = Tensor(logits.shape);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const real* lp = logits.ptr() + static_cast<std::int64_t>(i) * c;
        double mx = lp[0];
        for (int k = 1; k < c; ++k) mx = std::max(mx, static_cast<double>(lp[k]));
        double sum = 0.0, mean = 0.0;
        for (int k = 0; k < c; ++k) {
            sum += std::exp(static_cast<double>(lp[k]) - mx);
            mean += static_cast<double>(lp[k]);
        }
        const double lse = mx + std::log(sum);
        mean /= c;
        total += lse - mean;  // cross-entropy from uniform to softmax(logits)
        if (dlogits) {
            real* dp = dlogits->ptr() + static_cast<std::int64_t>(i) * c;
            for (int k = 0; k < c; ++k) {
                const double p = std::exp(static_cast<double>(lp[k]) - lse);
                dp[k] = static_cast<real>((p - 1.0 / c) / n);
            }
        }
    }
    return total / n;
}

double supportive_loss(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
    return softmax_cross_entropy<real>(logits, labels, dlogits);
}

}  // namespace eclf
