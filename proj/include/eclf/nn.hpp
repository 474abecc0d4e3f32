#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eclf/rng.hpp"
#include "eclf/tensor.hpp"

namespace eclf {

enum class LayerKind { dense, conv, conv_transpose, relu, sigmoid, flatten, reshape };

std::string layer_kind_name(LayerKind k);

/// Declarative layer description. Parameter shapes follow from the fields:
///   dense           W [out_dim, in_dim], b [out_dim]
///   conv            W [out_ch, in_ch, kh, kw], b [out_ch]
///   conv_transpose  W [in_ch, out_ch, kh, kw], b [out_ch]
/// so a transposed conv can share the kernel of the conv it mirrors.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::string name;

    int in_dim = 0, out_dim = 0;                    // dense
    int in_ch = 0, out_ch = 0, kh = 0, kw = 0;      // conv kinds
    int stride = 1, pad = 0, out_pad = 0;           // conv kinds
    std::vector<int> target_shape;                  // reshape (per-sample dims)

    void validate() const;
    bool has_params() const {
        return kind == LayerKind::dense || kind == LayerKind::conv || kind == LayerKind::conv_transpose;
    }

    static LayerSpec dense(std::string name, int in, int out);
    static LayerSpec conv(std::string name, int in_ch, int out_ch, int k, int stride, int pad);
    static LayerSpec conv_transpose(std::string name, int in_ch, int out_ch, int k, int stride, int pad,
                                    int out_pad = 0);
    static LayerSpec relu() { return LayerSpec{LayerKind::relu, "relu", 0, 0, 0, 0, 0, 0, 1, 0, 0, {}}; }
    static LayerSpec sigmoid() { return LayerSpec{LayerKind::sigmoid, "sigmoid", 0, 0, 0, 0, 0, 0, 1, 0, 0, {}}; }
    static LayerSpec flatten() { return LayerSpec{LayerKind::flatten, "flatten", 0, 0, 0, 0, 0, 0, 1, 0, 0, {}}; }
    static LayerSpec reshape(std::vector<int> per_sample_dims);
};

/// Named parameter slots shared by layers, the optimizer, and checkpoints.
/// `group` partitions parameters for selective optimizer steps.
template <typename S>
struct ParamStore {
    struct Param {
        std::string name;
        TensorT<S> value;
        TensorT<S> grad;
        bool frozen = false;
        std::string group;
    };

    std::vector<Param> params;

    int add(const std::string& name, std::vector<int> shape, const std::string& group = "",
            bool frozen = false) {
        for (const auto& p : params) require(p.name != name, "duplicate parameter name: " + name);
        Param p;
        p.name = name;
        p.value = TensorT<S>(shape);
        p.grad = TensorT<S>(std::move(shape));
        p.frozen = frozen;
        p.group = group;
        params.push_back(std::move(p));
        return static_cast<int>(params.size()) - 1;
    }

    Param& at(int id) { return params[static_cast<std::size_t>(id)]; }
    const Param& at(int id) const { return params[static_cast<std::size_t>(id)]; }

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].name == name) return static_cast<int>(i);
        return -1;
    }

    void zero_grads() {
        for (auto& p : params) p.grad.fill(S(0));
    }

    std::int64_t count_scalars() const {
        std::int64_t n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }
};

/// A layer bound to its parameter slots. Forward is pure; backward
/// accumulates parameter gradients into the store and returns the input
/// gradient.
template <typename S>
struct Layer {
    LayerSpec spec;
    int w_id = -1;
    int b_id = -1;

    std::vector<int> output_shape(const std::vector<int>& input_shape) const;

    TensorT<S> forward(const ParamStore<S>& store, const TensorT<S>& input) const;
    TensorT<S> backward(ParamStore<S>& store, const TensorT<S>& input, const TensorT<S>& upstream) const;
};

/// Creates a layer, allocating and initializing parameters (He-uniform
/// weights, zero biases) from a stream derived from `seed` and the layer
/// name. Pass `tie_w_id` to share an existing kernel slot (transposed convs
/// in tied mode); a fresh bias is still allocated.
template <typename S>
Layer<S> make_layer(ParamStore<S>& store, const LayerSpec& spec, std::uint64_t seed,
                    const std::string& group, int tie_w_id = -1);

/// Layer pipeline with an explicit activation tape for backward.
template <typename S>
struct Net {
    std::vector<Layer<S>> layers;

    TensorT<S> forward(const ParamStore<S>& store, TensorT<S> x,
                       std::vector<TensorT<S>>* tape = nullptr) const {
        for (const auto& l : layers) {
            if (tape) tape->push_back(x);
            x = l.forward(store, x);
        }
        return x;
    }

    TensorT<S> backward(ParamStore<S>& store, const std::vector<TensorT<S>>& tape,
                        TensorT<S> upstream) const {
        require(tape.size() == layers.size(), "activation tape does not match layer count");
        for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i)
            upstream = layers[static_cast<std::size_t>(i)].backward(
                store, tape[static_cast<std::size_t>(i)], upstream);
        return upstream;
    }

    /// Hash of every ReLU input sign along a forward pass; changes exactly
    /// when some activation crosses a kink.
    std::uint64_t mask_signature(const ParamStore<S>& store, TensorT<S> x) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& l : layers) {
            if (l.spec.kind == LayerKind::relu)
                for (const auto& v : x.data) h = (h ^ (v > S(0) ? 2u : 1u)) * 1099511628211ULL;
            x = l.forward(store, x);
        }
        return h;
    }
};

/// Softmax cross-entropy over logits [N, C] against integer labels; mean
/// over the batch. Fills dlogits (same shape) when given.
template <typename S>
double softmax_cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels,
                             TensorT<S>* dlogits = nullptr);

/// Row-wise softmax of logits [N, C].
template <typename S>
TensorT<S> softmax(const TensorT<S>& logits);

/// Sum of squared error over all per-sample elements, mean over the leading
/// batch dimension. Fills d(pred) when given.
template <typename S>
double sum_squared_error_mean(const TensorT<S>& pred, const TensorT<S>& target,
                              TensorT<S>* dpred = nullptr);

}  // namespace eclf
