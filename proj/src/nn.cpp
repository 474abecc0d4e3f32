#include "eclf/nn.hpp"

#include <cmath>

namespace eclf {

std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv: return "conv";
        case LayerKind::conv_transpose: return "conv-transpose";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::flatten: return "flatten";
        case LayerKind::reshape: return "reshape";
    }
    return "?";
}

LayerSpec LayerSpec::dense(std::string name, int in, int out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.name = std::move(name);
    s.in_dim = in;
    s.out_dim = out;
    s.validate();
    return s;
}

LayerSpec LayerSpec::conv(std::string name, int in_ch, int out_ch, int k, int stride, int pad) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.name = std::move(name);
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kh = s.kw = k;
    s.stride = stride;
    s.pad = pad;
    s.validate();
    return s;
}

LayerSpec LayerSpec::conv_transpose(std::string name, int in_ch, int out_ch, int k, int stride, int pad,
                                    int out_pad) {
    LayerSpec s;
    s.kind = LayerKind::conv_transpose;
    s.name = std::move(name);
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kh = s.kw = k;
    s.stride = stride;
    s.pad = pad;
    s.out_pad = out_pad;
    s.validate();
    return s;
}

LayerSpec LayerSpec::reshape(std::vector<int> per_sample_dims) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.name = "reshape";
    s.target_shape = std::move(per_sample_dims);
    s.validate();
    return s;
}

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::dense:
            require(in_dim > 0 && out_dim > 0, "dense layer '" + name + "': dimensions must be positive");
            break;
        case LayerKind::conv:
        case LayerKind::conv_transpose:
            require(in_ch > 0 && out_ch > 0 && kh > 0 && kw > 0,
                    "conv layer '" + name + "': channel and kernel sizes must be positive");
            require(stride >= 1, "conv layer '" + name + "': stride must be >= 1");
            require(pad >= 0, "conv layer '" + name + "': padding must be >= 0");
            require(out_pad >= 0 && out_pad < stride,
                    "conv layer '" + name + "': output padding must be in [0, stride)");
            break;
        case LayerKind::reshape:
            require(!target_shape.empty(), "reshape layer needs a target shape");
            for (int d : target_shape) require(d > 0, "reshape target dims must be positive");
            break;
        default:
            break;
    }
}

namespace {

std::string shape_to_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

[[noreturn]] void shape_error(const LayerSpec& spec, const std::string& expected,
                              const std::vector<int>& actual) {
    throw std::runtime_error("layer '" + spec.name + "' (" + layer_kind_name(spec.kind) +
                             "): expected input " + expected + ", got " + shape_to_str(actual));
}

}  // namespace

template <typename S>
std::vector<int> Layer<S>::output_shape(const std::vector<int>& in) const {
    switch (spec.kind) {
        case LayerKind::dense: {
            if (in.size() != 2 || in[1] != spec.in_dim)
                shape_error(spec, "[N x " + std::to_string(spec.in_dim) + "]", in);
            return {in[0], spec.out_dim};
        }
        case LayerKind::conv: {
            if (in.size() != 4 || in[1] != spec.in_ch)
                shape_error(spec, "[N x " + std::to_string(spec.in_ch) + " x H x W]", in);
            const int oh = (in[2] + 2 * spec.pad - spec.kh) / spec.stride + 1;
            const int ow = (in[3] + 2 * spec.pad - spec.kw) / spec.stride + 1;
            require(in[2] + 2 * spec.pad >= spec.kh && in[3] + 2 * spec.pad >= spec.kw && oh > 0 && ow > 0,
                    "layer '" + spec.name + "': kernel larger than padded input");
            return {in[0], spec.out_ch, oh, ow};
        }
        case LayerKind::conv_transpose: {
            if (in.size() != 4 || in[1] != spec.in_ch)
                shape_error(spec, "[N x " + std::to_string(spec.in_ch) + " x H x W]", in);
            const int oh = (in[2] - 1) * spec.stride - 2 * spec.pad + spec.kh + spec.out_pad;
            const int ow = (in[3] - 1) * spec.stride - 2 * spec.pad + spec.kw + spec.out_pad;
            require(oh > 0 && ow > 0, "layer '" + spec.name + "': degenerate transposed-conv output");
            return {in[0], spec.out_ch, oh, ow};
        }
        case LayerKind::relu:
        case LayerKind::sigmoid:
            return in;
        case LayerKind::flatten: {
            require(in.size() >= 2, "flatten expects a batch dimension");
            int f = 1;
            for (std::size_t i = 1; i < in.size(); ++i) f *= in[i];
            return {in[0], f};
        }
        case LayerKind::reshape: {
            require(in.size() >= 2, "reshape expects a batch dimension");
            std::int64_t want = 1;
            for (int d : spec.target_shape) want *= d;
            std::int64_t have = 1;
            for (std::size_t i = 1; i < in.size(); ++i) have *= in[i];
            if (want != have) shape_error(spec, std::to_string(want) + " per-sample elements", in);
            std::vector<int> out{in[0]};
            out.insert(out.end(), spec.target_shape.begin(), spec.target_shape.end());
            return out;
        }
    }
    throw std::runtime_error("unreachable layer kind");
}

template <typename S>
TensorT<S> Layer<S>::forward(const ParamStore<S>& store, const TensorT<S>& x) const {
    check_finite(x, "layer '" + spec.name + "' input");
    const std::vector<int> oshape = output_shape(x.shape);

    switch (spec.kind) {
        case LayerKind::relu: {
            TensorT<S> y = x;
            for (auto& v : y.data) v = v > S(0) ? v : S(0);
            return y;
        }
        case LayerKind::sigmoid: {
            TensorT<S> y = x;
            for (auto& v : y.data) v = S(1) / (S(1) + std::exp(-v));
            return y;
        }
        case LayerKind::flatten:
        case LayerKind::reshape:
            return x.reshaped(oshape);
        case LayerKind::dense: {
            const TensorT<S>& W = store.at(w_id).value;
            const TensorT<S>& b = store.at(b_id).value;
            const int n = x.dim(0), in = spec.in_dim, out = spec.out_dim;
            TensorT<S> y(oshape);
            for (int i = 0; i < n; ++i) {
                const S* xp = x.ptr() + static_cast<std::int64_t>(i) * in;
                S* yp = y.ptr() + static_cast<std::int64_t>(i) * out;
                for (int o = 0; o < out; ++o) yp[o] = b[o];
                for (int k = 0; k < in; ++k) {
                    const S xv = xp[k];
                    if (xv == S(0)) continue;
                    const S* wrow = W.ptr() + k;  // stride over rows
                    for (int o = 0; o < out; ++o) yp[o] += wrow[static_cast<std::int64_t>(o) * in] * xv;
                }
            }
            return y;
        }
        case LayerKind::conv: {
            const TensorT<S>& W = store.at(w_id).value;
            const TensorT<S>& b = store.at(b_id).value;
            const int n = x.dim(0), ic = spec.in_ch, ih = x.dim(2), iw = x.dim(3);
            const int oc = spec.out_ch, oh = oshape[2], ow = oshape[3];
            TensorT<S> y(oshape);
            for (int ni = 0; ni < n; ++ni) {
                for (int o = 0; o < oc; ++o) {
                    S* yp = y.ptr() + ((static_cast<std::int64_t>(ni) * oc + o) * oh) * ow;
                    const S bias = b[o];
                    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) yp[i] = bias;
                    for (int c = 0; c < ic; ++c) {
                        const S* xp = x.ptr() + ((static_cast<std::int64_t>(ni) * ic + c) * ih) * iw;
                        const S* wp = W.ptr() + ((static_cast<std::int64_t>(o) * ic + c) * spec.kh) * spec.kw;
                        for (int ky = 0; ky < spec.kh; ++ky) {
                            for (int kx = 0; kx < spec.kw; ++kx) {
                                const S wv = wp[ky * spec.kw + kx];
                                if (wv == S(0)) continue;
                                for (int oy = 0; oy < oh; ++oy) {
                                    const int iy = oy * spec.stride - spec.pad + ky;
                                    if (iy < 0 || iy >= ih) continue;
                                    S* yrow = yp + static_cast<std::int64_t>(oy) * ow;
                                    const S* xrow = xp + static_cast<std::int64_t>(iy) * iw;
                                    for (int ox = 0; ox < ow; ++ox) {
                                        const int ix = ox * spec.stride - spec.pad + kx;
                                        if (ix < 0 || ix >= iw) continue;
                                        yrow[ox] += wv * xrow[ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            return y;
        }
        case LayerKind::conv_transpose: {
            const TensorT<S>& W = store.at(w_id).value;
            const TensorT<S>& b = store.at(b_id).value;
            const int n = x.dim(0), ic = spec.in_ch, ih = x.dim(2), iw = x.dim(3);
            const int oc = spec.out_ch, oh = oshape[2], ow = oshape[3];
            TensorT<S> y(oshape);
            for (int ni = 0; ni < n; ++ni) {
                for (int o = 0; o < oc; ++o) {
                    S* yp = y.ptr() + ((static_cast<std::int64_t>(ni) * oc + o) * oh) * ow;
                    const S bias = b[o];
                    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) yp[i] = bias;
                }
                for (int c = 0; c < ic; ++c) {
                    const S* xp = x.ptr() + ((static_cast<std::int64_t>(ni) * ic + c) * ih) * iw;
                    for (int o = 0; o < oc; ++o) {
                        S* yp = y.ptr() + ((static_cast<std::int64_t>(ni) * oc + o) * oh) * ow;
                        const S* wp = W.ptr() + ((static_cast<std::int64_t>(c) * oc + o) * spec.kh) * spec.kw;
                        for (int iy = 0; iy < ih; ++iy) {
                            for (int ix = 0; ix < iw; ++ix) {
                                const S xv = xp[iy * iw + ix];
                                if (xv == S(0)) continue;
                                for (int ky = 0; ky < spec.kh; ++ky) {
                                    const int oy = iy * spec.stride - spec.pad + ky;
                                    if (oy < 0 || oy >= oh) continue;
                                    S* yrow = yp + static_cast<std::int64_t>(oy) * ow;
                                    const S* wrow = wp + ky * spec.kw;
                                    for (int kx = 0; kx < spec.kw; ++kx) {
                                        const int ox = ix * spec.stride - spec.pad + kx;
                                        if (ox < 0 || ox >= ow) continue;
                                        yrow[ox] += wrow[kx] * xv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            return y;
        }
    }
    throw std::runtime_error("unreachable layer kind");
}

template <typename S>
TensorT<S> Layer<S>::backward(ParamStore<S>& store, const TensorT<S>& x, const TensorT<S>& up) const {
    const std::vector<int> oshape = output_shape(x.shape);
    require(up.shape == oshape, "layer '" + spec.name + "': upstream gradient shape " + shape_str(up) +
                                    " does not match forward output " + shape_to_str(oshape));

    switch (spec.kind) {
        case LayerKind::relu: {
            TensorT<S> dx = up;
            for (std::int64_t i = 0; i < dx.size(); ++i)
                if (x[i] <= S(0)) dx[i] = S(0);
            return dx;
        }
        case LayerKind::sigmoid: {
            TensorT<S> dx = up;
            for (std::int64_t i = 0; i < dx.size(); ++i) {
                const S y = S(1) / (S(1) + std::exp(-x[i]));
                dx[i] *= y * (S(1) - y);
            }
            return dx;
        }
        case LayerKind::flatten:
        case LayerKind::reshape:
            return up.reshaped(x.shape);
        case LayerKind::dense: {
            const TensorT<S>& W = store.at(w_id).value;
            TensorT<S>& dW = store.at(w_id).grad;
            TensorT<S>& db = store.at(b_id).grad;
            const int n = x.dim(0), in = spec.in_dim, out = spec.out_dim;
            TensorT<S> dx(x.shape);
            for (int i = 0; i < n; ++i) {
                const S* xp = x.ptr() + static_cast<std::int64_t>(i) * in;
                const S* gp = up.ptr() + static_cast<std::int64_t>(i) * out;
                S* dxp = dx.ptr() + static_cast<std::int64_t>(i) * in;
                for (int o = 0; o < out; ++o) {
                    const S g = gp[o];
                    if (g == S(0)) continue;
                    db[o] += g;
                    const S* wrow = W.ptr() + static_cast<std::int64_t>(o) * in;
                    S* dwrow = dW.ptr() + static_cast<std::int64_t>(o) * in;
                    for (int k = 0; k < in; ++k) {
                        dxp[k] += wrow[k] * g;
                        dwrow[k] += xp[k] * g;
                    }
                }
            }
            return dx;
        }
        case LayerKind::conv: {
            const TensorT<S>& W = store.at(w_id).value;
            TensorT<S>& dW = store.at(w_id).grad;
            TensorT<S>& db = store.at(b_id).grad;
            const int n = x.dim(0), ic = spec.in_ch, ih = x.dim(2), iw = x.dim(3);
            const int oc = spec.out_ch, oh = oshape[2], ow = oshape[3];
            TensorT<S> dx(x.shape);
            for (int ni = 0; ni < n; ++ni) {
                for (int o = 0; o < oc; ++o) {
                    const S* gp = up.ptr() + ((static_cast<std::int64_t>(ni) * oc + o) * oh) * ow;
                    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) db[o] += gp[i];
                    for (int c = 0; c < ic; ++c) {
                        const S* xp = x.ptr() + ((static_cast<std::int64_t>(ni) * ic + c) * ih) * iw;
                        S* dxp = dx.ptr() + ((static_cast<std::int64_t>(ni) * ic + c) * ih) * iw;
                        const S* wp = W.ptr() + ((static_cast<std::int64_t>(o) * ic + c) * spec.kh) * spec.kw;
                        S* dwp = dW.ptr() + ((static_cast<std::int64_t>(o) * ic + c) * spec.kh) * spec.kw;
                        for (int ky = 0; ky < spec.kh; ++ky) {
                            for (int kx = 0; kx < spec.kw; ++kx) {
                                const S wv = wp[ky * spec.kw + kx];
                                S wg = S(0);
                                for (int oy = 0; oy < oh; ++oy) {
                                    const int iy = oy * spec.stride - spec.pad + ky;
                                    if (iy < 0 || iy >= ih) continue;
                                    const S* grow = gp + static_cast<std::int64_t>(oy) * ow;
                                    const S* xrow = xp + static_cast<std::int64_t>(iy) * iw;
                                    S* dxrow = dxp + static_cast<std::int64_t>(iy) * iw;
                                    for (int ox = 0; ox < ow; ++ox) {
                                        const int ix = ox * spec.stride - spec.pad + kx;
                                        if (ix < 0 || ix >= iw) continue;
                                        const S g = grow[ox];
                                        dxrow[ix] += wv * g;
                                        wg += xrow[ix] * g;
                                    }
                                }
                                dwp[ky * spec.kw + kx] += wg;
                            }
                        }
                    }
                }
            }
            return dx;
        }
        case LayerKind::conv_transpose: {
            const TensorT<S>& W = store.at(w_id).value;
            TensorT<S>& dW = store.at(w_id).grad;
            TensorT<S>& db = store.at(b_id).grad;
            const int n = x.dim(0), ic = spec.in_ch, ih = x.dim(2), iw = x.dim(3);
            const int oc = spec.out_ch, oh = oshape[2], ow = oshape[3];
            TensorT<S> dx(x.shape);
            for (int ni = 0; ni < n; ++ni) {
                for (int o = 0; o < oc; ++o) {
                    const S* gp = up.ptr() + ((static_cast<std::int64_t>(ni) * oc + o) * oh) * ow;
                    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) db[o] += gp[i];
                }
                for (int c = 0; c < ic; ++c) {
                    const S* xp = x.ptr() + ((static_cast<std::int64_t>(ni) * ic + c) * ih) * iw;
                    S* dxp = dx.ptr() + ((static_cast<std::int64_t>(ni) * ic + c) * ih) * iw;
                    for (int o = 0; o < oc; ++o) {
                        const S* gp = up.ptr() + ((static_cast<std::int64_t>(ni) * oc + o) * oh) * ow;
                        const S* wp = W.ptr() + ((static_cast<std::int64_t>(c) * oc + o) * spec.kh) * spec.kw;
                        S* dwp = dW.ptr() + ((static_cast<std::int64_t>(c) * oc + o) * spec.kh) * spec.kw;
                        for (int iy = 0; iy < ih; ++iy) {
                            for (int ix = 0; ix < iw; ++ix) {
                                const S xv = xp[iy * iw + ix];
                                S acc = S(0);
                                for (int ky = 0; ky < spec.kh; ++ky) {
                                    const int oy = iy * spec.stride - spec.pad + ky;
                                    if (oy < 0 || oy >= oh) continue;
                                    const S* grow = gp + static_cast<std::int64_t>(oy) * ow;
                                    const S* wrow = wp + ky * spec.kw;
                                    S* dwrow = dwp + ky * spec.kw;
                                    for (int kx = 0; kx < spec.kw; ++kx) {
                                        const int ox = ix * spec.stride - spec.pad + kx;
                                        if (ox < 0 || ox >= ow) continue;
                                        acc += wrow[kx] * grow[ox];
                                        dwrow[kx] += xv * grow[ox];
                                    }
                                }
                                dxp[iy * iw + ix] += acc;
                            }
                        }
                    }
                }
            }
            return dx;
        }
    }
    throw std::runtime_error("unreachable layer kind");
}

template <typename S>
Layer<S> make_layer(ParamStore<S>& store, const LayerSpec& spec, std::uint64_t seed,
                    const std::string& group, int tie_w_id) {
    spec.validate();
    Layer<S> layer;
    layer.spec = spec;
    if (!spec.has_params()) return layer;

    std::vector<int> wshape, bshape;
    int fan_in = 0, fan_out = 0;
    if (spec.kind == LayerKind::dense) {
        wshape = {spec.out_dim, spec.in_dim};
        bshape = {spec.out_dim};
        fan_in = spec.in_dim;
        fan_out = spec.out_dim;
    } else if (spec.kind == LayerKind::conv) {
        wshape = {spec.out_ch, spec.in_ch, spec.kh, spec.kw};
        bshape = {spec.out_ch};
        fan_in = spec.in_ch * spec.kh * spec.kw;
        fan_out = spec.out_ch * spec.kh * spec.kw;
    } else {
        wshape = {spec.in_ch, spec.out_ch, spec.kh, spec.kw};
        bshape = {spec.out_ch};
        fan_in = spec.in_ch * spec.kh * spec.kw;
        fan_out = spec.out_ch * spec.kh * spec.kw;
    }

    if (tie_w_id >= 0) {
        require(store.at(tie_w_id).value.shape == wshape,
                "tied kernel shape mismatch for layer '" + spec.name + "'");
        layer.w_id = tie_w_id;
    } else {
        layer.w_id = store.add(spec.name + ".w", wshape, group);
        // He-uniform: suits the ReLU stacks this substrate is built for.
        std::uint64_t s = seed;
        for (char ch : spec.name) s = s * 1099511628211ULL + static_cast<unsigned char>(ch);
        Rng rng(derive_seed(s, 0x1217));
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        auto& w = store.at(layer.w_id).value;
        for (auto& v : w.data) v = static_cast<S>(rng.uniform(-bound, bound));
    }
    layer.b_id = store.add(spec.name + ".b", bshape, group);
    return layer;
}

template <typename S>
double softmax_cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels, TensorT<S>* dlogits) {
    require(logits.ndim() == 2, "softmax_cross_entropy expects [N x C] logits");
    const int n = logits.dim(0), c = logits.dim(1);
    require(static_cast<int>(labels.size()) == n, "label count does not match batch size");
    if (dlogits) *dlogits = TensorT<S>(logits.shape);

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        require(y >= 0 && y < c, "label out of range");
        const S* lp = logits.ptr() + static_cast<std::int64_t>(i) * c;
        S mx = lp[0];
        for (int k = 1; k < c; ++k) mx = std::max(mx, lp[k]);
        double sum = 0.0;
        for (int k = 0; k < c; ++k) sum += std::exp(static_cast<double>(lp[k] - mx));
        const double lse = static_cast<double>(mx) + std::log(sum);
        total += lse - static_cast<double>(lp[y]);
        if (dlogits) {
            S* dp = dlogits->ptr() + static_cast<std::int64_t>(i) * c;
            for (int k = 0; k < c; ++k) {
                const double p = std::exp(static_cast<double>(lp[k]) - lse);
                dp[k] = static_cast<S>((p - (k == y ? 1.0 : 0.0)) / n);
            }
        }
    }
    return total / n;
}

template <typename S>
TensorT<S> softmax(const TensorT<S>& logits) {
    require(logits.ndim() == 2, "softmax expects [N x C] logits");
    const int n = logits.dim(0), c = logits.dim(1);
    TensorT<S> out(logits.shape);
    for (int i = 0; i < n; ++i) {
        const S* lp = logits.ptr() + static_cast<std::int64_t>(i) * c;
        S* op = out.ptr() + static_cast<std::int64_t>(i) * c;
        S mx = lp[0];
        for (int k = 1; k < c; ++k) mx = std::max(mx, lp[k]);
        double sum = 0.0;
        for (int k = 0; k < c; ++k) sum += std::exp(static_cast<double>(lp[k] - mx));
        for (int k = 0; k < c; ++k)
            op[k] = static_cast<S>(std::exp(static_cast<double>(lp[k] - mx)) / sum);
    }
    return out;
}

template <typename S>
double sum_squared_error_mean(const TensorT<S>& pred, const TensorT<S>& target, TensorT<S>* dpred) {
    require(pred.shape == target.shape, "sum_squared_error_mean: shape mismatch " + shape_str(pred) +
                                            " vs " + shape_str(target));
    require(pred.ndim() >= 1, "sum_squared_error_mean expects a batch dimension");
    const int n = pred.dim(0);
    if (dpred) *dpred = TensorT<S>(pred.shape);
    double total = 0.0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        total += d * d;
        if (dpred) (*dpred)[i] = static_cast<S>(2.0 * d / n);
    }
    return total / n;
}

// explicit instantiations: fp32 pipeline, fp64 oracle path
template struct Layer<float>;
template struct Layer<double>;
template Layer<float> make_layer<float>(ParamStore<float>&, const LayerSpec&, std::uint64_t,
                                        const std::string&, int);
template Layer<double> make_layer<double>(ParamStore<double>&, const LayerSpec&, std::uint64_t,
                                          const std::string&, int);
template double softmax_cross_entropy<float>(const TensorT<float>&, const std::vector<int>&,
                                             TensorT<float>*);
template double softmax_cross_entropy<double>(const TensorT<double>&, const std::vector<int>&,
                                              TensorT<double>*);
template TensorT<float> softmax<float>(const TensorT<float>&);
template TensorT<double> softmax<double>(const TensorT<double>&);
template double sum_squared_error_mean<float>(const TensorT<float>&, const TensorT<float>&,
                                              TensorT<float>*);
template double sum_squared_error_mean<double>(const TensorT<double>&, const TensorT<double>&,
                                               TensorT<double>*);

}  // namespace eclf
