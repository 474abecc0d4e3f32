#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eclf/tensor.hpp"

namespace eclf {

/// RGB raster, row-major, values in [0, 1].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<real> px;  // h * w * 3

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_ * 3, real(0)) {}

    real& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    real at(int y, int x, int c) const { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }

    /// To a [3, h, w] tensor (channel-first, the layer convention).
    Tensor to_tensor() const;
    static Image from_tensor(const Tensor& t);  // accepts [3,h,w] or [1,3,h,w]
};

/// 8-bit PNG encode (color type 2, filter 0). Values are clamped to [0,1]
/// and quantized with round-half-up.
void write_png(const std::string& path, const Image& img);

/// Decodes 8-bit gray / RGB / RGBA PNGs (non-interlaced). Gray replicates
/// into RGB; alpha is dropped.
Image read_png(const std::string& path);

/// Bilinear resample to the target size.
Image resize_bilinear(const Image& src, int out_h, int out_w);

/// Horizontal concatenation with a 2px mid-gray separator between frames.
Image hstack_frames(const std::vector<Image>& frames);

}  // namespace eclf
