#pragma once

// Internal patch-matrix helpers shared by the windowed layers. Not
// installed; the public surface is the layers themselves.

#include <cstddef>

#include "ssimnet/error.hpp"

namespace ssimnet::detail {

struct ConvGeometry {
    std::size_t in_c = 0, in_h = 0, in_w = 0;
    std::size_t kh = 0, kw = 0;
    std::size_t stride = 1, pad = 0;
    std::size_t out_h = 0, out_w = 0;

    std::size_t patch_len() const { return in_c * kh * kw; }
    std::size_t positions() const { return out_h * out_w; }

    // Throws config_error when the window over-runs the padded input or
    // the stride does not divide the span (output size must be exact).
    static ConvGeometry compute(std::size_t in_c, std::size_t in_h, std::size_t in_w,
                                std::size_t kh, std::size_t kw, std::size_t stride,
                                std::size_t pad);
};

// Writes the (positions, patch_len) row-major patch matrix for one image
// (C,H,W); out-of-image taps under the zero padding contribute 0. Patch
// elements are channel-major, matching filter storage.
void im2col(const double* img, const ConvGeometry& g, double* col);

// Transpose scatter: accumulates a (positions, patch_len) gradient
// matrix back onto the (C,H,W) image gradient. Padding taps are dropped.
void col2im_add(const double* col, const ConvGeometry& g, double* img);

}  // namespace ssimnet::detail
