#include "im2col.hpp"

#include <string>

namespace ssimnet::detail {

ConvGeometry ConvGeometry::compute(std::size_t in_c, std::size_t in_h, std::size_t in_w,
                                   std::size_t kh, std::size_t kw, std::size_t stride,
                                   std::size_t pad) {
    if (in_c == 0 || in_h == 0 || in_w == 0) {
        throw config_error("window geometry: empty input image");
    }
    if (kh == 0 || kw == 0 || stride == 0) {
        throw config_error("window geometry: kernel and stride must be positive");
    }
    const std::size_t padded_h = in_h + 2 * pad;
    const std::size_t padded_w = in_w + 2 * pad;
    if (kh > padded_h || kw > padded_w) {
        throw config_error("window geometry: " + std::to_string(kh) + "x" + std::to_string(kw) +
                           " kernel exceeds padded input " + std::to_string(padded_h) + "x" +
                           std::to_string(padded_w));
    }
    if ((padded_h - kh) % stride != 0 || (padded_w - kw) % stride != 0) {
        throw config_error("window geometry: stride " + std::to_string(stride) +
                           " does not produce an integral output size for input " +
                           std::to_string(in_h) + "x" + std::to_string(in_w) + " (pad " +
                           std::to_string(pad) + ", kernel " + std::to_string(kh) + "x" +
                           std::to_string(kw) + ")");
    }
    ConvGeometry g;
    g.in_c = in_c;
    g.in_h = in_h;
    g.in_w = in_w;
    g.kh = kh;
    g.kw = kw;
    g.stride = stride;
    g.pad = pad;
    g.out_h = (padded_h - kh) / stride + 1;
    g.out_w = (padded_w - kw) / stride + 1;
    return g;
}

void im2col(const double* img, const ConvGeometry& g, double* col) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.in_h);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.in_w);
    double* out = col;
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t top =
                static_cast<std::ptrdiff_t>(oh * g.stride) - static_cast<std::ptrdiff_t>(g.pad);
            const std::ptrdiff_t left =
                static_cast<std::ptrdiff_t>(ow * g.stride) - static_cast<std::ptrdiff_t>(g.pad);
            for (std::size_t c = 0; c < g.in_c; ++c) {
                const double* plane = img + c * g.in_h * g.in_w;
                for (std::size_t i = 0; i < g.kh; ++i) {
                    const std::ptrdiff_t r = top + static_cast<std::ptrdiff_t>(i);
                    if (r < 0 || r >= H) {
                        for (std::size_t j = 0; j < g.kw; ++j) *out++ = 0.0;
                        continue;
                    }
                    const double* row = plane + static_cast<std::size_t>(r) * g.in_w;
                    for (std::size_t j = 0; j < g.kw; ++j) {
                        const std::ptrdiff_t cidx = left + static_cast<std::ptrdiff_t>(j);
                        *out++ = (cidx < 0 || cidx >= W) ? 0.0 : row[static_cast<std::size_t>(cidx)];
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, const ConvGeometry& g, double* img) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.in_h);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.in_w);
    const double* in = col;
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t top =
                static_cast<std::ptrdiff_t>(oh * g.stride) - static_cast<std::ptrdiff_t>(g.pad);
            const std::ptrdiff_t left =
                static_cast<std::ptrdiff_t>(ow * g.stride) - static_cast<std::ptrdiff_t>(g.pad);
            for (std::size_t c = 0; c < g.in_c; ++c) {
                double* plane = img + c * g.in_h * g.in_w;
                for (std::size_t i = 0; i < g.kh; ++i) {
                    const std::ptrdiff_t r = top + static_cast<std::ptrdiff_t>(i);
                    if (r < 0 || r >= H) {
                        in += g.kw;
                        continue;
                    }
                    double* row = plane + static_cast<std::size_t>(r) * g.in_w;
                    for (std::size_t j = 0; j < g.kw; ++j) {
                        const std::ptrdiff_t cidx = left + static_cast<std::ptrdiff_t>(j);
                        if (cidx >= 0 && cidx < W) row[static_cast<std::size_t>(cidx)] += *in;
                        ++in;
                    }
                }
            }
        }
    }
}

}  // namespace ssimnet::detail
