// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deepperson {

Tensor feature_energy(const Tensor& feature_map) {
    if (feature_map.rank() != 3)
        throw std::invalid_argument("feature_energy: expected [C,H,W], got " + feature_map.shape_str());
    int c = feature_map.dim(0), h = feature_map.dim(1), w = feature_map.dim(2);
    Tensor out({h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double ssq = 0.0;
            for (int ic = 0; ic < c; ++ic) {
                double v = feature_map[(static_cast<std::size_t>(ic) * h + y) * w + x];
                ssq += v * v;
            }
            out[static_cast<std::size_t>(y) * w + x] = std::sqrt(ssq);
        }
    }
    return out;
}

Tensor minmax_normalize(const Tensor& grid) {
    Tensor out = grid;
    if (grid.size() == 0) return out;
    double lo = grid[0], hi = grid[0];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        lo = std::min(lo, grid[i]);
        hi = std::max(hi, grid[i]);
    }
    double range = hi - lo;
    if (range <= 0.0) {
        out.fill(0.0);
        return out;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (grid[i] - lo) / range;
    return out;
}

HeatmapResult render_heatmap(const DeepPersonNet& net, const RgbImage& image,
                             const AugmentConfig& pre, double alpha) {
    NoGradGuard inference;
    Tensor input = preprocess_eval_image(image, pre);
    ModelOutputs out = net.forward(input);
    HeatmapResult result;
    result.energy = minmax_normalize(feature_energy(out.feature_map.value()));
    result.upsampled = upsample_bilinear_corners(result.energy, pre.out_height, pre.out_width);
    RgbImage base = resize_bilinear(image, pre.out_height, pre.out_width);
    result.overlay = overlay_heat(base, result.upsampled, alpha);
    return result;
}

}  // namespace deepperson
