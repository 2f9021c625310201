// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "deepperson/data.hpp"
#include "deepperson/image.hpp"
#include "deepperson/model.hpp"

namespace deepperson {

/// Per-position channel L2 norm of a [C,H,W] feature map -> [H,W].
Tensor feature_energy(const Tensor& feature_map);

/// Min-max normalization to [0,1]; a zero-range grid maps to all zeros.
Tensor minmax_normalize(const Tensor& grid);

struct HeatmapResult {
    Tensor energy;     // [H,W], normalized
    Tensor upsampled;  // input-sized, align-corners bilinear
    RgbImage overlay;
};

/// Runs the backbone on an eval-preprocessed image and renders the feature
/// energy as a color overlay.
HeatmapResult render_heatmap(const DeepPersonNet& net, const RgbImage& image,
                             const AugmentConfig& pre, double alpha);

}  // namespace deepperson
