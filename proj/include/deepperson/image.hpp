// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "deepperson/tensor.hpp"

namespace deepperson {

/// Interleaved RGB, float in [0,1]. All pixel work goes through this type;
/// the OpenCV dependency stays inside image.cpp.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // height*width*3, row-major, RGB

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    static RgbImage filled(int height, int width, float r, float g, float b);
};

/// Per-channel normalization constants applied at the model boundary.
struct PixelNorm {
    std::array<double, 3> mean{0.5, 0.5, 0.5};
    std::array<double, 3> stddev{0.5, 0.5, 0.5};
};

RgbImage load_image(const std::string& path);  // DataError on failure
void save_image(const std::string& path, const RgbImage& img);  // format from extension

RgbImage resize_bilinear(const RgbImage& img, int out_height, int out_width);
RgbImage crop(const RgbImage& img, int top, int left, int height, int width);
RgbImage hflip(const RgbImage& img);
RgbImage gaussian_blur(const RgbImage& img, double sigma);

/// (pixel - mean) / stddev into a [3,H,W] tensor, and its exact inverse.
Tensor normalize_to_tensor(const RgbImage& img, const PixelNorm& norm);
RgbImage denormalize(const Tensor& chw, const PixelNorm& norm);

/// Align-corners bilinear interpolation of a [h,w] grid; grid corners map
/// exactly onto output corners.
Tensor upsample_bilinear_corners(const Tensor& grid, int out_height, int out_width);

/// Blends a color-mapped energy grid (values in [0,1]) over a base image.
RgbImage overlay_heat(const RgbImage& base, const Tensor& energy, double alpha);

}  // namespace deepperson
