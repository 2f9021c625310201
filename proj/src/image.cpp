// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "deepperson/errors.hpp"

namespace deepperson {

namespace {

cv::Mat to_mat(const RgbImage& img) {
    cv::Mat m(img.height, img.width, CV_32FC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = m.ptr<cv::Vec3f>(y);
        for (int x = 0; x < img.width; ++x) {
            row[x] = cv::Vec3f(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
        }
    }
    return m;
}

RgbImage from_mat(const cv::Mat& m) {
    RgbImage img;
    img.height = m.rows;
    img.width = m.cols;
    img.pixels.resize(static_cast<std::size_t>(m.rows) * m.cols * 3);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3f>(y);
        for (int x = 0; x < m.cols; ++x) {
            img.at(y, x, 0) = row[x][0];
            img.at(y, x, 1) = row[x][1];
            img.at(y, x, 2) = row[x][2];
        }
    }
    return img;
}

}  // namespace

RgbImage RgbImage::filled(int height, int width, float r, float g, float b) {
    RgbImage img;
    img.height = height;
    img.width = width;
    img.pixels.resize(static_cast<std::size_t>(height) * width * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    return img;
}

RgbImage load_image(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw DataError("cannot decode image: " + path);
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    cv::Mat f;
    rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
    return from_mat(f);
}

void save_image(const std::string& path, const RgbImage& img) {
    cv::Mat f = to_mat(img);
    cv::Mat u8;
    f.convertTo(u8, CV_8UC3, 255.0);
    cv::Mat bgr;
    cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr)) throw DataError("cannot write image: " + path);
}

RgbImage resize_bilinear(const RgbImage& img, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1) throw std::invalid_argument("resize: bad target size");
    if (img.height == out_height && img.width == out_width) return img;
    cv::Mat src = to_mat(img), dst;
    cv::resize(src, dst, cv::Size(out_width, out_height), 0, 0, cv::INTER_LINEAR);
    return from_mat(dst);
}

RgbImage crop(const RgbImage& img, int top, int left, int height, int width) {
    if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > img.height ||
        left + width > img.width)
        throw std::invalid_argument("crop: window outside image bounds");
    RgbImage out;
    out.height = height;
    out.width = width;
    out.pixels.resize(static_cast<std::size_t>(height) * width * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
    return out;
}

RgbImage hflip(const RgbImage& img) {
    RgbImage out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

RgbImage gaussian_blur(const RgbImage& img, double sigma) {
    if (sigma <= 0.0) return img;
    cv::Mat src = to_mat(img), dst;
    cv::GaussianBlur(src, dst, cv::Size(0, 0), sigma, sigma, cv::BORDER_REPLICATE);
    return from_mat(dst);
}

Tensor normalize_to_tensor(const RgbImage& img, const PixelNorm& norm) {
    Tensor t({3, img.height, img.width});
    for (int c = 0; c < 3; ++c) {
        double mean = norm.mean[static_cast<std::size_t>(c)];
        double inv_std = 1.0 / norm.stddev[static_cast<std::size_t>(c)];
        double* plane = t.data() + static_cast<std::size_t>(c) * img.height * img.width;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                plane[static_cast<std::size_t>(y) * img.width + x] =
                    (static_cast<double>(img.at(y, x, c)) - mean) * inv_std;
    }
    return t;
}

RgbImage denormalize(const Tensor& chw, const PixelNorm& norm) {
    if (chw.rank() != 3 || chw.dim(0) != 3)
        throw std::invalid_argument("denormalize: expected [3,H,W], got " + chw.shape_str());
    int h = chw.dim(1), w = chw.dim(2);
    RgbImage img;
    img.height = h;
    img.width = w;
    img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (int c = 0; c < 3; ++c) {
        double mean = norm.mean[static_cast<std::size_t>(c)];
        double sd = norm.stddev[static_cast<std::size_t>(c)];
        const double* plane = chw.data() + static_cast<std::size_t>(c) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(y, x, c) =
                    static_cast<float>(plane[static_cast<std::size_t>(y) * w + x] * sd + mean);
    }
    return img;
}

Tensor upsample_bilinear_corners(const Tensor& grid, int out_height, int out_width) {
    if (grid.rank() != 2) throw std::invalid_argument("upsample: expected a 2-D grid");
    if (out_height < 1 || out_width < 1) throw std::invalid_argument("upsample: bad target size");
    int h = grid.dim(0), w = grid.dim(1);
    Tensor out({out_height, out_width});
    double sy = out_height > 1 ? static_cast<double>(h - 1) / (out_height - 1) : 0.0;
    double sx = out_width > 1 ? static_cast<double>(w - 1) / (out_width - 1) : 0.0;
    for (int y = 0; y < out_height; ++y) {
        double fy = y * sy;
        int y0 = std::min(static_cast<int>(fy), h - 1);
        int y1 = std::min(y0 + 1, h - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            double fx = x * sx;
            int x0 = std::min(static_cast<int>(fx), w - 1);
            int x1 = std::min(x0 + 1, w - 1);
            double wx = fx - x0;
            double v00 = grid[static_cast<std::size_t>(y0) * w + x0];
            double v01 = grid[static_cast<std::size_t>(y0) * w + x1];
            double v10 = grid[static_cast<std::size_t>(y1) * w + x0];
            double v11 = grid[static_cast<std::size_t>(y1) * w + x1];
            out[static_cast<std::size_t>(y) * out_width + x] =
                (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        }
    }
    return out;
}

namespace {

// Blue -> cyan -> green -> yellow -> red ramp.
void heat_color(double v, float& r, float& g, float& b) {
    v = std::clamp(v, 0.0, 1.0);
    double r4 = std::clamp(1.5 - std::fabs(4.0 * v - 3.0), 0.0, 1.0);
    double g4 = std::clamp(1.5 - std::fabs(4.0 * v - 2.0), 0.0, 1.0);
    double b4 = std::clamp(1.5 - std::fabs(4.0 * v - 1.0), 0.0, 1.0);
    r = static_cast<float>(r4);
    g = static_cast<float>(g4);
    b = static_cast<float>(b4);
}

}  // namespace

RgbImage overlay_heat(const RgbImage& base, const Tensor& energy, double alpha) {
    if (energy.rank() != 2 || energy.dim(0) != base.height || energy.dim(1) != base.width)
        throw std::invalid_argument("overlay_heat: energy grid must match the image size");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("overlay_heat: alpha in [0,1]");
    RgbImage out = base;
    for (int y = 0; y < base.height; ++y) {
        for (int x = 0; x < base.width; ++x) {
            float r, g, b;
            heat_color(energy[static_cast<std::size_t>(y) * base.width + x], r, g, b);
            out.at(y, x, 0) = static_cast<float>((1 - alpha) * base.at(y, x, 0) + alpha * r);
            out.at(y, x, 1) = static_cast<float>((1 - alpha) * base.at(y, x, 1) + alpha * g);
            out.at(y, x, 2) = static_cast<float>((1 - alpha) * base.at(y, x, 2) + alpha * b);
        }
    }
    return out;
}

}  // namespace deepperson
