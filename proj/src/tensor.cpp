// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace deepperson {

std::size_t shape_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + Tensor::shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)), data_(shape_count(shape_), 0.0) {}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t({1});
    t.data_[0] = value;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    if (shape_count(shape) != values.size()) {
        throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

static std::size_t flat_index(const std::vector<int>& shape, std::initializer_list<int> idx) {
    if (idx.size() != shape.size()) throw std::out_of_range("index rank mismatch");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (int i : idx) {
        int d = shape[axis];
        if (i < 0 || i >= d) throw std::out_of_range("index out of range");
        flat = flat * static_cast<std::size_t>(d) + static_cast<std::size_t>(i);
        ++axis;
    }
    return flat;
}

double& Tensor::at(std::initializer_list<int> idx) { return data_[flat_index(shape_, idx)]; }
double Tensor::at(std::initializer_list<int> idx) const { return data_[flat_index(shape_, idx)]; }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double value) {
    for (double& v : data_) v = value;
}

void Tensor::add_(const Tensor& other) {
    if (!same_shape(other)) throw std::invalid_argument("add_: shape mismatch " + shape_str() + " vs " + other.shape_str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::add_scaled_(const Tensor& other, double s) {
    if (!same_shape(other)) throw std::invalid_argument("add_scaled_: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

void Tensor::scale_(double s) {
    for (double& v : data_) v *= s;
}

double Tensor::item() const {
    if (data_.size() != 1) throw std::logic_error("item() on tensor of size " + std::to_string(data_.size()));
    return data_[0];
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

std::string Tensor::shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace deepperson
