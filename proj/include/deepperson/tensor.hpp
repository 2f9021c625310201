// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace deepperson {

/// Dense row-major fp64 array. Feature maps use [channels, rows, cols],
/// matrices [rows, cols], vectors [n]. Double precision throughout: the
/// oracle and finite-difference tolerances of the test suite need it.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Multi-index access, bounds-checked. Convenience for tests and small code
    /// paths; hot loops index raw data() directly.
    double& at(std::initializer_list<int> idx);
    double at(std::initializer_list<int> idx) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(double value);
    void add_(const Tensor& other);            // elementwise +=
    void add_scaled_(const Tensor& other, double s);  // += s * other
    void scale_(double s);

    double item() const;  // value of a 1-element tensor

    std::string shape_str() const;
    static std::string shape_str(const std::vector<int>& shape);

  private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::size_t shape_count(const std::vector<int>& shape);

}  // namespace deepperson
