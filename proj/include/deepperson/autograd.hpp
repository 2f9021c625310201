// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deepperson/tensor.hpp"

namespace deepperson {

/// Reverse-mode automatic differentiation over Tensor values. A forward pass
/// builds a DAG of Nodes; backward() walks it in reverse topological order.
/// One graph per training step; graphs are freed when the last Var handle
/// goes out of scope.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first use, same shape as value
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;  // scatters this->grad into parents
    const char* op = "leaf";

    Tensor& ensure_grad();
};

/// Value-semantics handle to a graph node.
class Var {
  public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad() { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void zero_grad();

    const std::vector<int>& shape() const { return node_->value.shape(); }

    NodePtr node() const { return node_; }
    static Var wrap(NodePtr n);

  private:
    NodePtr node_;
};

/// While a NoGradGuard is alive, ops do not record parents or backward
/// closures; forward values are still computed. Used for inference paths.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

bool grad_recording_enabled();

/// Builds an op node. `backward` receives the finished node (with grad set)
/// and must accumulate into each parent's ensure_grad(). Recording is skipped
/// when no parent requires a gradient or a NoGradGuard is active.
Var make_op_node(Tensor value, std::vector<Var> parents,
                 std::function<void(Node&)> backward, const char* op);

/// Runs backward from a scalar root (seed gradient 1).
void backward(const Var& root);

// --- primitive ops -------------------------------------------------------

Var add(const Var& a, const Var& b);           // same shape
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);           // elementwise
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);

Var matvec(const Var& w, const Var& x);        // [m,n] * [n] -> [m]
Var affine(const Var& w, const Var& x, const Var& b);  // w*x + b

Var concat(const std::vector<Var>& parts);     // 1-D concat
Var slice(const Var& x, int offset, int length);  // 1-D slice
Var stack_rows(const std::vector<Var>& rows);  // N vectors [d] -> [N,d]

/// conv2d: input [Cin,H,W], kernel [Cout,Cin,kh,kw], optional bias [Cout]
/// (pass undefined Var for none), square stride/zero-padding.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride, int pad);

Var global_avg_pool(const Var& x);             // [C,H,W] -> [C], mean over H*W
Var row_avg_pool(const Var& x);                // [C,H,W] -> [H,C], mean over W
Var select_row(const Var& x, int row);         // [H,C] -> [C]

}  // namespace deepperson
