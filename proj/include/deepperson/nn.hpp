// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "deepperson/autograd.hpp"

namespace deepperson {

/// Named trainable parameter list; names address tensors in checkpoints.
struct NamedParam {
    std::string name;
    Var var;
};
using ParamList = std::vector<NamedParam>;

/// Fan-in-scaled uniform init (bound sqrt(6/fan_in), halved slope variant for
/// layers followed by a rectifier is not distinguished here; one scheme for
/// every weight keeps init reproducible and is plenty at desk scale).
Tensor init_fan_in(std::vector<int> shape, int fan_in, std::mt19937_64& rng);

struct Linear {
    Var weight;  // [out, in]
    Var bias;    // [out], undefined when bias-free

    Linear() = default;
    Linear(int in_dim, int out_dim, std::mt19937_64& rng, bool with_bias = true);

    Var forward(const Var& x) const { return affine(weight, x, bias); }
    void collect(const std::string& prefix, ParamList& out) const;
    int out_dim() const { return weight.value().dim(0); }
};

struct Conv2dLayer {
    Var weight;  // [cout, cin, k, k]
    Var bias;    // [cout]
    int stride = 1;
    int pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int cin, int cout, int kernel, int stride, int pad, std::mt19937_64& rng,
                bool with_bias = true);

    Var forward(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
    void collect(const std::string& prefix, ParamList& out) const;
};

/// One recurrent cell: gates stacked [input; forget; cell; output], each of
/// width `hidden`. Forget-gate bias starts at 1.
struct LstmCell {
    Var w_input;  // [4*hidden, in_dim]
    Var w_recur;  // [4*hidden, hidden]
    Var bias;     // [4*hidden]
    int hidden = 0;

    LstmCell() = default;
    LstmCell(int in_dim, int hidden, std::mt19937_64& rng);

    /// One step of the standard recurrence; returns (h_t, c_t).
    std::pair<Var, Var> step(const Var& x, const Var& h_prev, const Var& c_prev) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

/// Stacked bidirectional LSTM. Layer l>0 consumes the concatenated
/// forward/backward hidden states of layer l-1 (width 2*hidden).
struct BiLstm {
    std::vector<LstmCell> forward_cells;   // one per layer
    std::vector<LstmCell> backward_cells;  // one per layer
    int hidden = 0;

    BiLstm() = default;
    BiLstm(int in_dim, int hidden, int num_layers, std::mt19937_64& rng);

    /// steps: sequence of [in_dim] vectors; returns per-step [2*hidden] vectors.
    std::vector<Var> forward(const std::vector<Var>& steps) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

double global_grad_norm(const ParamList& params);
void zero_grads(ParamList& params);

}  // namespace deepperson
