// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace deepperson {

Tensor init_fan_in(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in > 0 ? fan_in : 1));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

Linear::Linear(int in_dim, int out_dim, std::mt19937_64& rng, bool with_bias) {
    weight = Var(init_fan_in({out_dim, in_dim}, in_dim, rng), true);
    if (with_bias) bias = Var(Tensor::zeros({out_dim}), true);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".weight", weight});
    if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

Conv2dLayer::Conv2dLayer(int cin, int cout, int kernel, int stride, int pad, std::mt19937_64& rng,
                         bool with_bias)
    : stride(stride), pad(pad) {
    weight = Var(init_fan_in({cout, cin, kernel, kernel}, cin * kernel * kernel, rng), true);
    if (with_bias) bias = Var(Tensor::zeros({cout}), true);
}

void Conv2dLayer::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".weight", weight});
    if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

LstmCell::LstmCell(int in_dim, int hidden, std::mt19937_64& rng) : hidden(hidden) {
    w_input = Var(init_fan_in({4 * hidden, in_dim}, in_dim, rng), true);
    w_recur = Var(init_fan_in({4 * hidden, hidden}, hidden, rng), true);
    Tensor b = Tensor::zeros({4 * hidden});
    for (int i = hidden; i < 2 * hidden; ++i) b[static_cast<std::size_t>(i)] = 1.0;  // forget gate
    bias = Var(std::move(b), true);
}

std::pair<Var, Var> LstmCell::step(const Var& x, const Var& h_prev, const Var& c_prev) const {
    Var z = add(add(matvec(w_input, x), matvec(w_recur, h_prev)), bias);
    Var gate_in = sigmoid(slice(z, 0, hidden));
    Var gate_forget = sigmoid(slice(z, hidden, hidden));
    Var cell_cand = tanh_op(slice(z, 2 * hidden, hidden));
    Var gate_out = sigmoid(slice(z, 3 * hidden, hidden));
    Var c = add(mul(gate_forget, c_prev), mul(gate_in, cell_cand));
    Var h = mul(gate_out, tanh_op(c));
    return {h, c};
}

void LstmCell::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w_input", w_input});
    out.push_back({prefix + ".w_recur", w_recur});
    out.push_back({prefix + ".bias", bias});
}

BiLstm::BiLstm(int in_dim, int hidden, int num_layers, std::mt19937_64& rng) : hidden(hidden) {
    int layer_in = in_dim;
    for (int l = 0; l < num_layers; ++l) {
        forward_cells.emplace_back(layer_in, hidden, rng);
        backward_cells.emplace_back(layer_in, hidden, rng);
        layer_in = 2 * hidden;
    }
}

std::vector<Var> BiLstm::forward(const std::vector<Var>& steps) const {
    if (steps.empty()) throw std::invalid_argument("BiLstm: empty sequence");
    std::size_t n = steps.size();
    std::vector<Var> layer_in = steps;
    std::vector<Var> layer_out;
    for (std::size_t l = 0; l < forward_cells.size(); ++l) {
        std::vector<Var> h_fwd(n), h_bwd(n);
        Var h = Var(Tensor::zeros({hidden}));
        Var c = Var(Tensor::zeros({hidden}));
        for (std::size_t t = 0; t < n; ++t) {
            auto [hn, cn] = forward_cells[l].step(layer_in[t], h, c);
            h = hn;
            c = cn;
            h_fwd[t] = h;
        }
        h = Var(Tensor::zeros({hidden}));
        c = Var(Tensor::zeros({hidden}));
        for (std::size_t t = n; t-- > 0;) {
            auto [hn, cn] = backward_cells[l].step(layer_in[t], h, c);
            h = hn;
            c = cn;
            h_bwd[t] = h;
        }
        layer_out.clear();
        layer_out.reserve(n);
        for (std::size_t t = 0; t < n; ++t) layer_out.push_back(concat({h_fwd[t], h_bwd[t]}));
        layer_in = layer_out;
    }
    return layer_in;
}

void BiLstm::collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t l = 0; l < forward_cells.size(); ++l) {
        forward_cells[l].collect(prefix + ".layer" + std::to_string(l) + ".fwd", out);
        backward_cells[l].collect(prefix + ".layer" + std::to_string(l) + ".bwd", out);
    }
}

double global_grad_norm(const ParamList& params) {
    double ssq = 0.0;
    for (const auto& p : params) {
        const Tensor& g = p.var.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ssq += g[i] * g[i];
    }
    return std::sqrt(ssq);
}

void zero_grads(ParamList& params) {
    for (auto& p : params) p.var.zero_grad();
}

}  // namespace deepperson
