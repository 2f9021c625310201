// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace deepperson {

Tensor& Node::ensure_grad() {
    if (grad.empty() && !value.empty()) grad = Tensor::zeros(value.shape());
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

Var Var::wrap(NodePtr n) {
    Var v;
    v.node_ = std::move(n);
    return v;
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_recording_enabled() { return g_grad_enabled; }

Var make_op_node(Tensor value, std::vector<Var> parents,
                 std::function<void(Node&)> backward, const char* op) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    bool needs = false;
    if (g_grad_enabled) {
        for (const Var& p : parents)
            if (p.requires_grad()) { needs = true; break; }
    }
    if (needs) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (const Var& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward);
    }
    return Var::wrap(std::move(n));
}

void backward(const Var& root) {
    if (!root.defined()) throw std::logic_error("backward on undefined Var");
    if (root.value().size() != 1) throw std::logic_error("backward root must be scalar");
    Node* r = root.node().get();
    if (!r->requires_grad) return;

    // Iterative DFS postorder gives reverse-topological execution order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(r, 0);
    visited.insert(r);
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    r->ensure_grad();
    r->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

// --- helpers --------------------------------------------------------------

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_str() +
                                    " vs " + b.value().shape_str());
}

bool parent_needs(const Node& n, size_t i) { return n.parents[i]->requires_grad; }

}  // namespace

// --- elementwise ----------------------------------------------------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a.value();
    out.add_(b.value());
    return make_op_node(std::move(out), {a, b}, [](Node& n) {
        if (parent_needs(n, 0)) n.parents[0]->ensure_grad().add_(n.grad);
        if (parent_needs(n, 1)) n.parents[1]->ensure_grad().add_(n.grad);
    }, "add");
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a.value();
    out.add_scaled_(b.value(), -1.0);
    return make_op_node(std::move(out), {a, b}, [](Node& n) {
        if (parent_needs(n, 0)) n.parents[0]->ensure_grad().add_(n.grad);
        if (parent_needs(n, 1)) n.parents[1]->ensure_grad().add_scaled_(n.grad, -1.0);
    }, "sub");
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    const double* pa = a.value().data();
    const double* pb = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
    return make_op_node(std::move(out), {a, b}, [](Node& n) {
        const Tensor& va = n.parents[0]->value;
        const Tensor& vb = n.parents[1]->value;
        if (parent_needs(n, 0)) {
            Tensor& ga = n.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * vb[i];
        }
        if (parent_needs(n, 1)) {
            Tensor& gb = n.parents[1]->ensure_grad();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * va[i];
        }
    }, "mul");
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    out.scale_(s);
    return make_op_node(std::move(out), {a}, [s](Node& n) {
        if (parent_needs(n, 0)) n.parents[0]->ensure_grad().add_scaled_(n.grad, s);
    }, "scale");
}

Var relu(const Var& a) {
    Tensor out(a.shape());
    const double* p = a.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = p[i] > 0.0 ? p[i] : 0.0;
    return make_op_node(std::move(out), {a}, [](Node& n) {
        if (!parent_needs(n, 0)) return;
        Tensor& g = n.parents[0]->ensure_grad();
        const Tensor& v = n.parents[0]->value;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (v[i] > 0.0) g[i] += n.grad[i];
    }, "relu");
}

Var sigmoid(const Var& a) {
    Tensor out(a.shape());
    const double* p = a.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-p[i]));
    return make_op_node(std::move(out), {a}, [](Node& n) {
        if (!parent_needs(n, 0)) return;
        Tensor& g = n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            double y = n.value[i];
            g[i] += n.grad[i] * y * (1.0 - y);
        }
    }, "sigmoid");
}

Var tanh_op(const Var& a) {
    Tensor out(a.shape());
    const double* p = a.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(p[i]);
    return make_op_node(std::move(out), {a}, [](Node& n) {
        if (!parent_needs(n, 0)) return;
        Tensor& g = n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            double y = n.value[i];
            g[i] += n.grad[i] * (1.0 - y * y);
        }
    }, "tanh");
}

// --- linear algebra -------------------------------------------------------

Var matvec(const Var& w, const Var& x) {
    if (w.value().rank() != 2 || x.value().rank() != 1 || w.value().dim(1) != x.value().dim(0))
        throw std::invalid_argument("matvec: incompatible shapes " + w.value().shape_str() + " * " +
                                    x.value().shape_str());
    int m = w.value().dim(0), k = w.value().dim(1);
    Tensor out({m});
    const double* pw = w.value().data();
    const double* px = x.value().data();
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* row = pw + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) acc += row[j] * px[j];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return make_op_node(std::move(out), {w, x}, [m, k](Node& n) {
        const double* go = n.grad.data();
        const double* pw = n.parents[0]->value.data();
        const double* px = n.parents[1]->value.data();
        if (parent_needs(n, 0)) {
            double* gw = n.parents[0]->ensure_grad().data();
            for (int i = 0; i < m; ++i) {
                double gi = go[i];
                double* row = gw + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) row[j] += gi * px[j];
            }
        }
        if (parent_needs(n, 1)) {
            double* gx = n.parents[1]->ensure_grad().data();
            for (int i = 0; i < m; ++i) {
                double gi = go[i];
                const double* row = pw + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) gx[j] += gi * row[j];
            }
        }
    }, "matvec");
}

Var affine(const Var& w, const Var& x, const Var& b) {
    Var y = matvec(w, x);
    return b.defined() ? add(y, b) : y;
}

// --- shape ops -------------------------------------------------------------

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    int total = 0;
    for (const Var& p : parts) {
        if (p.value().rank() != 1) throw std::invalid_argument("concat: inputs must be vectors");
        total += p.value().dim(0);
    }
    Tensor out({total});
    std::size_t off = 0;
    for (const Var& p : parts) {
        for (std::size_t i = 0; i < p.value().size(); ++i) out[off + i] = p.value()[i];
        off += p.value().size();
    }
    return make_op_node(std::move(out), parts, [](Node& n) {
        std::size_t off = 0;
        for (auto& parent : n.parents) {
            std::size_t len = parent->value.size();
            if (parent->requires_grad) {
                Tensor& g = parent->ensure_grad();
                for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[off + i];
            }
            off += len;
        }
    }, "concat");
}

Var slice(const Var& x, int offset, int length) {
    if (x.value().rank() != 1) throw std::invalid_argument("slice: input must be a vector");
    if (offset < 0 || length < 0 || offset + length > x.value().dim(0))
        throw std::invalid_argument("slice: range out of bounds");
    Tensor out({length});
    for (int i = 0; i < length; ++i) out[static_cast<std::size_t>(i)] = x.value()[static_cast<std::size_t>(offset + i)];
    return make_op_node(std::move(out), {x}, [offset, length](Node& n) {
        if (!parent_needs(n, 0)) return;
        Tensor& g = n.parents[0]->ensure_grad();
        for (int i = 0; i < length; ++i) g[static_cast<std::size_t>(offset + i)] += n.grad[static_cast<std::size_t>(i)];
    }, "slice");
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
    int d = rows[0].value().dim(0);
    for (const Var& r : rows)
        if (r.value().rank() != 1 || r.value().dim(0) != d)
            throw std::invalid_argument("stack_rows: inputs must be equal-length vectors");
    int n_rows = static_cast<int>(rows.size());
    Tensor out({n_rows, d});
    for (int r = 0; r < n_rows; ++r)
        for (int j = 0; j < d; ++j)
            out[static_cast<std::size_t>(r) * d + j] = rows[static_cast<std::size_t>(r)].value()[static_cast<std::size_t>(j)];
    return make_op_node(std::move(out), rows, [d](Node& n) {
        for (std::size_t r = 0; r < n.parents.size(); ++r) {
            if (!n.parents[r]->requires_grad) continue;
            Tensor& g = n.parents[r]->ensure_grad();
            for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j)] += n.grad[r * d + j];
        }
    }, "stack_rows");
}

// --- convolution ------------------------------------------------------------

Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride, int pad) {
    const Tensor& x = input.value();
    const Tensor& w = kernel.value();
    if (x.rank() != 3 || w.rank() != 4)
        throw std::invalid_argument("conv2d: expected input [C,H,W] and kernel [Cout,Cin,kh,kw]");
    int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    int cout = w.dim(0), kcin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (kcin != cin)
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(kcin) +
                                    " input channels, got " + std::to_string(cin));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    int ho = (h + 2 * pad - kh) / stride + 1;
    int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: output would be empty");
    if (bias.defined() && (bias.value().rank() != 1 || bias.value().dim(0) != cout))
        throw std::invalid_argument("conv2d: bias shape mismatch");

    Tensor out({cout, ho, wo});
    {
        const double* px = x.data();
        const double* pw = w.data();
        double* po = out.data();
        for (int oc = 0; oc < cout; ++oc) {
            double b = bias.defined() ? bias.value()[static_cast<std::size_t>(oc)] : 0.0;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) po[(static_cast<std::size_t>(oc) * ho + oy) * wo + ox] = b;
            }
            for (int ic = 0; ic < cin; ++ic) {
                const double* xc = px + static_cast<std::size_t>(ic) * h * wd;
                const double* wc = pw + ((static_cast<std::size_t>(oc) * cin + ic) * kh) * kw;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy0 = oy * stride - pad;
                    double* orow = po + (static_cast<std::size_t>(oc) * ho + oy) * wo;
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
                        const double* wrow = wc + static_cast<std::size_t>(ky) * kw;
                        for (int kx = 0; kx < kw; ++kx) {
                            double wv = wrow[kx];
                            if (wv == 0.0) continue;
                            int ix0 = kx - pad;
                            for (int ox = 0; ox < wo; ++ox) {
                                int ix = ix0 + ox * stride;
                                if (ix < 0 || ix >= wd) continue;
                                orow[ox] += wv * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
    }

    std::vector<Var> parents = {input, kernel};
    if (bias.defined()) parents.push_back(bias);
    bool has_bias = bias.defined();
    return make_op_node(std::move(out), std::move(parents),
                        [cin, h, wd, cout, kh, kw, ho, wo, stride, pad, has_bias](Node& n) {
        const double* go = n.grad.data();
        const Tensor& x = n.parents[0]->value;
        const Tensor& w = n.parents[1]->value;
        bool need_x = n.parents[0]->requires_grad;
        bool need_w = n.parents[1]->requires_grad;
        double* gx = need_x ? n.parents[0]->ensure_grad().data() : nullptr;
        double* gw = need_w ? n.parents[1]->ensure_grad().data() : nullptr;
        if (has_bias && n.parents[2]->requires_grad) {
            double* gb = n.parents[2]->ensure_grad().data();
            for (int oc = 0; oc < cout; ++oc) {
                double acc = 0.0;
                const double* gplane = go + static_cast<std::size_t>(oc) * ho * wo;
                for (int i = 0; i < ho * wo; ++i) acc += gplane[i];
                gb[oc] += acc;
            }
        }
        if (!need_x && !need_w) return;
        for (int oc = 0; oc < cout; ++oc) {
            for (int ic = 0; ic < cin; ++ic) {
                const double* xc = x.data() + static_cast<std::size_t>(ic) * h * wd;
                const double* wc = w.data() + ((static_cast<std::size_t>(oc) * cin + ic) * kh) * kw;
                double* gxc = need_x ? gx + static_cast<std::size_t>(ic) * h * wd : nullptr;
                double* gwc = need_w ? gw + ((static_cast<std::size_t>(oc) * cin + ic) * kh) * kw : nullptr;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy0 = oy * stride - pad;
                    const double* grow = go + (static_cast<std::size_t>(oc) * ho + oy) * wo;
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xc + static_cast<std::size_t>(iy) * wd;
                        double* gxrow = need_x ? gxc + static_cast<std::size_t>(iy) * wd : nullptr;
                        for (int kx = 0; kx < kw; ++kx) {
                            int ix0 = kx - pad;
                            double wv = wc[static_cast<std::size_t>(ky) * kw + kx];
                            double gw_acc = 0.0;
                            for (int ox = 0; ox < wo; ++ox) {
                                int ix = ix0 + ox * stride;
                                if (ix < 0 || ix >= wd) continue;
                                double g = grow[ox];
                                if (need_x) gxrow[ix] += wv * g;
                                if (need_w) gw_acc += xrow[ix] * g;
                            }
                            if (need_w) gwc[static_cast<std::size_t>(ky) * kw + kx] += gw_acc;
                        }
                    }
                }
            }
        }
    }, "conv2d");
}

// --- pooling ----------------------------------------------------------------

Var global_avg_pool(const Var& x) {
    const Tensor& v = x.value();
    if (v.rank() != 3) throw std::invalid_argument("global_avg_pool: expected [C,H,W]");
    int c = v.dim(0), h = v.dim(1), w = v.dim(2);
    double inv = 1.0 / (static_cast<double>(h) * w);
    Tensor out({c});
    for (int ic = 0; ic < c; ++ic) {
        const double* plane = v.data() + static_cast<std::size_t>(ic) * h * w;
        double acc = 0.0;
        for (int i = 0; i < h * w; ++i) acc += plane[i];
        out[static_cast<std::size_t>(ic)] = acc * inv;
    }
    return make_op_node(std::move(out), {x}, [c, h, w, inv](Node& n) {
        if (!parent_needs(n, 0)) return;
        double* g = n.parents[0]->ensure_grad().data();
        for (int ic = 0; ic < c; ++ic) {
            double gi = n.grad[static_cast<std::size_t>(ic)] * inv;
            double* plane = g + static_cast<std::size_t>(ic) * h * w;
            for (int i = 0; i < h * w; ++i) plane[i] += gi;
        }
    }, "global_avg_pool");
}

Var row_avg_pool(const Var& x) {
    const Tensor& v = x.value();
    if (v.rank() != 3) throw std::invalid_argument("row_avg_pool: expected [C,H,W]");
    int c = v.dim(0), h = v.dim(1), w = v.dim(2);
    double inv = 1.0 / w;
    Tensor out({h, c});
    for (int ic = 0; ic < c; ++ic) {
        for (int iy = 0; iy < h; ++iy) {
            const double* row = v.data() + (static_cast<std::size_t>(ic) * h + iy) * w;
            double acc = 0.0;
            for (int ix = 0; ix < w; ++ix) acc += row[ix];
            out[static_cast<std::size_t>(iy) * c + ic] = acc * inv;
        }
    }
    return make_op_node(std::move(out), {x}, [c, h, w, inv](Node& n) {
        if (!parent_needs(n, 0)) return;
        double* g = n.parents[0]->ensure_grad().data();
        for (int ic = 0; ic < c; ++ic) {
            for (int iy = 0; iy < h; ++iy) {
                double gi = n.grad[static_cast<std::size_t>(iy) * c + ic] * inv;
                double* row = g + (static_cast<std::size_t>(ic) * h + iy) * w;
                for (int ix = 0; ix < w; ++ix) row[ix] += gi;
            }
        }
    }, "row_avg_pool");
}

Var select_row(const Var& x, int row) {
    const Tensor& v = x.value();
    if (v.rank() != 2) throw std::invalid_argument("select_row: expected a matrix");
    int rows = v.dim(0), cols = v.dim(1);
    if (row < 0 || row >= rows) throw std::invalid_argument("select_row: row out of range");
    Tensor out({cols});
    for (int j = 0; j < cols; ++j) out[static_cast<std::size_t>(j)] = v[static_cast<std::size_t>(row) * cols + j];
    return make_op_node(std::move(out), {x}, [row, cols](Node& n) {
        if (!parent_needs(n, 0)) return;
        Tensor& g = n.parents[0]->ensure_grad();
        for (int j = 0; j < cols; ++j) g[static_cast<std::size_t>(row) * cols + j] += n.grad[static_cast<std::size_t>(j)];
    }, "select_row");
}

}  // namespace deepperson
