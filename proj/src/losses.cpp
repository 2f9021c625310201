// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "deepperson/errors.hpp"

namespace deepperson {

namespace {

// Keeps the distance gradient finite when two embeddings coincide (the
// batch-hard hinge hits D=0 routinely in early training).
constexpr double kDistanceEps = 1e-12;

void validate_pk_structure(const std::vector<int>& labels) {
    std::map<int, int> counts;
    for (int l : labels) counts[l]++;
    if (counts.size() < 2)
        throw std::invalid_argument("triplet_batch_hard: batch holds a single identity (" +
                                    (counts.empty() ? std::string("empty batch")
                                                    : std::to_string(counts.begin()->first)) +
                                    "); a negative sample is required");
    for (const auto& [id, n] : counts)
        if (n < 2)
            throw std::invalid_argument("triplet_batch_hard: identity " + std::to_string(id) +
                                        " has a single sample; an anchor needs a positive");
}

}  // namespace

Var triplet_batch_hard(const Var& embeddings, const std::vector<int>& labels,
                       const TripletConfig& cfg) {
    const Tensor& e = embeddings.value();
    if (e.rank() != 2) throw std::invalid_argument("triplet_batch_hard: embeddings must be [N,d]");
    int n = e.dim(0), d = e.dim(1);
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("triplet_batch_hard: " + std::to_string(n) + " embeddings vs " +
                                    std::to_string(labels.size()) + " labels");
    if (cfg.margin < 0.0) throw std::invalid_argument("triplet_batch_hard: margin must be >= 0");
    validate_pk_structure(labels);

    // Pairwise distances with the epsilon inside the root.
    std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* ei = e.data() + static_cast<std::size_t>(i) * d;
        for (int j = i + 1; j < n; ++j) {
            const double* ej = e.data() + static_cast<std::size_t>(j) * d;
            double ssq = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = ei[k] - ej[k];
                ssq += diff * diff;
            }
            double dv = std::sqrt(ssq + kDistanceEps);
            dist[static_cast<std::size_t>(i) * n + j] = dv;
            dist[static_cast<std::size_t>(j) * n + i] = dv;
        }
    }

    std::vector<int> hardest_pos(static_cast<std::size_t>(n), -1);
    std::vector<int> hardest_neg(static_cast<std::size_t>(n), -1);
    std::vector<char> active(static_cast<std::size_t>(n), 0);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double max_pos = -1.0, min_neg = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double dv = dist[static_cast<std::size_t>(i) * n + j];
            if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
                if (dv > max_pos) { max_pos = dv; hardest_pos[static_cast<std::size_t>(i)] = j; }
            } else {
                if (dv < min_neg) { min_neg = dv; hardest_neg[static_cast<std::size_t>(i)] = j; }
            }
        }
        double hinge = cfg.margin + max_pos - min_neg;
        if (hinge > 0.0) {
            total += hinge;
            active[static_cast<std::size_t>(i)] = 1;
        }
    }
    double loss = total / n;

    return make_op_node(Tensor::scalar(loss), {embeddings},
                        [n, d, dist = std::move(dist), hardest_pos = std::move(hardest_pos),
                         hardest_neg = std::move(hardest_neg), active = std::move(active)](Node& node) {
        if (!node.parents[0]->requires_grad) return;
        double g = node.grad[0] / n;
        const Tensor& e = node.parents[0]->value;
        Tensor& ge = node.parents[0]->ensure_grad();
        auto push_pair = [&](int a, int b, double sign) {
            // d/da ||a-b|| = (a-b)/D; b receives the negative.
            double dv = dist[static_cast<std::size_t>(a) * n + b];
            const double* pa = e.data() + static_cast<std::size_t>(a) * d;
            const double* pb = e.data() + static_cast<std::size_t>(b) * d;
            double* ga = ge.data() + static_cast<std::size_t>(a) * d;
            double* gb = ge.data() + static_cast<std::size_t>(b) * d;
            double c = sign * g / dv;
            for (int k = 0; k < d; ++k) {
                double diff = (pa[k] - pb[k]) * c;
                ga[k] += diff;
                gb[k] -= diff;
            }
        };
        for (int i = 0; i < n; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            push_pair(i, hardest_pos[static_cast<std::size_t>(i)], +1.0);
            push_pair(i, hardest_neg[static_cast<std::size_t>(i)], -1.0);
        }
    }, "triplet_batch_hard");
}

Var identification_loss(const Var& logits, const std::vector<int>& labels) {
    const Tensor& z = logits.value();
    if (z.rank() != 2) throw std::invalid_argument("identification_loss: logits must be [N,num_classes]");
    int n = z.dim(0), nc = z.dim(1);
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("identification_loss: " + std::to_string(n) + " rows vs " +
                                    std::to_string(labels.size()) + " labels");
    for (int l : labels)
        if (l < 0 || l >= nc)
            throw std::invalid_argument("identification_loss: label " + std::to_string(l) +
                                        " outside [0," + std::to_string(nc) + ")");

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = z.data() + static_cast<std::size_t>(i) * nc;
        double zmax = *std::max_element(row, row + nc);
        double sum = 0.0;
        for (int j = 0; j < nc; ++j) sum += std::exp(row[j] - zmax);
        double lse = zmax + std::log(sum);
        total += lse - row[labels[static_cast<std::size_t>(i)]];
    }
    double loss = total / n;

    return make_op_node(Tensor::scalar(loss), {logits}, [n, nc, labels](Node& node) {
        if (!node.parents[0]->requires_grad) return;
        double g = node.grad[0] / n;
        const Tensor& z = node.parents[0]->value;
        Tensor& gz = node.parents[0]->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const double* row = z.data() + static_cast<std::size_t>(i) * nc;
            double* grow = gz.data() + static_cast<std::size_t>(i) * nc;
            double zmax = *std::max_element(row, row + nc);
            double sum = 0.0;
            for (int j = 0; j < nc; ++j) sum += std::exp(row[j] - zmax);
            for (int j = 0; j < nc; ++j) grow[j] += g * std::exp(row[j] - zmax) / sum;
            grow[labels[static_cast<std::size_t>(i)]] -= g;
        }
    }, "identification_loss");
}

Var combined_loss(const std::optional<Var>& ranking, const std::optional<Var>& part_cls,
                  const std::optional<Var>& global_cls, const LossWeights& w) {
    if (w.ranking < 0.0 || w.part_cls < 0.0 || w.global_cls < 0.0)
        throw std::invalid_argument("combined_loss: weights must be >= 0");
    auto check = [](const std::optional<Var>& t, const char* name) {
        if (t && !std::isfinite(t->value().item()))
            throw NumericError(std::string("combined_loss: ") + name + " term is not finite");
    };
    check(ranking, "ranking");
    check(part_cls, "part identification");
    check(global_cls, "global identification");

    Var total = Var(Tensor::scalar(0.0));
    if (ranking) total = add(total, scale(*ranking, w.ranking));
    if (part_cls) total = add(total, scale(*part_cls, w.part_cls));
    if (global_cls) total = add(total, scale(*global_cls, w.global_cls));
    return total;
}

}  // namespace deepperson
