// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "deepperson/errors.hpp"
#include "deepperson/losses.hpp"
#include "support/gradcheck.hpp"

using namespace deepperson;
using deepperson::testing::finite_difference_check;
using deepperson::testing::random_tensor;

namespace {

// Exhaustive (anchor, positive, negative) enumeration with per-anchor
// hardest picks; plain unsquared Euclidean distances.
double triplet_brute_force(const Tensor& emb, const std::vector<int>& labels, double margin) {
    int n = emb.dim(0), d = emb.dim(1);
    auto dist = [&](int a, int b) {
        double ssq = 0.0;
        for (int k = 0; k < d; ++k) {
            double diff = emb.at({a, k}) - emb.at({b, k});
            ssq += diff * diff;
        }
        return std::sqrt(ssq);
    };
    double total = 0.0;
    for (int a = 0; a < n; ++a) {
        double hardest_pos = -1.0, hardest_neg = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (j == a) continue;
            if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)])
                hardest_pos = std::max(hardest_pos, dist(a, j));
            else
                hardest_neg = std::min(hardest_neg, dist(a, j));
        }
        total += std::max(0.0, margin + hardest_pos - hardest_neg);
    }
    return total / n;
}

// Softmax cross-entropy at extended precision.
long double ce_oracle(const Tensor& logits, const std::vector<int>& labels) {
    int n = logits.dim(0), nc = logits.dim(1);
    long double total = 0.0L;
    for (int i = 0; i < n; ++i) {
        long double sum = 0.0L;
        for (int j = 0; j < nc; ++j) sum += expl(static_cast<long double>(logits.at({i, j})));
        long double p = expl(static_cast<long double>(logits.at({i, labels[static_cast<std::size_t>(i)]}))) / sum;
        total += -logl(p);
    }
    return total / n;
}

}  // namespace

TEST_CASE("identical embeddings give exactly the margin") {
    Tensor emb = Tensor::full({8, 4}, 0.37);
    std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};
    Var loss = triplet_batch_hard(Var(emb), labels, {0.5});
    CHECK(loss.value().item() == 0.5);
}

TEST_CASE("well-separated clusters give zero loss") {
    // Two identities, K=2; every cross pair is farther than every same pair
    // by more than the margin.
    Tensor emb = Tensor::from({4, 2}, {0.0, 0.0,   0.1, 0.0,
                                       10.0, 0.0, 10.1, 0.0});
    std::vector<int> labels = {0, 0, 1, 1};
    CHECK(triplet_batch_hard(Var(emb), labels, {0.5}).value().item() == 0.0);
}

TEST_CASE("triplet loss equals brute-force enumeration on random batches") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        int p = 3, k = 3, d = 4;
        Tensor emb = random_tensor({p * k, d}, rng);
        std::vector<int> labels;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < k; ++j) labels.push_back(i * 7);  // non-contiguous ids are fine
        for (int i = 0; i < p * k; ++i) labels[static_cast<std::size_t>(i)] = (i / k) * 7;
        double got = triplet_batch_hard(Var(emb), labels, {0.5}).value().item();
        double want = triplet_brute_force(emb, labels, 0.5);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("triplet loss rejects degenerate batches naming the identity") {
    Tensor emb = Tensor::zeros({3, 2});
    CHECK_THROWS_WITH_AS(triplet_batch_hard(Var(emb), {5, 5, 5}, {0.5}),
                         doctest::Contains("single identity"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(triplet_batch_hard(Var(emb), {5, 5, 9}, {0.5}),
                         doctest::Contains("9"), std::invalid_argument);
}

TEST_CASE("triplet loss is invariant under rigid motions of the embedding") {
    std::mt19937_64 rng(7);
    int n = 9, d = 3;
    Tensor emb = random_tensor({n, d}, rng);
    std::vector<int> labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
    double base = triplet_batch_hard(Var(emb), labels, {0.4}).value().item();

    // Random rotation from QR-free Givens compositions plus a translation.
    double angles[3] = {0.7, -1.1, 2.3};
    Tensor moved = emb;
    auto rotate = [&](int ax0, int ax1, double a) {
        for (int i = 0; i < n; ++i) {
            double x = moved.at({i, ax0}), y = moved.at({i, ax1});
            moved.at({i, ax0}) = std::cos(a) * x - std::sin(a) * y;
            moved.at({i, ax1}) = std::sin(a) * x + std::cos(a) * y;
        }
    };
    rotate(0, 1, angles[0]);
    rotate(1, 2, angles[1]);
    rotate(0, 2, angles[2]);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) moved.at({i, k}) += 0.5 * (k + 1);
    double after = triplet_batch_hard(Var(moved), labels, {0.4}).value().item();
    CHECK(after == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("triplet loss is zero iff every anchor satisfies the margin") {
    std::mt19937_64 rng(301);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor emb = random_tensor({6, 2}, rng);
        std::vector<int> labels = {0, 0, 0, 1, 1, 1};
        double margin = 0.3;
        double loss = triplet_batch_hard(Var(emb), labels, {margin}).value().item();
        bool all_satisfied = true;
        auto dist = [&](int a, int b) {
            double dx = emb.at({a, 0}) - emb.at({b, 0});
            double dy = emb.at({a, 1}) - emb.at({b, 1});
            return std::sqrt(dx * dx + dy * dy);
        };
        for (int a = 0; a < 6; ++a) {
            double hp = -1, hn = 1e300;
            for (int j = 0; j < 6; ++j) {
                if (j == a) continue;
                if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)])
                    hp = std::max(hp, dist(a, j));
                else
                    hn = std::min(hn, dist(a, j));
            }
            if (hp + margin > hn) all_satisfied = false;
        }
        CHECK((loss == 0.0) == all_satisfied);
    }
}

TEST_CASE("triplet gradient matches central differences away from singularities") {
    std::mt19937_64 rng(55);
    int tested = 0;
    for (int trial = 0; trial < 8 && tested < 3; ++trial) {
        Var emb(random_tensor({6, 3}, rng), true);
        std::vector<int> labels = {0, 0, 1, 1, 2, 2};
        // Keep clear of hinge boundaries: only accept active, non-marginal cases.
        double loss = triplet_batch_hard(emb, labels, {0.5}).value().item();
        if (loss < 0.05) continue;
        auto res = finite_difference_check(
            [&] { return triplet_batch_hard(emb, labels, {0.5}); }, {emb});
        CHECK(res.max_rel_err < 1e-4);
        ++tested;
    }
    CHECK(tested >= 1);
}

TEST_CASE("uniform logits give log of the class count") {
    Tensor logits = Tensor::full({3, 751}, 1.7);
    Var loss = identification_loss(Var(logits), {0, 400, 750});
    CHECK(loss.value().item() == doctest::Approx(std::log(751.0)).epsilon(1e-9));
    CHECK(std::log(751.0) == doctest::Approx(6.6214).epsilon(1e-4));
}

TEST_CASE("a dominant true-class logit drives the loss to zero") {
    Tensor logits = Tensor::zeros({1, 5});
    logits.at({0, 2}) = 1e4;
    CHECK(identification_loss(Var(logits), {2}).value().item() < 1e-12);
}

TEST_CASE("identification loss matches the extended-precision oracle") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor logits = random_tensor({5, 10}, rng, -8.0, 8.0);
        std::vector<int> labels;
        std::uniform_int_distribution<int> pick(0, 9);
        for (int i = 0; i < 5; ++i) labels.push_back(pick(rng));
        double got = identification_loss(Var(logits), labels).value().item();
        long double want = ce_oracle(logits, labels);
        CHECK(std::fabs(got - static_cast<double>(want)) /
                  std::max(1.0, std::fabs(static_cast<double>(want))) < 1e-9);
    }
}

TEST_CASE("identification loss is invariant to per-sample logit shifts") {
    std::mt19937_64 rng(88);
    Tensor logits = random_tensor({4, 6}, rng);
    std::vector<int> labels = {0, 5, 2, 3};
    double base = identification_loss(Var(logits), labels).value().item();
    Tensor shifted = logits;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j) shifted.at({i, j}) += 3.7 * (i + 1);
    double after = identification_loss(Var(shifted), labels).value().item();
    CHECK(std::fabs(after - base) < 1e-10);
}

TEST_CASE("identification loss rejects out-of-range labels") {
    Tensor logits = Tensor::zeros({2, 4});
    CHECK_THROWS_AS(identification_loss(Var(logits), {0, 4}), std::invalid_argument);
    CHECK_THROWS_AS(identification_loss(Var(logits), {-1, 0}), std::invalid_argument);
}

TEST_CASE("identification gradient matches central differences") {
    std::mt19937_64 rng(99);
    Var logits(random_tensor({4, 5}, rng), true);
    std::vector<int> labels = {1, 0, 4, 2};
    auto res = finite_difference_check([&] { return identification_loss(logits, labels); }, {logits});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("combined loss sums weighted terms") {
    Var trp(Tensor::scalar(0.5));
    Var cp(Tensor::scalar(6.62));
    Var cg(Tensor::scalar(6.62));
    CHECK(combined_loss(trp, cp, cg, {}).value().item() == doctest::Approx(13.74).epsilon(1e-12));
    CHECK(combined_loss(trp, cp, cg, {1, 0, 0}).value().item() == 0.5);
    CHECK(combined_loss(std::nullopt, cp, std::nullopt, {3, 2, 5}).value().item() ==
          doctest::Approx(2 * 6.62));
}

TEST_CASE("combined loss rejects non-finite terms") {
    Var bad(Tensor::scalar(std::nan("")));
    Var ok(Tensor::scalar(1.0));
    CHECK_THROWS_AS(combined_loss(bad, ok, ok, {}), NumericError);
    CHECK_THROWS_AS(combined_loss(ok, ok, Var(Tensor::scalar(INFINITY)), {}), NumericError);
}

TEST_CASE("combined loss replays a per-branch log to machine precision") {
    std::mt19937_64 rng(111);
    std::uniform_real_distribution<double> dist(0.0, 3.0);
    double acc = 0.0;
    for (int step = 0; step < 50; ++step) {
        double a = dist(rng), b = dist(rng), c = dist(rng);
        Var total = combined_loss(Var(Tensor::scalar(a)), Var(Tensor::scalar(b)),
                                  Var(Tensor::scalar(c)), {});
        acc += total.value().item() - (a + b + c);
    }
    CHECK(std::fabs(acc) < 1e-12);
}
