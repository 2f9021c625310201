// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "deepperson/autograd.hpp"

namespace deepperson {

struct LossWeights {
    double ranking = 1.0;     // weight of the triplet term
    double part_cls = 1.0;    // weight of the part identification term
    double global_cls = 1.0;  // weight of the global identification term
};

struct TripletConfig {
    double margin = 0.5;  // Euclidean-distance margin between positive and negative pairs
};

/// Batch-hard triplet loss: mean over all anchors of
/// [margin + max_pos D - min_neg D]_+ with unsquared Euclidean D. Every
/// anchor contributes (inactive hinges add 0). The batch must contain >= 2
/// samples of every identity and >= 2 distinct identities. Distance ties are
/// broken toward the lowest sample index.
Var triplet_batch_hard(const Var& embeddings, const std::vector<int>& labels,
                       const TripletConfig& cfg = {});

/// Softmax cross-entropy over identity logits [N, num_classes]; mean negative
/// log-probability of the true class, computed log-sum-exp stably.
Var identification_loss(const Var& logits, const std::vector<int>& labels);

/// Weighted sum of the three branch losses; absent terms contribute 0 and
/// their weight is ignored. Non-finite inputs are rejected.
Var combined_loss(const std::optional<Var>& ranking, const std::optional<Var>& part_cls,
                  const std::optional<Var>& global_cls, const LossWeights& w = {});

}  // namespace deepperson
