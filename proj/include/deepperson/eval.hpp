// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "deepperson/tensor.hpp"

namespace deepperson {

/// Descriptors with aligned identity/camera metadata.
struct EmbeddingSet {
    Tensor vectors;               // [N, d]
    std::vector<int> identities;  // length N
    std::vector<int> cameras;     // length N

    int count() const { return vectors.empty() ? 0 : vectors.dim(0); }
    int dim() const { return vectors.empty() ? 0 : vectors.dim(1); }
    void validate() const;
};

struct EvalReport {
    std::vector<double> cmc;          // cmc[k-1] = rank-k match rate
    double mean_ap = 0.0;
    std::vector<double> per_query_ap; // aligned with the retained queries
    std::vector<int> query_index;     // original index of each retained query
    int num_valid_queries = 0;
    int num_dropped_queries = 0;
};

enum class EvalMode { kSingle, kMulti };

/// D[i][j] = ||q_i - g_j||_2, exact (no stabilising epsilon here).
Tensor pairwise_distances(const EmbeddingSet& query, const EmbeddingSet& gallery);

/// Protocol filtering per query: drop gallery entries that are junk
/// (identity -1) or share both identity and camera with the query; remaining
/// entries ranked by ascending distance, ties broken by gallery index.
struct RankedQuery {
    std::vector<char> match;  // per retained gallery entry, identity match flag
    int num_relevant = 0;
};
RankedQuery rank_one_query(const double* dist_row, int gallery_n, int query_id, int query_cam,
                           const std::vector<int>& g_ids, const std::vector<int>& g_cams);

/// cmc[k-1] = fraction of queries whose first match occurs at rank <= k.
/// Queries without any valid positive are dropped from the denominator.
std::vector<double> cmc_curve(const Tensor& dist, const std::vector<int>& q_ids,
                              const std::vector<int>& q_cams, const std::vector<int>& g_ids,
                              const std::vector<int>& g_cams, int k_max);

double mean_average_precision(const Tensor& dist, const std::vector<int>& q_ids,
                              const std::vector<int>& q_cams, const std::vector<int>& g_ids,
                              const std::vector<int>& g_cams);

/// Full evaluation; kMulti aggregates query descriptors sharing
/// (identity, camera) by arithmetic mean before ranking.
EvalReport evaluate(const EmbeddingSet& query, const EmbeddingSet& gallery, EvalMode mode,
                    int k_max = 50);

/// One metric per line: rank1= rank5= rank10= mAP=.
void write_report(const EvalReport& report, std::ostream& os);
std::string report_to_string(const EvalReport& report);

/// Tab-separated per-query AP table (query_index, ap).
void write_per_query_ap(const EvalReport& report, std::ostream& os);

}  // namespace deepperson
