// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "deepperson/errors.hpp"

namespace deepperson {

void EmbeddingSet::validate() const {
    std::size_t n = vectors.empty() ? 0 : static_cast<std::size_t>(vectors.dim(0));
    if (identities.size() != n || cameras.size() != n)
        throw DataError("EmbeddingSet: metadata length does not match vector count");
    if (!vectors.all_finite()) throw NumericError("EmbeddingSet: non-finite descriptor values");
}

Tensor pairwise_distances(const EmbeddingSet& query, const EmbeddingSet& gallery) {
    query.validate();
    gallery.validate();
    if (query.dim() != gallery.dim())
        throw DataError("pairwise_distances: dimensionality mismatch " + std::to_string(query.dim()) +
                        " vs " + std::to_string(gallery.dim()));
    int nq = query.count(), ng = gallery.count(), d = query.dim();
    Tensor out({nq, ng});
    for (int i = 0; i < nq; ++i) {
        const double* qi = query.vectors.data() + static_cast<std::size_t>(i) * d;
        double* row = out.data() + static_cast<std::size_t>(i) * ng;
        for (int j = 0; j < ng; ++j) {
            const double* gj = gallery.vectors.data() + static_cast<std::size_t>(j) * d;
            double ssq = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = qi[k] - gj[k];
                ssq += diff * diff;
            }
            row[j] = std::sqrt(ssq);
        }
    }
    return out;
}

RankedQuery rank_one_query(const double* dist_row, int gallery_n, int query_id, int query_cam,
                           const std::vector<int>& g_ids, const std::vector<int>& g_cams) {
    std::vector<int> keep;
    keep.reserve(static_cast<std::size_t>(gallery_n));
    for (int j = 0; j < gallery_n; ++j) {
        if (g_ids[static_cast<std::size_t>(j)] == -1) continue;  // junk
        if (g_ids[static_cast<std::size_t>(j)] == query_id &&
            g_cams[static_cast<std::size_t>(j)] == query_cam)
            continue;  // same identity seen by the same camera
        keep.push_back(j);
    }
    // Ascending distance; stable sort keeps gallery index order on ties.
    std::stable_sort(keep.begin(), keep.end(),
                     [&](int a, int b) { return dist_row[a] < dist_row[b]; });
    RankedQuery rq;
    rq.match.reserve(keep.size());
    for (int j : keep) {
        bool m = g_ids[static_cast<std::size_t>(j)] == query_id;
        rq.match.push_back(m ? 1 : 0);
        if (m) rq.num_relevant++;
    }
    return rq;
}

namespace {

void check_meta(const Tensor& dist, const std::vector<int>& q_ids, const std::vector<int>& q_cams,
                const std::vector<int>& g_ids, const std::vector<int>& g_cams) {
    if (dist.rank() != 2) throw DataError("distance matrix must be 2-D");
    if (q_ids.size() != static_cast<std::size_t>(dist.dim(0)) || q_cams.size() != q_ids.size())
        throw DataError("query metadata does not match distance matrix rows");
    if (g_ids.size() != static_cast<std::size_t>(dist.dim(1)) || g_cams.size() != g_ids.size())
        throw DataError("gallery metadata does not match distance matrix columns");
}

}  // namespace

std::vector<double> cmc_curve(const Tensor& dist, const std::vector<int>& q_ids,
                              const std::vector<int>& q_cams, const std::vector<int>& g_ids,
                              const std::vector<int>& g_cams, int k_max) {
    check_meta(dist, q_ids, q_cams, g_ids, g_cams);
    if (k_max < 1) throw std::invalid_argument("cmc_curve: k_max must be >= 1");
    int nq = dist.dim(0), ng = dist.dim(1);
    std::vector<double> hits(static_cast<std::size_t>(k_max), 0.0);
    int valid = 0;
    for (int i = 0; i < nq; ++i) {
        RankedQuery rq = rank_one_query(dist.data() + static_cast<std::size_t>(i) * ng, ng,
                                        q_ids[static_cast<std::size_t>(i)],
                                        q_cams[static_cast<std::size_t>(i)], g_ids, g_cams);
        if (rq.num_relevant == 0) {
            std::cerr << "warning: query " << i << " has no valid positive; dropped from CMC\n";
            continue;
        }
        ++valid;
        int first = -1;
        for (std::size_t r = 0; r < rq.match.size(); ++r)
            if (rq.match[r]) { first = static_cast<int>(r); break; }
        for (int k = first; k < k_max; ++k) hits[static_cast<std::size_t>(k)] += 1.0;
    }
    if (valid == 0) throw DataError("cmc_curve: no query has a valid positive in the gallery");
    for (double& h : hits) h /= valid;
    return hits;
}

double mean_average_precision(const Tensor& dist, const std::vector<int>& q_ids,
                              const std::vector<int>& q_cams, const std::vector<int>& g_ids,
                              const std::vector<int>& g_cams) {
    check_meta(dist, q_ids, q_cams, g_ids, g_cams);
    int nq = dist.dim(0), ng = dist.dim(1);
    double total = 0.0;
    int valid = 0;
    for (int i = 0; i < nq; ++i) {
        RankedQuery rq = rank_one_query(dist.data() + static_cast<std::size_t>(i) * ng, ng,
                                        q_ids[static_cast<std::size_t>(i)],
                                        q_cams[static_cast<std::size_t>(i)], g_ids, g_cams);
        if (rq.num_relevant == 0) continue;
        double ap = 0.0;
        int seen = 0;
        for (std::size_t r = 0; r < rq.match.size(); ++r) {
            if (!rq.match[r]) continue;
            ++seen;
            ap += static_cast<double>(seen) / static_cast<double>(r + 1);
        }
        total += ap / rq.num_relevant;
        ++valid;
    }
    if (valid == 0) throw DataError("mean_average_precision: no valid queries");
    return total / valid;
}

namespace {

EmbeddingSet aggregate_multi_query(const EmbeddingSet& query) {
    // Mean descriptor per (identity, camera) group, in first-seen order.
    std::map<std::pair<int, int>, int> group_of;
    std::vector<std::pair<int, int>> groups;
    std::vector<int> counts;
    for (int i = 0; i < query.count(); ++i) {
        auto key = std::make_pair(query.identities[static_cast<std::size_t>(i)],
                                  query.cameras[static_cast<std::size_t>(i)]);
        if (group_of.emplace(key, static_cast<int>(groups.size())).second) {
            groups.push_back(key);
            counts.push_back(0);
        }
    }
    int d = query.dim();
    EmbeddingSet out;
    out.vectors = Tensor::zeros({static_cast<int>(groups.size()), d});
    for (int i = 0; i < query.count(); ++i) {
        auto key = std::make_pair(query.identities[static_cast<std::size_t>(i)],
                                  query.cameras[static_cast<std::size_t>(i)]);
        int g = group_of[key];
        counts[static_cast<std::size_t>(g)]++;
        double* dst = out.vectors.data() + static_cast<std::size_t>(g) * d;
        const double* src = query.vectors.data() + static_cast<std::size_t>(i) * d;
        for (int k = 0; k < d; ++k) dst[k] += src[k];
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double inv = 1.0 / counts[g];
        double* dst = out.vectors.data() + g * d;
        for (int k = 0; k < d; ++k) dst[k] *= inv;
        out.identities.push_back(groups[g].first);
        out.cameras.push_back(groups[g].second);
    }
    return out;
}

}  // namespace

EvalReport evaluate(const EmbeddingSet& query, const EmbeddingSet& gallery, EvalMode mode,
                    int k_max) {
    query.validate();
    gallery.validate();
    if (gallery.count() == 0) throw DataError("evaluate: empty gallery");
    if (query.count() == 0) throw DataError("evaluate: empty query set");

    EmbeddingSet multi;  // keeps the aggregated set alive in kMulti mode
    const EmbeddingSet* p = &query;
    if (mode == EvalMode::kMulti) {
        multi = aggregate_multi_query(query);
        p = &multi;
    }
    Tensor dist = pairwise_distances(*p, gallery);
    int ng = gallery.count();
    k_max = std::min(k_max, ng);

    EvalReport report;
    report.cmc.assign(static_cast<std::size_t>(k_max), 0.0);
    double ap_total = 0.0;
    for (int i = 0; i < p->count(); ++i) {
        RankedQuery rq = rank_one_query(dist.data() + static_cast<std::size_t>(i) * ng, ng,
                                        p->identities[static_cast<std::size_t>(i)],
                                        p->cameras[static_cast<std::size_t>(i)],
                                        gallery.identities, gallery.cameras);
        if (rq.num_relevant == 0) {
            report.num_dropped_queries++;
            continue;
        }
        int first = -1;
        double ap = 0.0;
        int seen = 0;
        for (std::size_t r = 0; r < rq.match.size(); ++r) {
            if (!rq.match[r]) continue;
            if (first < 0) first = static_cast<int>(r);
            ++seen;
            ap += static_cast<double>(seen) / static_cast<double>(r + 1);
        }
        ap /= rq.num_relevant;
        for (int k = first; k < k_max; ++k) report.cmc[static_cast<std::size_t>(k)] += 1.0;
        report.per_query_ap.push_back(ap);
        report.query_index.push_back(i);
        ap_total += ap;
        report.num_valid_queries++;
    }
    if (report.num_valid_queries == 0) throw DataError("evaluate: no query has a valid positive");
    for (double& c : report.cmc) c /= report.num_valid_queries;
    report.mean_ap = ap_total / report.num_valid_queries;
    return report;
}

static double rank_at(const EvalReport& r, int k) {
    if (r.cmc.empty()) return 0.0;
    int idx = std::min<int>(k, static_cast<int>(r.cmc.size())) - 1;
    return r.cmc[static_cast<std::size_t>(idx)];
}

void write_report(const EvalReport& report, std::ostream& os) {
    char buf[64];
    auto line = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s=%.6f\n", key, v);
        os << buf;
    };
    line("rank1", rank_at(report, 1));
    line("rank5", rank_at(report, 5));
    line("rank10", rank_at(report, 10));
    line("mAP", report.mean_ap);
}

std::string report_to_string(const EvalReport& report) {
    std::ostringstream os;
    write_report(report, os);
    return os.str();
}

void write_per_query_ap(const EvalReport& report, std::ostream& os) {
    os << "query\tap\n";
    char buf[64];
    for (std::size_t i = 0; i < report.per_query_ap.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%d\t%.9f\n", report.query_index[i], report.per_query_ap[i]);
        os << buf;
    }
}

}  // namespace deepperson
