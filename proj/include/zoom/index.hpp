#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zoom/clustering.hpp"
#include "zoom/core.hpp"
#include "zoom/fullview.hpp"
#include "zoom/pq.hpp"
#include "zoom/routing.hpp"

namespace zoom {

struct BuildOptions {
    uint32_t kmeans_iters = 25;
    uint32_t pq_iters = 25;
    uint32_t ef_construction = 200;
    bool autotune_rerank = true;
};

struct QueryResult {
    std::vector<std::pair<uint32_t, float>> neighbors;  // (id, squared L2)
    double t_cs_us = 0.0;      // cluster selection (routing)
    double t_vs_us = 0.0;      // in-cluster code scan
    double t_rerank_us = 0.0;  // full-view rerank
};

// Two-stage index: a compact in-memory preview (centroids, routing graph,
// residual codes, cached terms) that nominates r candidates, and an on-disk
// full-view store that reranks them exactly.
class ZoomIndex {
  public:
    ZoomIndex() = default;
    ZoomIndex(const ZoomIndex&) = delete;
    ZoomIndex& operator=(const ZoomIndex&) = delete;
    ZoomIndex(ZoomIndex&&) = default;
    ZoomIndex& operator=(ZoomIndex&&) = default;

    // Trains all preview structures and writes the full-view store at
    // store_path, replacing any existing file.
    static ZoomIndex build(const VectorDataset& dataset, const ZoomConfig& config,
                           const std::string& store_path,
                           const BuildOptions& opts = {});

    QueryResult search(const float* query, const SearchParams& params);

    // Same pipeline against a caller-provided store handle; lets each worker
    // thread keep its own descriptor while sharing the immutable preview.
    QueryResult search_with(const float* query, const SearchParams& params,
                            FullViewStore& fv) const;

    // Preview-only search: the candidate stage's own top-k, no disk access.
    QueryResult search_preview(const float* query, const SearchParams& params) const;

    // Container write is atomic (temp file + rename). The full-view store is
    // referenced by path (relative to the container when possible) and
    // fingerprinted so a swapped store is rejected at load time.
    void save(const std::string& path) const;
    static ZoomIndex load(const std::string& path, IoMode io_mode);

    uint64_t n() const { return n_; }
    uint64_t d() const { return d_; }
    const ZoomConfig& config() const { return config_; }
    const ClusterModel& clusters() const { return clusters_; }
    const RoutingGraph& routing() const { return routing_; }
    const PQCodebook& codebook() const { return codebook_; }
    const InvertedLists& lists() const { return lists_; }
    FullViewStore& store() { return store_; }
    const FullViewStore& store() const { return store_; }

    RerankPlan plan() const { return plan_; }
    void set_plan(RerankPlan plan) { plan_ = plan; }

    // Preview memory estimate for this configuration (f = 4).
    uint64_t memory_bytes() const { return memory_cost(config_, n_, d_, 4); }

  private:
    uint64_t n_ = 0;
    uint64_t d_ = 0;
    ZoomConfig config_;
    ClusterModel clusters_;
    RoutingGraph routing_;
    PQCodebook codebook_;
    InvertedLists lists_;
    FullViewStore store_;
    RerankPlan plan_;
};

}  // namespace zoom
