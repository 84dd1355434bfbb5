#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "zoom/core.hpp"

namespace zoom {

struct ClusterModel {
    uint32_t n_cluster = 0;
    uint64_t d = 0;
    std::vector<float> centroids;           // n_cluster x d
    std::vector<uint32_t> assignments;      // one per trained vector
    std::vector<uint32_t> sizes;            // per-cluster counts
    std::vector<double> objective_history;  // per-Lloyd-iteration objective

    const float* centroid(uint32_t c) const { return centroids.data() + uint64_t{c} * d; }
};

struct Residuals {
    uint64_t n = 0;
    uint64_t d = 0;
    std::vector<float> data;  // n x d, row i = vector i minus its centroid

    const float* row(uint64_t i) const { return data.data() + i * d; }
};

// Lloyd's k-means with k-means++ seeding. Stops at max_iters or when no
// assignment changes; empty clusters are re-seeded from the farthest point
// of the largest cluster.
ClusterModel kmeans_train(const VectorDataset& dataset, uint32_t k, uint32_t max_iters,
                          uint64_t seed);

// Nearest centroid (squared L2), ties to the lower id.
std::pair<uint32_t, float> assign(const ClusterModel& model, const float* vector, uint64_t d);

Residuals compute_residuals(const VectorDataset& dataset, const ClusterModel& model);

}  // namespace zoom
