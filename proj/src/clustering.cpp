#include "zoom/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace zoom {

namespace {

// Nearest centroid over a raw centroid table; strict < keeps the lowest id
// on ties.
std::pair<uint32_t, float> nearest_centroid(const float* centroids, uint32_t k, uint64_t d,
                                            const float* v) {
    uint32_t best = 0;
    float best_dist = l2_sq(v, centroids, d);
    for (uint32_t c = 1; c < k; ++c) {
        float dist = l2_sq(v, centroids + uint64_t{c} * d, d);
        if (dist < best_dist) {
            best_dist = dist;
            best = c;
        }
    }
    return {best, best_dist};
}

// k-means++: first center uniform, then D^2-weighted sampling.
std::vector<float> kmeanspp_seed(const VectorDataset& ds, uint32_t k, std::mt19937_64& rng) {
    const uint64_t n = ds.n, d = ds.d;
    std::vector<float> centers(uint64_t{k} * d);
    std::uniform_int_distribution<uint64_t> first(0, n - 1);
    const uint64_t c0 = first(rng);
    std::copy_n(ds.row(c0), d, centers.begin());

    std::vector<double> min_dist(n);
    double total = 0.0;
    for (uint64_t i = 0; i < n; ++i) {
        min_dist[i] = l2_sq(ds.row(i), centers.data(), d);
        total += min_dist[i];
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (uint32_t c = 1; c < k; ++c) {
        uint64_t chosen = n - 1;
        if (total > 0.0) {
            double target = unit(rng) * total;
            double acc = 0.0;
            for (uint64_t i = 0; i < n; ++i) {
                acc += min_dist[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        float* dst = centers.data() + uint64_t{c} * d;
        std::copy_n(ds.row(chosen), d, dst);
        total = 0.0;
        for (uint64_t i = 0; i < n; ++i) {
            double dist = l2_sq(ds.row(i), dst, d);
            if (dist < min_dist[i]) min_dist[i] = dist;
            total += min_dist[i];
        }
    }
    return centers;
}

}  // namespace

ClusterModel kmeans_train(const VectorDataset& ds, uint32_t k, uint32_t max_iters,
                          uint64_t seed) {
    ZOOM_ARG_CHECK(k >= 1, "kmeans_train: k must be >= 1");
    ZOOM_ARG_CHECK(uint64_t{k} <= ds.n, "kmeans_train: k exceeds dataset size");
    const uint64_t n = ds.n, d = ds.d;

    ClusterModel model;
    model.n_cluster = k;
    model.d = d;

    if (uint64_t{k} == n) {
        // Degenerate: every point is its own centroid, objective 0.
        model.centroids = ds.data;
        model.assignments.resize(n);
        for (uint64_t i = 0; i < n; ++i) model.assignments[i] = static_cast<uint32_t>(i);
        model.sizes.assign(k, 1);
        model.objective_history.push_back(0.0);
        return model;
    }

    std::mt19937_64 rng(seed);
    model.centroids = kmeanspp_seed(ds, k, rng);
    model.assignments.assign(n, 0);
    model.sizes.assign(k, 0);

    std::vector<double> sums(uint64_t{k} * d);
    std::vector<float> point_dist(n);
    for (uint32_t iter = 0; iter < max_iters; ++iter) {
        uint64_t changed = 0;
        double objective = 0.0;
        for (uint64_t i = 0; i < n; ++i) {
            auto [c, dist] = nearest_centroid(model.centroids.data(), k, d, ds.row(i));
            if (c != model.assignments[i]) {
                ++changed;
                model.assignments[i] = c;
            }
            point_dist[i] = dist;
            objective += dist;
        }
        model.objective_history.push_back(objective);
        if (changed == 0 && iter > 0) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(model.sizes.begin(), model.sizes.end(), 0);
        for (uint64_t i = 0; i < n; ++i) {
            const uint32_t c = model.assignments[i];
            double* dst = sums.data() + uint64_t{c} * d;
            const float* src = ds.row(i);
            for (uint64_t j = 0; j < d; ++j) dst[j] += src[j];
            ++model.sizes[c];
        }
        for (uint32_t c = 0; c < k; ++c) {
            if (model.sizes[c] != 0) continue;
            // Re-seed from the farthest point of the largest cluster, moving
            // the point (and its contribution to the sums) over so every
            // centroid below stays the exact mean of its members.
            uint32_t largest = static_cast<uint32_t>(
                std::max_element(model.sizes.begin(), model.sizes.end()) -
                model.sizes.begin());
            if (model.sizes[largest] <= 1) continue;
            uint64_t farthest = 0;
            float far_dist = -1.f;
            for (uint64_t i = 0; i < n; ++i) {
                if (model.assignments[i] != largest) continue;
                if (point_dist[i] > far_dist) {
                    far_dist = point_dist[i];
                    farthest = i;
                }
            }
            const float* p = ds.row(farthest);
            double* from = sums.data() + uint64_t{largest} * d;
            double* to = sums.data() + uint64_t{c} * d;
            for (uint64_t j = 0; j < d; ++j) {
                from[j] -= p[j];
                to[j] += p[j];
            }
            model.assignments[farthest] = c;
            point_dist[farthest] = 0.f;
            --model.sizes[largest];
            model.sizes[c] = 1;
        }
        for (uint32_t c = 0; c < k; ++c) {
            if (model.sizes[c] == 0) continue;  // unrepairable (duplicate-heavy data)
            const double* src = sums.data() + uint64_t{c} * d;
            float* dst = model.centroids.data() + uint64_t{c} * d;
            const double inv = 1.0 / model.sizes[c];
            for (uint64_t j = 0; j < d; ++j) dst[j] = static_cast<float>(src[j] * inv);
        }
    }

    // Final assignment pass so labels match the returned centroids.
    std::fill(model.sizes.begin(), model.sizes.end(), 0);
    double objective = 0.0;
    for (uint64_t i = 0; i < n; ++i) {
        auto [c, dist] = nearest_centroid(model.centroids.data(), k, d, ds.row(i));
        model.assignments[i] = c;
        ++model.sizes[c];
        objective += dist;
    }
    model.objective_history.push_back(objective);
    return model;
}

std::pair<uint32_t, float> assign(const ClusterModel& model, const float* v, uint64_t d) {
    ZOOM_ARG_CHECK(d == model.d, "assign: dimension mismatch");
    return nearest_centroid(model.centroids.data(), model.n_cluster, model.d, v);
}

Residuals compute_residuals(const VectorDataset& ds, const ClusterModel& model) {
    ZOOM_ARG_CHECK(ds.d == model.d, "compute_residuals: dimension mismatch");
    ZOOM_ARG_CHECK(ds.n == model.assignments.size(),
                   "compute_residuals: model trained on a different dataset size");
    Residuals res;
    res.n = ds.n;
    res.d = ds.d;
    res.data.resize(ds.n * ds.d);
    for (uint64_t i = 0; i < ds.n; ++i) {
        const float* y = ds.row(i);
        const float* c = model.centroid(model.assignments[i]);
        float* r = res.data.data() + i * ds.d;
        for (uint64_t j = 0; j < ds.d; ++j) r[j] = y[j] - c[j];
    }
    return res;
}

}  // namespace zoom
