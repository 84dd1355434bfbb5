#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zoom/common.hpp"

namespace zoom {

// Row-major n x d float matrix with implicit ids 0..n-1.
struct VectorDataset {
    uint64_t n = 0;
    uint64_t d = 0;
    static constexpr uint32_t elem_bytes = 4;
    std::vector<float> data;

    const float* row(uint64_t i) const { return data.data() + i * d; }
    float* row(uint64_t i) { return data.data() + i * d; }
};

enum class DatasetFormat { fvecs, bvecs, raw_f32 };

VectorDataset load_dataset(const std::string& path, DatasetFormat format);

// Writes fvecs or raw_f32 (bvecs writing unsupported: synthesized data is float).
void save_dataset(const VectorDataset& ds, const std::string& path, DatasetFormat format);

// Isotropic Gaussian blobs around n_clusters_true random centers.
VectorDataset generate_synthetic(uint64_t n, uint64_t d, uint64_t n_clusters_true, uint64_t seed);

struct SearchParams {
    uint32_t k = 10;        // neighbors to return
    uint32_t r = 100;       // candidate list size for reranking
    uint32_t nscan = 16;    // clusters scanned per query
    uint32_t ef_search = 64;

    void validate() const {
        ZOOM_ARG_CHECK(k >= 1 && k <= r, "SearchParams: require 1 <= k <= r");
        ZOOM_ARG_CHECK(nscan >= 1, "SearchParams: nscan must be >= 1");
        ZOOM_ARG_CHECK(ef_search >= nscan, "SearchParams: ef_search must be >= nscan");
    }
};

struct ZoomConfig {
    uint32_t n_cluster = 1;
    uint32_t m = 1;        // sub-dimension count
    uint32_t l = 256;      // codewords per sub-codebook
    uint32_t out_d = 10;   // routing out-degree
    uint64_t seed = 0;
};

struct Metrics {
    double recall = 0.0;
    double latency_ms = 0.0;
    double t_cs_ms = 0.0;
    double t_vs_ms = 0.0;
    double t_rerank_ms = 0.0;
    uint64_t memory_bytes = 0;
    double vq = 0.0;
};

// Exact top-k by squared L2, ascending distance, ties by lower id.
std::vector<std::pair<uint32_t, float>> exact_topk(const VectorDataset& ds,
                                                   const float* query, uint32_t k);

double recall(const std::vector<uint32_t>& found, const std::vector<uint32_t>& truth,
              uint32_t k);

// Preview index memory model:
//   n*(m*log2(l)/8 + f) + l*d*f + n_cluster*(d + out_d)*f
uint64_t memory_cost(const ZoomConfig& config, uint64_t n, uint64_t d, uint32_t f);

// (vectors hostable within machine_memory_bytes) * (1000 / latency_ms).
// Only ratios between two systems are meaningful.
double vq(double latency_ms, uint64_t memory_bytes, uint64_t machine_memory_bytes);

}  // namespace zoom
