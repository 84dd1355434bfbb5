#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zoom/core.hpp"
#include "zoom/index.hpp"

namespace zoom {

// Reference machine memory for the hostable-vectors term of vq(). Only
// ratios between rows are meaningful, so any fixed value works.
constexpr uint64_t kMachineMemoryBytes = 64ULL << 30;

// Exact top-k per query, stored as a binary table.
struct GroundTruth {
    uint64_t nq = 0;
    uint64_t k = 0;
    std::vector<uint32_t> ids;   // nq * k
    std::vector<float> dists;    // nq * k

    const uint32_t* row_ids(uint64_t q) const { return ids.data() + q * k; }
    const float* row_dists(uint64_t q) const { return dists.data() + q * k; }
};

GroundTruth run_oracle(const VectorDataset& dataset, const VectorDataset& queries,
                       uint32_t k);

void write_ground_truth(const std::string& path, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::string& path);

struct BenchRow {
    std::string mode;  // "full" or "preview"
    uint32_t k = 0, r = 0, nscan = 0, ef_search = 0;
    uint64_t queries = 0;
    double recall = 0.0;
    double mean_ms = 0.0;
    double p99_ms = 0.0;
    double t_cs_ms = 0.0;
    double t_vs_ms = 0.0;
    double t_rerank_ms = 0.0;
    uint64_t memory_bytes = 0;
    double vq = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

// Frozen schema:
// mode,k,r,nscan,ef_search,queries,recall,mean_ms,p99_ms,t_cs_ms,t_vs_ms,
// t_rerank_ms,memory_bytes,vq
std::string to_csv(const BenchReport& report);
std::string to_table(const BenchReport& report);

// One grid point: per-query latencies (mean and p99), stage breakdown,
// recall against the ground truth, memory model value, VQ. warmup_queries
// are run first and discarded. threads > 1 opts into concurrent workers,
// each with its own store descriptor.
BenchRow run_bench_point(ZoomIndex& index, const VectorDataset& queries,
                         const GroundTruth& truth, const SearchParams& params,
                         bool preview_only, uint64_t warmup_queries,
                         uint32_t threads = 1);

struct TuneSpec {
    uint64_t memory_target_bytes = 0;  // MOT: preview memory budget
    double recall_target = 0.9;
    uint32_t k = 1;
    std::vector<uint32_t> ef_search_grid;
    std::vector<uint32_t> nscan_grid;
    std::vector<uint32_t> r_grid;
    uint32_t max_retries = 3;  // MOT escalations of +25% each
    uint64_t seed = 0;
    BuildOptions build_opts{12, 10, 200, true};  // reduced caps for many builds
};

struct TuneRow {
    ZoomConfig config;
    SearchParams params;
    double recall = 0.0;
    double mean_ms = 0.0;
    uint64_t memory_bytes = 0;
    double vq = 0.0;
};

struct TuneResult {
    bool success = false;
    TuneRow chosen;               // best qualifying row, or best found on failure
    std::vector<TuneRow> evaluated;
    uint64_t final_mot = 0;
    uint32_t escalations = 0;
};

// Candidate (n_cluster, m) pairs for step 1 of tuning: n_cluster from
// {1,2,4,8} * sqrt(n) rounded, m from the divisors of d, l = 256.
std::vector<ZoomConfig> tune_candidates(uint64_t n, uint64_t d, uint64_t seed);

// Smallest memory_cost over the full candidate grid (ignoring any MOT).
uint64_t tune_min_memory(uint64_t n, uint64_t d);

// Two-step tuning: filter candidates by MOT, build each, grid-search the
// query parameters, keep combinations meeting the recall target, and return
// the VQ-maximizing one. Escalates MOT by 25% (up to max_retries) when
// nothing qualifies; a still-empty result is reported, not thrown.
// work_dir holds the scratch store files.
TuneResult run_tune(const VectorDataset& dataset, const VectorDataset& queries,
                    const GroundTruth& truth, const TuneSpec& spec,
                    const std::string& work_dir);

}  // namespace zoom
