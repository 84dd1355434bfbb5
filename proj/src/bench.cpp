#include "zoom/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "zoom/detail/leio.hpp"

namespace zoom {

namespace {

using Clock = std::chrono::steady_clock;

constexpr char kTruthMagic[4] = {'Z', 'G', 'T', 'B'};
constexpr uint32_t kTruthVersion = 1;

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double p99_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<size_t>(
        std::ceil(0.99 * static_cast<double>(v.size())));
    return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

}  // namespace

GroundTruth run_oracle(const VectorDataset& dataset, const VectorDataset& queries,
                       uint32_t k) {
    ZOOM_ARG_CHECK(dataset.n > 0 && queries.n > 0, "oracle: empty input");
    ZOOM_ARG_CHECK(dataset.d == queries.d, "oracle: dimension mismatch");
    ZOOM_ARG_CHECK(k >= 1 && uint64_t{k} <= dataset.n,
                   "oracle: k must be in [1, n]");

    GroundTruth gt;
    gt.nq = queries.n;
    gt.k = k;
    gt.ids.resize(queries.n * k);
    gt.dists.resize(queries.n * k);
    for (uint64_t q = 0; q < queries.n; ++q) {
        const auto top = exact_topk(dataset, queries.row(q), k);
        for (uint32_t i = 0; i < k; ++i) {
            gt.ids[q * k + i] = top[i].first;
            gt.dists[q * k + i] = top[i].second;
        }
    }
    return gt;
}

void write_ground_truth(const std::string& path, const GroundTruth& gt) {
    ZOOM_ARG_CHECK(gt.nq > 0 && gt.k > 0, "write_ground_truth: empty table");
    ZOOM_ARG_CHECK(gt.ids.size() == gt.nq * gt.k && gt.dists.size() == gt.nq * gt.k,
                   "write_ground_truth: table shape mismatch");
    using namespace detail;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot create " + tmp);
        put_bytes(out, kTruthMagic, 4);
        put_u32(out, kTruthVersion);
        put_u64(out, gt.nq);
        put_u64(out, gt.k);
        for (uint64_t q = 0; q < gt.nq; ++q) {
            put_bytes(out, gt.row_ids(q), gt.k * 4);
            put_f32_array(out, gt.row_dists(q), gt.k);
        }
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw StorageError("write error while saving " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw StorageError("cannot move ground truth into place at " + path);
    }
}

GroundTruth read_ground_truth(const std::string& path) {
    using namespace detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open ground truth: " + path);
    char magic[4];
    get_bytes(in, magic, 4, "ground-truth magic");
    if (std::memcmp(magic, kTruthMagic, 4) != 0)
        throw FormatError("not a ground-truth table: " + path);
    const uint32_t version = get_u32(in, "ground-truth version");
    if (version != kTruthVersion)
        throw FormatError("unsupported ground-truth version in " + path);
    GroundTruth gt;
    gt.nq = get_u64(in, "query count");
    gt.k = get_u64(in, "truth depth");
    if (gt.nq == 0 || gt.k == 0 || gt.k > (1u << 20))
        throw FormatError("implausible ground-truth header in " + path);
    gt.ids.resize(gt.nq * gt.k);
    gt.dists.resize(gt.nq * gt.k);
    for (uint64_t q = 0; q < gt.nq; ++q) {
        get_bytes(in, gt.ids.data() + q * gt.k, gt.k * 4, "truth ids");
        get_f32_array(in, gt.dists.data() + q * gt.k, gt.k, "truth distances");
    }
    return gt;
}

std::string to_csv(const BenchReport& report) {
    std::ostringstream os;
    os << "mode,k,r,nscan,ef_search,queries,recall,mean_ms,p99_ms,t_cs_ms,"
          "t_vs_ms,t_rerank_ms,memory_bytes,vq\n";
    os << std::setprecision(10);
    for (const auto& r : report.rows) {
        os << r.mode << ',' << r.k << ',' << r.r << ',' << r.nscan << ','
           << r.ef_search << ',' << r.queries << ',' << r.recall << ','
           << r.mean_ms << ',' << r.p99_ms << ',' << r.t_cs_ms << ','
           << r.t_vs_ms << ',' << r.t_rerank_ms << ',' << r.memory_bytes << ','
           << r.vq << '\n';
    }
    return os.str();
}

std::string to_table(const BenchReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(9) << "mode" << std::right << std::setw(5)
       << "k" << std::setw(7) << "r" << std::setw(7) << "nscan" << std::setw(7)
       << "ef" << std::setw(9) << "queries" << std::setw(9) << "recall"
       << std::setw(11) << "mean_ms" << std::setw(11) << "p99_ms"
       << std::setw(10) << "t_cs_ms" << std::setw(10) << "t_vs_ms"
       << std::setw(10) << "t_rr_ms" << std::setw(13) << "mem_bytes"
       << std::setw(15) << "vq" << '\n';
    os << std::fixed;
    for (const auto& r : report.rows) {
        os << std::left << std::setw(9) << r.mode << std::right << std::setw(5)
           << r.k << std::setw(7) << r.r << std::setw(7) << r.nscan
           << std::setw(7) << r.ef_search << std::setw(9) << r.queries
           << std::setprecision(4) << std::setw(9) << r.recall
           << std::setprecision(4) << std::setw(11) << r.mean_ms
           << std::setw(11) << r.p99_ms << std::setw(10) << r.t_cs_ms
           << std::setw(10) << r.t_vs_ms << std::setw(10) << r.t_rerank_ms
           << std::setw(13) << r.memory_bytes << std::setprecision(2)
           << std::setw(15) << r.vq << '\n';
    }
    return os.str();
}

BenchRow run_bench_point(ZoomIndex& index, const VectorDataset& queries,
                         const GroundTruth& truth, const SearchParams& params,
                         bool preview_only, uint64_t warmup_queries,
                         uint32_t threads) {
    params.validate();
    ZOOM_ARG_CHECK(queries.n > 0, "bench: no queries");
    ZOOM_ARG_CHECK(queries.d == index.d(), "bench: query dimension mismatch");
    ZOOM_ARG_CHECK(truth.nq == queries.n, "bench: ground truth row count mismatch");
    ZOOM_ARG_CHECK(truth.k >= params.k, "bench: ground truth shallower than k");
    ZOOM_ARG_CHECK(threads >= 1, "bench: threads must be >= 1");

    const uint64_t nq = queries.n;
    for (uint64_t q = 0; q < std::min(warmup_queries, nq); ++q) {
        if (preview_only)
            index.search_preview(queries.row(q), params);
        else
            index.search(queries.row(q), params);
    }

    std::vector<double> lat(nq), cs(nq), vs(nq), rr(nq), rec(nq);
    auto run_range = [&](uint64_t begin, uint64_t end, FullViewStore* fv) {
        std::vector<uint32_t> found, tr;
        for (uint64_t q = begin; q < end; ++q) {
            const auto t0 = Clock::now();
            const QueryResult res =
                preview_only ? index.search_preview(queries.row(q), params)
                             : index.search_with(queries.row(q), params, *fv);
            const auto t1 = Clock::now();
            lat[q] = std::chrono::duration<double, std::milli>(t1 - t0).count();
            cs[q] = res.t_cs_us / 1000.0;
            vs[q] = res.t_vs_us / 1000.0;
            rr[q] = res.t_rerank_us / 1000.0;
            found.clear();
            for (const auto& [id, dist] : res.neighbors) found.push_back(id);
            tr.assign(truth.row_ids(q), truth.row_ids(q) + params.k);
            if (found.size() == params.k) {
                rec[q] = recall(found, tr, params.k);
            } else {
                // Sparse clusters can return fewer than k results; the
                // absentees count as misses.
                uint32_t hits = 0;
                for (uint32_t id : found)
                    hits += std::find(tr.begin(), tr.end(), id) != tr.end();
                rec[q] = static_cast<double>(hits) / params.k;
            }
        }
    };

    if (threads == 1) {
        run_range(0, nq, &index.store());
    } else {
        std::vector<FullViewStore> stores;
        if (!preview_only) {
            stores.reserve(threads);
            for (uint32_t t = 0; t < threads; ++t)
                stores.push_back(FullViewStore::open(index.store().path(),
                                                     index.store().mode()));
        }
        std::vector<std::thread> pool;
        const uint64_t per = (nq + threads - 1) / threads;
        for (uint32_t t = 0; t < threads; ++t) {
            const uint64_t begin = std::min<uint64_t>(t * per, nq);
            const uint64_t end = std::min<uint64_t>(begin + per, nq);
            if (begin == end) break;
            FullViewStore* fv = preview_only ? nullptr : &stores[t];
            pool.emplace_back(run_range, begin, end, fv);
        }
        for (auto& th : pool) th.join();
    }

    BenchRow row;
    row.mode = preview_only ? "preview" : "full";
    row.k = params.k;
    row.r = params.r;
    row.nscan = params.nscan;
    row.ef_search = params.ef_search;
    row.queries = nq;
    row.recall = mean_of(rec);
    row.mean_ms = mean_of(lat);
    row.p99_ms = p99_of(lat);
    row.t_cs_ms = mean_of(cs);
    row.t_vs_ms = mean_of(vs);
    row.t_rerank_ms = mean_of(rr);
    row.memory_bytes = index.memory_bytes();
    row.vq = vq(row.mean_ms, row.memory_bytes, kMachineMemoryBytes);
    return row;
}

std::vector<ZoomConfig> tune_candidates(uint64_t n, uint64_t d, uint64_t seed) {
    ZOOM_ARG_CHECK(n > 0 && d > 0, "tune_candidates: empty dataset shape");
    std::vector<uint32_t> ncs;
    for (const uint32_t factor : {1u, 2u, 4u, 8u}) {
        const auto nc = static_cast<uint64_t>(
            std::llround(factor * std::sqrt(static_cast<double>(n))));
        const auto clamped = static_cast<uint32_t>(std::clamp<uint64_t>(nc, 1, n));
        if (std::find(ncs.begin(), ncs.end(), clamped) == ncs.end())
            ncs.push_back(clamped);
    }
    std::vector<ZoomConfig> out;
    for (const uint32_t nc : ncs) {
        for (uint32_t m = 1; m <= d; ++m) {
            if (d % m != 0) continue;
            ZoomConfig cfg;
            cfg.n_cluster = nc;
            cfg.m = m;
            cfg.l = static_cast<uint32_t>(std::min<uint64_t>(256, n));
            cfg.seed = seed;
            out.push_back(cfg);
        }
    }
    std::sort(out.begin(), out.end(), [&](const ZoomConfig& a, const ZoomConfig& b) {
        const uint64_t ma = memory_cost(a, n, d, 4), mb = memory_cost(b, n, d, 4);
        if (ma != mb) return ma < mb;
        if (a.n_cluster != b.n_cluster) return a.n_cluster < b.n_cluster;
        return a.m < b.m;
    });
    return out;
}

uint64_t tune_min_memory(uint64_t n, uint64_t d) {
    uint64_t best = UINT64_MAX;
    for (const auto& cfg : tune_candidates(n, d, 0))
        best = std::min(best, memory_cost(cfg, n, d, 4));
    return best;
}

TuneResult run_tune(const VectorDataset& dataset, const VectorDataset& queries,
                    const GroundTruth& truth, const TuneSpec& spec,
                    const std::string& work_dir) {
    ZOOM_ARG_CHECK(spec.recall_target >= 0.0 && spec.recall_target <= 1.0,
                   "tune: recall target must be in [0, 1]");
    ZOOM_ARG_CHECK(spec.k >= 1, "tune: k must be >= 1");
    ZOOM_ARG_CHECK(!spec.ef_search_grid.empty() && !spec.nscan_grid.empty() &&
                       !spec.r_grid.empty(),
                   "tune: parameter grids must be non-empty");
    ZOOM_ARG_CHECK(truth.k >= spec.k, "tune: ground truth shallower than k");

    std::filesystem::create_directories(work_dir);
    const std::string store_path = work_dir + "/tune_store.zfv";
    const auto all_candidates = tune_candidates(dataset.n, dataset.d, spec.seed);

    TuneResult result;
    uint64_t mot = spec.memory_target_bytes;
    std::set<std::pair<uint32_t, uint32_t>> built;

    const auto better = [](const TuneRow& a, const TuneRow& b) {
        if (a.vq != b.vq) return a.vq > b.vq;
        if (a.memory_bytes != b.memory_bytes) return a.memory_bytes < b.memory_bytes;
        return a.mean_ms < b.mean_ms;
    };

    for (uint32_t attempt = 0; attempt <= spec.max_retries; ++attempt) {
        if (attempt > 0) {
            mot += mot / 4;
            ++result.escalations;
        }
        for (const auto& cand : all_candidates) {
            if (memory_cost(cand, dataset.n, dataset.d, 4) > mot) continue;
            if (!built.insert({cand.n_cluster, cand.m}).second) continue;
            ZoomIndex idx =
                ZoomIndex::build(dataset, cand, store_path, spec.build_opts);
            for (const uint32_t ef : spec.ef_search_grid) {
                for (const uint32_t nscan : spec.nscan_grid) {
                    if (ef < nscan) continue;
                    for (const uint32_t r : spec.r_grid) {
                        if (r < spec.k) continue;
                        const SearchParams params{spec.k, r, nscan, ef};
                        const BenchRow row = run_bench_point(
                            idx, queries, truth, params, false,
                            std::min<uint64_t>(8, queries.n));
                        result.evaluated.push_back(
                            {cand, params, row.recall, row.mean_ms,
                             row.memory_bytes, row.vq});
                    }
                }
            }
        }
        const TuneRow* best = nullptr;
        for (const auto& row : result.evaluated) {
            if (row.recall < spec.recall_target) continue;
            if (!best || better(row, *best)) best = &row;
        }
        if (best) {
            result.success = true;
            result.chosen = *best;
            result.final_mot = mot;
            return result;
        }
    }

    result.final_mot = mot;
    const TuneRow* fallback = nullptr;
    for (const auto& row : result.evaluated) {
        if (!fallback || row.recall > fallback->recall ||
            (row.recall == fallback->recall && better(row, *fallback)))
            fallback = &row;
    }
    if (fallback) result.chosen = *fallback;
    return result;
}

}  // namespace zoom
