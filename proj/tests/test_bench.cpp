#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "zoom/bench.hpp"

using namespace zoom;
using testutil::Scratch;

namespace {

struct BenchFixture {
    Scratch scratch{"scratch_bench"};
    VectorDataset ds = generate_synthetic(3000, 16, 32, 201);
    VectorDataset qs = generate_synthetic(100, 16, 32, 203);
    ZoomIndex index;
    GroundTruth truth;

    BenchFixture() {
        ZoomConfig cfg;
        cfg.n_cluster = 64;
        cfg.m = 4;
        cfg.l = 256;
        cfg.out_d = 10;
        cfg.seed = 23;
        index = ZoomIndex::build(ds, cfg, scratch.path("v.zfv"));
        truth = run_oracle(ds, qs, 10);
    }

    SearchParams params(uint32_t nscan) const {
        SearchParams p;
        p.k = 10;
        p.r = 50;
        p.nscan = nscan;
        p.ef_search = 64;
        return p;
    }
};

}  // namespace

TEST_CASE("the oracle pins planted queries") {
    const auto ds = generate_synthetic(500, 8, 8, 205);
    VectorDataset qs;
    qs.n = 5;
    qs.d = 8;
    qs.data.assign(ds.data.begin() + 3 * 8, ds.data.begin() + 8 * 8);

    const auto gt = run_oracle(ds, qs, 1);
    REQUIRE(gt.nq == 5);
    REQUIRE(gt.k == 1);
    for (uint64_t q = 0; q < 5; ++q) {
        CHECK(gt.row_ids(q)[0] == 3 + q);
        CHECK(gt.row_dists(q)[0] == 0.f);
    }

    const auto again = run_oracle(ds, qs, 1);
    CHECK(gt.ids == again.ids);
    CHECK(gt.dists == again.dists);
}

TEST_CASE("the oracle agrees with an independent scan") {
    const auto ds = testutil::random_uniform(400, 8, 207);
    const auto qs = testutil::random_uniform(10, 8, 209);
    const auto gt = run_oracle(ds, qs, 10);
    for (uint64_t q = 0; q < qs.n; ++q) {
        const auto want = testutil::brute_topk(ds, qs.row(q), 10);
        for (size_t i = 0; i < 10; ++i) {
            CHECK(gt.row_ids(q)[i] == want[i].first);
            CHECK(std::abs(double{gt.row_dists(q)[i]} - want[i].second) <=
                  1e-4 * (1.0 + want[i].second));
        }
    }
}

TEST_CASE("ground-truth files roundtrip") {
    Scratch s("scratch_bench_gt");
    const auto ds = testutil::random_uniform(100, 8, 211);
    const auto qs = testutil::random_uniform(7, 8, 213);
    const auto gt = run_oracle(ds, qs, 5);
    const auto path = s.path("truth.zgt");
    write_ground_truth(path, gt);

    const auto back = read_ground_truth(path);
    CHECK(back.nq == gt.nq);
    CHECK(back.k == gt.k);
    CHECK(back.ids == gt.ids);
    CHECK(back.dists == gt.dists);

    SUBCASE("corrupt magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');
        f.close();
        CHECK_THROWS_AS(read_ground_truth(path), FormatError);
    }
    SUBCASE("truncation") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
        CHECK_THROWS_AS(read_ground_truth(path), FormatError);
    }
}

TEST_CASE_FIXTURE(BenchFixture, "bench rows quantize recall") {
    VectorDataset one;
    one.n = 1;
    one.d = 16;
    one.data.assign(qs.row(0), qs.row(0) + 16);
    GroundTruth gt1;
    gt1.nq = 1;
    gt1.k = 10;
    gt1.ids.assign(truth.row_ids(0), truth.row_ids(0) + 10);
    gt1.dists.assign(truth.row_dists(0), truth.row_dists(0) + 10);

    const auto row = run_bench_point(index, one, gt1, params(8), false, 0);
    CHECK(row.queries == 1);
    const double scaled = row.recall * 10.0;
    CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-9));
}

TEST_CASE_FIXTURE(BenchFixture, "recall is reproducible and latency fields are sane") {
    const auto a = run_bench_point(index, qs, truth, params(8), false, 10);
    const auto b = run_bench_point(index, qs, truth, params(8), false, 10);
    CHECK(a.recall == b.recall);
    CHECK(a.queries == 100);
    CHECK(a.mean_ms > 0.0);
    CHECK(a.p99_ms >= a.mean_ms * 0.1);
    CHECK(a.memory_bytes == index.memory_bytes());
    // Stage sums cannot exceed the measured wall time.
    CHECK(a.t_cs_ms + a.t_vs_ms + a.t_rerank_ms <= a.mean_ms * 1.05);
}

TEST_CASE_FIXTURE(BenchFixture, "the full pipeline never trails the preview") {
    const auto full = run_bench_point(index, qs, truth, params(8), false, 5);
    const auto preview = run_bench_point(index, qs, truth, params(8), true, 5);
    CHECK(full.mode == "full");
    CHECK(preview.mode == "preview");
    CHECK(full.recall >= preview.recall - 1e-9);
    CHECK(preview.t_rerank_ms == 0.0);
}

TEST_CASE_FIXTURE(BenchFixture, "scan time grows with the cluster budget") {
    const auto narrow = run_bench_point(index, qs, truth, params(4), true, 10);
    const auto wide = run_bench_point(index, qs, truth, params(64), true, 10);
    CHECK(wide.t_vs_ms > narrow.t_vs_ms);
    CHECK(wide.recall >= narrow.recall - 0.01);
}

TEST_CASE_FIXTURE(BenchFixture, "worker threads do not change the answers") {
    const auto solo = run_bench_point(index, qs, truth, params(8), false, 0, 1);
    const auto pooled = run_bench_point(index, qs, truth, params(8), false, 0, 3);
    CHECK(solo.recall == pooled.recall);
    CHECK(pooled.queries == 100);
}

TEST_CASE_FIXTURE(BenchFixture, "reports serialize to the frozen csv schema") {
    BenchReport report;
    report.rows.push_back(run_bench_point(index, qs, truth, params(8), false, 5));
    report.rows.push_back(run_bench_point(index, qs, truth, params(16), true, 5));
    const auto csv = to_csv(report);

    std::istringstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header ==
          "mode,k,r,nscan,ef_search,queries,recall,mean_ms,p99_ms,t_cs_ms,t_vs_ms,"
          "t_rerank_ms,memory_bytes,vq");
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 13);
    }
    CHECK(rows == 2);

    const auto table = to_table(report);
    CHECK(table.find("recall") != std::string::npos);
}

TEST_CASE_FIXTURE(BenchFixture, "the vq column restates the formula") {
    const auto row = run_bench_point(index, qs, truth, params(8), false, 5);
    CHECK(row.vq ==
          doctest::Approx(vq(row.mean_ms, row.memory_bytes, kMachineMemoryBytes))
              .epsilon(1e-12));
}

TEST_CASE("bench validates its inputs") {
    Scratch s("scratch_bench_args");
    const auto ds = generate_synthetic(300, 8, 4, 215);
    ZoomConfig cfg;
    cfg.n_cluster = 8;
    cfg.m = 2;
    cfg.l = 64;
    auto index = ZoomIndex::build(ds, cfg, s.path("v.zfv"));
    const auto qs = generate_synthetic(10, 8, 4, 217);
    auto gt = run_oracle(ds, qs, 5);

    SearchParams p;
    p.k = 10;  // deeper than the stored truth
    p.r = 20;
    p.nscan = 4;
    p.ef_search = 16;
    CHECK_THROWS_AS(run_bench_point(index, qs, gt, p, false, 0), ArgumentError);

    gt.nq = 9;  // queries/truth mismatch
    SearchParams ok = p;
    ok.k = 5;
    CHECK_THROWS_AS(run_bench_point(index, qs, gt, ok, false, 0), ArgumentError);
}

TEST_CASE("tune candidates follow the published pattern") {
    const auto cands = tune_candidates(10000, 16, 0);
    REQUIRE(cands.size() == 20);

    std::set<uint32_t> ncs, ms;
    for (const auto& c : cands) {
        ncs.insert(c.n_cluster);
        ms.insert(c.m);
        CHECK(c.l == 256);
        CHECK(16 % c.m == 0);
    }
    CHECK(ncs == std::set<uint32_t>{100, 200, 400, 800});
    CHECK(ms == std::set<uint32_t>{1, 2, 4, 8, 16});

    for (size_t i = 1; i < cands.size(); ++i)
        CHECK(memory_cost(cands[i - 1], 10000, 16, 4) <=
              memory_cost(cands[i], 10000, 16, 4));

    CHECK(tune_min_memory(10000, 16) == memory_cost(cands[0], 10000, 16, 4));
}

TEST_CASE("tiny datasets clamp the candidate grid") {
    const auto cands = tune_candidates(4, 2, 0);
    REQUIRE(!cands.empty());
    for (const auto& c : cands) {
        CHECK(c.n_cluster >= 1);
        CHECK(c.n_cluster <= 4);
        CHECK(c.l <= 4);
    }
}

TEST_CASE("tuning with no recall floor keeps the best vq") {
    Scratch s("scratch_bench_tune0");
    const auto ds = generate_synthetic(2000, 8, 16, 219);
    const auto qs = generate_synthetic(40, 8, 16, 221);
    const auto gt = run_oracle(ds, qs, 1);

    TuneSpec spec;
    spec.memory_target_bytes = 10'000'000;
    spec.recall_target = 0.0;
    spec.k = 1;
    spec.ef_search_grid = {32};
    spec.nscan_grid = {4};
    spec.r_grid = {10};
    spec.seed = 1;

    const auto result = run_tune(ds, qs, gt, spec, s.path("work"));
    REQUIRE(result.success);
    REQUIRE(!result.evaluated.empty());
    for (const auto& row : result.evaluated) CHECK(row.vq <= result.chosen.vq);
    CHECK(result.escalations == 0);
}

TEST_CASE("an infeasible memory budget escalates and then fails") {
    Scratch s("scratch_bench_tune_infeasible");
    const auto ds = generate_synthetic(2000, 8, 16, 223);
    const auto qs = generate_synthetic(20, 8, 16, 225);
    const auto gt = run_oracle(ds, qs, 1);

    TuneSpec spec;
    spec.memory_target_bytes = 1;  // below every candidate
    spec.recall_target = 0.5;
    spec.k = 1;
    spec.ef_search_grid = {16};
    spec.nscan_grid = {4};
    spec.r_grid = {10};

    const auto result = run_tune(ds, qs, gt, spec, s.path("work"));
    CHECK(!result.success);
    CHECK(result.escalations == spec.max_retries);
    CHECK(result.evaluated.empty());
}

TEST_CASE("an unreachable recall target reports failure with the best row") {
    Scratch s("scratch_bench_tune_fail");
    const auto ds = testutil::random_uniform(2000, 8, 227);
    const auto qs = testutil::random_uniform(50, 8, 229);
    const auto gt = run_oracle(ds, qs, 10);

    TuneSpec spec;
    spec.memory_target_bytes = 50'000'000;
    spec.recall_target = 1.0;
    spec.k = 10;
    spec.ef_search_grid = {8};
    spec.nscan_grid = {1};
    spec.r_grid = {10};
    spec.max_retries = 1;

    const auto result = run_tune(ds, qs, gt, spec, s.path("work"));
    CHECK(!result.success);
    REQUIRE(!result.evaluated.empty());
    CHECK(result.chosen.recall < 1.0);
    CHECK(result.chosen.params.k == 10);
}

TEST_CASE("tuning never returns an unqualified winner") {
    Scratch s("scratch_bench_tune_sound");
    const auto ds = generate_synthetic(3000, 16, 24, 231);
    const auto qs = generate_synthetic(60, 16, 24, 233);
    const auto gt = run_oracle(ds, qs, 1);

    TuneSpec spec;
    spec.memory_target_bytes = 10'000'000;
    spec.recall_target = 0.7;
    spec.k = 1;
    spec.ef_search_grid = {32, 64};
    spec.nscan_grid = {4, 8};
    spec.r_grid = {10, 20};
    spec.seed = 3;

    const auto result = run_tune(ds, qs, gt, spec, s.path("work"));
    REQUIRE(result.success);
    CHECK(result.chosen.recall >= 0.7);
    for (const auto& row : result.evaluated) {
        if (row.recall >= 0.7) CHECK(row.vq <= result.chosen.vq);
    }
}
