#include <algorithm>
#include <cstring>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "zoom/common.hpp"
#include "zoom/routing.hpp"

using namespace zoom;

namespace {

std::vector<float> random_centroids(uint32_t n, uint32_t d, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.f, 1.f);
    std::vector<float> c(uint64_t{n} * d);
    for (auto& x : c) x = g(rng);
    return c;
}

RoutingGraph make_ground_graph(uint32_t n,
                               const std::vector<std::pair<uint32_t, uint32_t>>& edges) {
    RoutingGraph g;
    g.n = n;
    g.out_d = 4;
    g.entry_point = 0;
    g.node_levels.assign(n, 0);
    g.layers.assign(1, std::vector<std::vector<uint32_t>>(n));
    for (const auto& [a, b] : edges) g.layers[0][a].push_back(b);
    return g;
}

double overlap_with_exact(const RoutingGraph& g, const std::vector<float>& cents,
                          uint32_t d, const float* q, uint32_t nscan,
                          uint32_t ef_search) {
    const auto routed = route(g, cents.data(), d, q, nscan, ef_search);
    std::vector<std::pair<double, uint32_t>> all(g.n);
    for (uint32_t c = 0; c < g.n; ++c)
        all[c] = {testutil::l2_sq_d(q, cents.data() + uint64_t{c} * d, d), c};
    std::sort(all.begin(), all.end());
    std::set<uint32_t> exact;
    for (uint32_t i = 0; i < nscan; ++i) exact.insert(all[i].second);
    uint32_t hits = 0;
    for (const auto& [id, dist] : routed) hits += exact.count(id);
    return static_cast<double>(hits) / nscan;
}

}  // namespace

TEST_CASE("a single centroid yields a single silent node") {
    const auto cents = random_centroids(1, 8, 1);
    const auto g = build_routing(cents.data(), 1, 8, 4, 50, 0);
    CHECK(g.n == 1);
    CHECK(g.entry_point == 0);
    REQUIRE(g.layers.size() == 1);
    CHECK(g.layers[0][0].empty());

    const auto stats = graph_stats(g);
    CHECK(stats.condensation.scc_count == 1);
    CHECK(stats.zero_indegree_count == 1);
    REQUIRE(stats.indegree_histogram.size() == 1);
    CHECK(stats.indegree_histogram.at(0) == 1);
}

TEST_CASE("out-degree respects the cap on every layer") {
    SUBCASE("three nodes") {
        const auto cents = random_centroids(3, 4, 2);
        const auto g = build_routing(cents.data(), 3, 4, 2, 50, 0);
        for (const auto& layer : g.layers)
            for (const auto& edges : layer) CHECK(edges.size() <= 2);
    }
    SUBCASE("two hundred nodes") {
        const auto cents = random_centroids(200, 8, 3);
        const auto g = build_routing(cents.data(), 200, 8, 6, 50, 1);
        for (const auto& layer : g.layers)
            for (const auto& edges : layer) CHECK(edges.size() <= 6);
    }
}

TEST_CASE("edges stay on-layer, loop-free, and duplicate-free") {
    const auto cents = random_centroids(300, 8, 4);
    const auto g = build_routing(cents.data(), 300, 8, 5, 50, 2);
    for (uint32_t l = 0; l < g.layers.size(); ++l) {
        for (uint32_t u = 0; u < g.n; ++u) {
            std::set<uint32_t> seen;
            for (uint32_t v : g.layers[l][u]) {
                CHECK(v != u);
                CHECK(v < g.n);
                CHECK(g.node_levels[v] >= l);
                CHECK(seen.insert(v).second);
            }
        }
    }
}

TEST_CASE("layer membership is nested") {
    const auto cents = random_centroids(500, 8, 5);
    const auto g = build_routing(cents.data(), 500, 8, 4, 50, 3);
    CHECK(g.layers.size() >= 1);
    for (uint32_t u = 0; u < g.n; ++u) {
        CHECK(g.node_levels[u] < g.layers.size());
        // A node's adjacency exists on every layer up to its level.
        for (uint32_t l = 1; l <= g.node_levels[u]; ++l)
            CHECK(g.layers[l].size() == g.n);
    }
    CHECK(g.node_levels[g.entry_point] == g.max_level());
}

TEST_CASE("ground-level share matches the promotion rate") {
    // Promotion is geometric with rate 1/out_d, so a (1 - 1/out_d) share of
    // nodes should stay on the ground layer alone.
    uint64_t ground_only = 0, total = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const auto cents = random_centroids(2000, 8, 100 + seed);
        const auto g = build_routing(cents.data(), 2000, 8, 10, 16, seed);
        for (auto lvl : g.node_levels) ground_only += lvl == 0;
        total += g.n;
    }
    const double share = static_cast<double>(ground_only) / total;
    CHECK(share == doctest::Approx(0.9).epsilon(0.055));
}

TEST_CASE("build rejects invalid arguments") {
    const auto cents = random_centroids(10, 4, 6);
    CHECK_THROWS_AS(build_routing(cents.data(), 10, 4, 1, 50, 0), ArgumentError);
    CHECK_THROWS_AS(build_routing(cents.data(), 0, 4, 4, 50, 0), ArgumentError);
    CHECK_THROWS_AS(build_routing(nullptr, 10, 4, 4, 50, 0), ArgumentError);
}

TEST_CASE("augmenting a strongly connected graph changes nothing") {
    auto g = make_ground_graph(3, {{0, 1}, {1, 2}, {2, 0}});
    const auto before = g.layers;
    const auto cents = random_centroids(3, 4, 7);
    CHECK(connectivity_augment(g, cents.data(), 4) == 0);
    CHECK(g.layers == before);

    const auto stats = graph_stats(g);
    CHECK(stats.condensation.scc_count == 1);
    REQUIRE(stats.indegree_histogram.size() == 1);
    CHECK(stats.indegree_histogram.at(1) == 3);
}

TEST_CASE("augmenting a single directed edge closes the cycle") {
    auto g = make_ground_graph(2, {{0, 1}});
    const auto cents = random_centroids(2, 4, 8);
    CHECK(connectivity_augment(g, cents.data(), 4) == 1);
    REQUIRE(g.layers[0][1].size() == 1);
    CHECK(g.layers[0][1][0] == 0);
    CHECK(condensation_info(g).scc_count == 1);
}

TEST_CASE("augmentation repairs random builds within the condensation bound") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const uint32_t n = 30 + static_cast<uint32_t>(rng() % 370);
        const uint32_t out_d = 2 + static_cast<uint32_t>(rng() % 9);
        const auto cents = random_centroids(n, 8, rng());
        auto g = build_routing(cents.data(), n, 8, out_d, 40, rng());

        const auto pre = condensation_info(g);
        const uint32_t added = connectivity_augment(g, cents.data(), 8);
        const auto post = graph_stats(g);

        CHECK(post.condensation.scc_count == 1);
        CHECK(post.zero_indegree_count == 0);
        if (pre.scc_count > 1)
            CHECK(added <= std::max(pre.sources, pre.sinks));
        else
            CHECK(added == 0);
        // At most one augmentation edge leaves any node.
        for (const auto& edges : g.layers[0]) CHECK(edges.size() <= out_d + 1);

        uint64_t hist_total = 0;
        for (const auto& [deg, cnt] : post.indegree_histogram) hist_total += cnt;
        CHECK(hist_total == n);
    }
}

TEST_CASE("route visits every cluster when asked for all of them") {
    const auto cents = random_centroids(120, 8, 9);
    auto g = build_routing(cents.data(), 120, 8, 4, 60, 4);
    connectivity_augment(g, cents.data(), 8);
    const auto q = random_centroids(1, 8, 10);
    const auto res = route(g, cents.data(), 8, q.data(), 120, 200);
    REQUIRE(res.size() == 120);
    auto ids = testutil::ids_of(res);
    std::sort(ids.begin(), ids.end());
    for (uint32_t i = 0; i < 120; ++i) CHECK(ids[i] == i);
}

TEST_CASE("route pinpoints queries sitting on centroids") {
    const auto cents = random_centroids(1000, 8, 11);
    auto g = build_routing(cents.data(), 1000, 8, 10, 100, 5);
    connectivity_augment(g, cents.data(), 8);
    uint32_t hits = 0;
    for (uint32_t j = 0; j < 1000; ++j) {
        const auto res = route(g, cents.data(), 8, cents.data() + uint64_t{j} * 8, 1, 64);
        REQUIRE(res.size() == 1);
        if (res[0].first == j && res[0].second == 0.f) ++hits;
    }
    CHECK(hits >= 990);
}

TEST_CASE("route returns exact ascending squared distances") {
    const auto cents = random_centroids(300, 16, 12);
    auto g = build_routing(cents.data(), 300, 16, 8, 80, 6);
    connectivity_augment(g, cents.data(), 16);
    const auto qs = random_centroids(20, 16, 13);
    for (uint32_t qi = 0; qi < 20; ++qi) {
        const float* q = qs.data() + uint64_t{qi} * 16;
        const auto res = route(g, cents.data(), 16, q, 10, 64);
        REQUIRE(res.size() == 10);
        for (size_t i = 0; i < res.size(); ++i) {
            const float direct = l2_sq(q, cents.data() + uint64_t{res[i].first} * 16, 16);
            CHECK(res[i].second == direct);
            if (i > 0) CHECK(res[i - 1].second <= res[i].second);
        }
    }
}

TEST_CASE("a larger search queue does not hurt overlap") {
    const uint32_t n = 500, d = 16;
    const auto cents = random_centroids(n, d, 14);
    auto g = build_routing(cents.data(), n, d, 10, 200, 7);
    connectivity_augment(g, cents.data(), d);
    const auto qs = random_centroids(100, d, 15);
    double o_small = 0.0, o_large = 0.0;
    for (uint32_t qi = 0; qi < 100; ++qi) {
        const float* q = qs.data() + uint64_t{qi} * d;
        o_small += overlap_with_exact(g, cents, d, q, 16, 40);
        o_large += overlap_with_exact(g, cents, d, q, 16, 320);
    }
    o_small /= 100;
    o_large /= 100;
    CHECK(o_large >= o_small - 0.02);
    CHECK(o_large >= 0.9);
}

TEST_CASE("route validates its arguments") {
    const auto cents = random_centroids(10, 4, 16);
    auto g = build_routing(cents.data(), 10, 4, 4, 50, 8);
    connectivity_augment(g, cents.data(), 4);
    const auto q = random_centroids(1, 4, 17);
    CHECK_THROWS_AS(route(g, cents.data(), 4, q.data(), 11, 64), ArgumentError);
    CHECK_THROWS_AS(route(g, cents.data(), 4, q.data(), 0, 64), ArgumentError);
}

TEST_CASE("builds are deterministic for a fixed seed") {
    const auto cents = random_centroids(400, 8, 18);
    const auto a = build_routing(cents.data(), 400, 8, 6, 80, 9);
    const auto b = build_routing(cents.data(), 400, 8, 6, 80, 9);
    CHECK(a.entry_point == b.entry_point);
    CHECK(a.node_levels == b.node_levels);
    CHECK(a.layers == b.layers);
}
