#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "zoom/clustering.hpp"
#include "zoom/pq.hpp"

using namespace zoom;

namespace {

Residuals make_residuals(uint64_t n, uint64_t d, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.f, 1.f);
    Residuals r;
    r.n = n;
    r.d = d;
    r.data.resize(n * d);
    for (auto& x : r.data) x = g(rng);
    return r;
}

double reconstruction_mse(const PQCodebook& cb, const Residuals& res) {
    const auto codes = encode(cb, res);
    std::vector<float> recon(res.d);
    double total = 0.0;
    for (uint64_t i = 0; i < res.n; ++i) {
        decode(cb, codes.data() + i * cb.m, recon.data());
        total += testutil::l2_sq_d(res.row(i), recon.data(), res.d);
    }
    return total / res.n;
}

PQCodebook zero_codebook(uint32_t m, uint32_t l, uint32_t sub_dim) {
    PQCodebook cb;
    cb.m = m;
    cb.l = l;
    cb.sub_dim = sub_dim;
    cb.tables.assign(uint64_t{m} * l * sub_dim, 0.f);
    return cb;
}

}  // namespace

TEST_CASE("training validates arguments") {
    const auto res = make_residuals(100, 8, 1);
    CHECK_THROWS_AS(train_codebooks(res, 0, 16, 5, 0), ArgumentError);
    CHECK_THROWS_AS(train_codebooks(res, 3, 16, 5, 0), ArgumentError);
    CHECK_THROWS_AS(train_codebooks(res, 2, 257, 5, 0), ArgumentError);
    CHECK_THROWS_AS(train_codebooks(res, 2, 101, 5, 0), ArgumentError);
}

TEST_CASE("training with as many codewords as points is lossless") {
    const auto res = make_residuals(16, 8, 2);
    const auto cb = train_codebooks(res, 2, 16, 10, 3);
    const auto codes = encode(cb, res);
    std::vector<float> recon(8);
    for (uint64_t i = 0; i < res.n; ++i) {
        decode(cb, codes.data() + i * cb.m, recon.data());
        CHECK(std::memcmp(recon.data(), res.row(i), 8 * 4) == 0);
    }
}

TEST_CASE("a single subquantizer is plain k-means on the residuals") {
    const auto res = make_residuals(200, 8, 4);
    const auto cb = train_codebooks(res, 1, 8, 15, 7);

    VectorDataset as_ds;
    as_ds.n = res.n;
    as_ds.d = res.d;
    as_ds.data = res.data;
    const auto km = kmeans_train(as_ds, 8, 15, 7);
    REQUIRE(cb.tables.size() == km.centroids.size());
    CHECK(std::memcmp(cb.tables.data(), km.centroids.data(),
                      cb.tables.size() * 4) == 0);
}

TEST_CASE("reconstruction error falls as the codebook grows") {
    const auto res = make_residuals(2000, 16, 5);
    const double e16 = reconstruction_mse(train_codebooks(res, 4, 16, 12, 9), res);
    const double e64 = reconstruction_mse(train_codebooks(res, 4, 64, 12, 9), res);
    const double e256 = reconstruction_mse(train_codebooks(res, 4, 256, 12, 9), res);
    CHECK(e64 <= e16);
    CHECK(e256 <= e64);
}

TEST_CASE("encode picks the nearest codeword in every subspace") {
    const auto res = make_residuals(500, 8, 6);
    const auto cb = train_codebooks(res, 2, 32, 12, 11);
    const auto probes = make_residuals(1000, 8, 13);
    const auto codes = encode(cb, probes);
    for (uint64_t i = 0; i < probes.n; ++i) {
        for (uint32_t j = 0; j < cb.m; ++j) {
            const float* slice = probes.row(i) + j * cb.sub_dim;
            const uint8_t chosen = codes[i * cb.m + j];
            const double got =
                testutil::l2_sq_d(slice, cb.codeword(j, chosen), cb.sub_dim);
            for (uint32_t c = 0; c < cb.l; ++c) {
                const double other =
                    testutil::l2_sq_d(slice, cb.codeword(j, c), cb.sub_dim);
                CHECK(got <= other + 1e-6 * (1.0 + other));
            }
        }
    }
}

TEST_CASE("a codeword concatenation encodes to its own indices") {
    const auto res = make_residuals(500, 8, 7);
    const auto cb = train_codebooks(res, 2, 16, 12, 15);

    Residuals lattice;
    lattice.n = 1;
    lattice.d = 8;
    lattice.data.resize(8);
    std::memcpy(lattice.data.data(), cb.codeword(0, 3), cb.sub_dim * 4);
    std::memcpy(lattice.data.data() + cb.sub_dim, cb.codeword(1, 9), cb.sub_dim * 4);

    const auto codes = encode(cb, lattice);
    CHECK(codes[0] == 3);
    CHECK(codes[1] == 9);

    std::vector<float> recon(8);
    decode(cb, codes.data(), recon.data());
    CHECK(std::memcmp(recon.data(), lattice.data.data(), 8 * 4) == 0);
}

TEST_CASE("a single codeword forces all-zero codes") {
    const auto res = make_residuals(50, 8, 8);
    const auto cb = train_codebooks(res, 4, 1, 5, 17);
    const auto codes = encode(cb, res);
    for (auto c : codes) CHECK(c == 0);
}

TEST_CASE("decoding a zero codebook yields the zero vector") {
    const auto cb = zero_codebook(2, 4, 3);
    const uint8_t code[2] = {2, 1};
    std::vector<float> out(6, 1.f);
    decode(cb, code, out.data());
    for (float x : out) CHECK(x == 0.f);
}

TEST_CASE("the cached term reduces to its parts on degenerate inputs") {
    std::mt19937_64 rng(19);
    std::normal_distribution<float> g(0.f, 1.f);

    SUBCASE("zero codewords give zero regardless of centroid") {
        const auto cb = zero_codebook(2, 4, 3);
        std::vector<float> centroid(6);
        for (auto& x : centroid) x = g(rng);
        const uint8_t code[2] = {1, 3};
        CHECK(precompute_term(cb, centroid.data(), code) == 0.f);
    }
    SUBCASE("a zero centroid leaves the squared codeword norms") {
        const auto res = make_residuals(100, 6, 21);
        const auto cb = train_codebooks(res, 2, 8, 10, 23);
        const std::vector<float> centroid(6, 0.f);
        const uint8_t code[2] = {5, 2};
        double want = 0.0;
        for (uint32_t j = 0; j < 2; ++j) {
            const float* w = cb.codeword(j, code[j]);
            for (uint32_t t = 0; t < cb.sub_dim; ++t) want += double{w[t]} * w[t];
        }
        CHECK(double{precompute_term(cb, centroid.data(), code)} ==
              doctest::Approx(want).epsilon(1e-5));
    }
}

TEST_CASE("the lookup table is linear in the reconstruction") {
    const auto res = make_residuals(300, 8, 25);
    const auto cb = train_codebooks(res, 2, 16, 10, 27);

    SUBCASE("zero query zeroes the table") {
        const std::vector<float> q(8, 0.f);
        const auto lut = build_termd_lut(cb, q.data());
        for (float v : lut.values) CHECK(v == 0.f);
    }
    SUBCASE("single-entry table is one inner product") {
        const auto res1 = make_residuals(10, 4, 29);
        const auto cb1 = train_codebooks(res1, 1, 1, 5, 31);
        std::vector<float> q{1.f, 2.f, -3.f, 4.f};
        const auto lut = build_termd_lut(cb1, q.data());
        REQUIRE(lut.values.size() == 1);
        double want = 0.0;
        for (uint32_t t = 0; t < 4; ++t) want += double{q[t]} * cb1.codeword(0, 0)[t];
        CHECK(double{lut.at(0, 0)} == doctest::Approx(-2.0 * want).epsilon(1e-6));
    }
    SUBCASE("summing table rows recovers the reconstruction product") {
        std::mt19937_64 rng(33);
        std::normal_distribution<float> g(0.f, 1.f);
        std::vector<float> q(8);
        for (auto& x : q) x = g(rng);
        const auto lut = build_termd_lut(cb, q.data());
        for (int trial = 0; trial < 100; ++trial) {
            uint8_t code[2] = {static_cast<uint8_t>(rng() % 16),
                               static_cast<uint8_t>(rng() % 16)};
            std::vector<float> recon(8);
            decode(cb, code, recon.data());
            double want = 0.0;
            for (uint32_t t = 0; t < 8; ++t) want += double{q[t]} * recon[t];
            want *= -2.0;
            const double got = double{lut.at(0, code[0])} + double{lut.at(1, code[1])};
            CHECK(std::abs(got - want) <= 1e-5 * (1.0 + std::abs(want)));
        }
    }
}

TEST_CASE("the decomposed estimate matches explicit reconstruction") {
    const auto res = make_residuals(2000, 16, 35);
    const auto cb = train_codebooks(res, 4, 32, 12, 37);
    std::mt19937_64 rng(39);
    std::normal_distribution<float> g(0.f, 1.f);

    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<float> q(16), c(16);
        for (auto& x : q) x = g(rng);
        for (auto& x : c) x = g(rng);
        uint8_t code[4];
        for (auto& b : code) b = static_cast<uint8_t>(rng() % 32);

        const float term_a = l2_sq(q.data(), c.data(), 16);
        const float cached = precompute_term(cb, c.data(), code);
        const auto lut = build_termd_lut(cb, q.data());
        double sum = double{term_a} + double{cached};
        for (uint32_t j = 0; j < 4; ++j) sum += double{lut.at(j, code[j])};

        const double naive = adc_naive(cb, q.data(), c.data(), code);
        CHECK(std::abs(sum - naive) <= 1e-4 * (1.0 + naive));
    }
}

TEST_CASE("the reference estimate is the exact distance to the reconstruction") {
    const auto res = make_residuals(400, 8, 41);
    const auto cb = train_codebooks(res, 2, 16, 10, 43);
    std::mt19937_64 rng(45);
    std::normal_distribution<float> g(0.f, 1.f);

    SUBCASE("coincident query and centroid with a zero codebook") {
        const auto zeros = zero_codebook(2, 4, 4);
        std::vector<float> q(8);
        for (auto& x : q) x = g(rng);
        const uint8_t code[2] = {0, 0};
        CHECK(adc_naive(zeros, q.data(), q.data(), code) == 0.f);
    }
    SUBCASE("constructed points give their own distance") {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<float> q(8), c(8), y(8), recon(8);
            for (auto& x : q) x = g(rng);
            for (auto& x : c) x = g(rng);
            uint8_t code[2] = {static_cast<uint8_t>(rng() % 16),
                               static_cast<uint8_t>(rng() % 16)};
            decode(cb, code, recon.data());
            for (uint32_t t = 0; t < 8; ++t) y[t] = c[t] + recon[t];
            const double want = testutil::l2_sq_d(q.data(), y.data(), 8);
            const double got = adc_naive(cb, q.data(), c.data(), code);
            CHECK(std::abs(got - want) <= 1e-5 * (1.0 + want));
        }
    }
}

TEST_CASE("inverted lists partition the dataset") {
    const auto ds = generate_synthetic(500, 16, 8, 47);
    const auto model = kmeans_train(ds, 8, 15, 49);
    const auto res = compute_residuals(ds, model);
    const auto cb = train_codebooks(res, 4, 32, 10, 51);
    const auto codes = encode(cb, res);
    const auto lists = build_inverted_lists(cb, model, codes);

    REQUIRE(lists.n_cluster() == 8);
    CHECK(lists.total() == 500);
    std::vector<bool> seen(500, false);
    for (uint32_t c = 0; c < 8; ++c) {
        for (size_t i = 0; i < lists.ids[c].size(); ++i) {
            const uint32_t id = lists.ids[c][i];
            CHECK(model.assignments[id] == c);
            CHECK(!seen[id]);
            seen[id] = true;
            if (i > 0) CHECK(lists.ids[c][i - 1] < id);
            CHECK(std::memcmp(lists.codes[c].data() + i * cb.m,
                              codes.data() + uint64_t{id} * cb.m, cb.m) == 0);
        }
    }
}

TEST_CASE("the cluster scan agrees with a naive rescan") {
    const auto ds = generate_synthetic(500, 16, 8, 53);
    const auto model = kmeans_train(ds, 8, 15, 55);
    const auto res = compute_residuals(ds, model);
    const auto cb = train_codebooks(res, 4, 32, 10, 57);
    const auto codes = encode(cb, res);
    const auto lists = build_inverted_lists(cb, model, codes);

    const auto qs = generate_synthetic(20, 16, 8, 59);
    for (uint64_t qi = 0; qi < qs.n; ++qi) {
        const float* q = qs.row(qi);
        const auto lut = build_termd_lut(cb, q);
        for (uint32_t c = 0; c < 8; ++c) {
            const float term_a = l2_sq(q, model.centroid(c), 16);
            detail::TopKFirstTie top(10);
            scan_cluster(lists, c, term_a, lut, top);
            const auto got = top.take_sorted();

            std::vector<std::pair<double, uint32_t>> naive;
            for (size_t i = 0; i < lists.ids[c].size(); ++i)
                naive.emplace_back(adc_naive(cb, q, model.centroid(c),
                                             lists.codes[c].data() + i * cb.m),
                                   lists.ids[c][i]);
            std::sort(naive.begin(), naive.end());

            const size_t want_n = std::min<size_t>(10, naive.size());
            REQUIRE(got.size() == want_n);
            if (want_n == 0) continue;
            const double cutoff = naive[want_n - 1].first;
            for (const auto& [id, dist] : got) {
                double naive_dist = -1.0;
                for (const auto& [nd, nid] : naive)
                    if (nid == id) naive_dist = nd;
                REQUIRE(naive_dist >= 0.0);
                CHECK(naive_dist <= cutoff + 1e-4 * (1.0 + cutoff));
                CHECK(std::abs(double{dist} - naive_dist) <=
                      1e-4 * (1.0 + naive_dist));
            }
            for (size_t i = 1; i < got.size(); ++i)
                CHECK(got[i - 1].second <= got[i].second);
        }
    }
}

TEST_CASE("scanning a singleton cluster returns its only vector") {
    VectorDataset ds;
    ds.n = 3;
    ds.d = 4;
    ds.data = {0.f, 0.f, 0.f, 0.f, 10.f, 10.f, 10.f, 10.f, 10.1f, 10.f, 10.f, 10.f};
    ClusterModel model;
    model.n_cluster = 2;
    model.d = 4;
    model.centroids = {0.f, 0.f, 0.f, 0.f, 10.05f, 10.f, 10.f, 10.f};
    model.assignments = {0, 1, 1};
    model.sizes = {1, 2};
    const auto res = compute_residuals(ds, model);
    const auto cb = train_codebooks(res, 2, 3, 10, 61);
    const auto codes = encode(cb, res);
    const auto lists = build_inverted_lists(cb, model, codes);

    const float q[4] = {1.f, 0.f, 0.f, 0.f};
    const auto lut = build_termd_lut(cb, q);
    detail::TopKFirstTie top(5);
    scan_cluster(lists, 0, l2_sq(q, model.centroid(0), 4), lut, top);
    const auto got = top.take_sorted();
    REQUIRE(got.size() == 1);
    CHECK(got[0].first == 0);
    const double naive = adc_naive(cb, q, model.centroid(0), lists.codes[0].data());
    CHECK(double{got[0].second} == doctest::Approx(naive).epsilon(1e-4));
}
