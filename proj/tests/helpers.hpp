#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "zoom/core.hpp"

namespace testutil {

// Per-test scratch directory, wiped on entry and exit.
struct Scratch {
    std::filesystem::path dir;

    explicit Scratch(const std::string& name)
        : dir(std::filesystem::current_path() / name) {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }
    std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
};

inline double l2_sq_d(const float* a, const float* b, uint64_t d) {
    double s = 0.0;
    for (uint64_t i = 0; i < d; ++i) {
        const double t = double{a[i]} - double{b[i]};
        s += t * t;
    }
    return s;
}

// Plain double-precision scan with a full sort; deliberately shares no code
// with the library's bounded-heap path.
inline std::vector<std::pair<uint32_t, double>> brute_topk(const zoom::VectorDataset& ds,
                                                           const float* q, uint32_t k) {
    std::vector<std::pair<uint32_t, double>> all(ds.n);
    for (uint64_t i = 0; i < ds.n; ++i)
        all[i] = {static_cast<uint32_t>(i), l2_sq_d(q, ds.row(i), ds.d)};
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    all.resize(k);
    return all;
}

inline zoom::VectorDataset random_uniform(uint64_t n, uint64_t d, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    zoom::VectorDataset ds;
    ds.n = n;
    ds.d = d;
    ds.data.resize(n * d);
    for (auto& x : ds.data) x = u(rng);
    return ds;
}

inline std::vector<uint32_t> ids_of(const std::vector<std::pair<uint32_t, float>>& r) {
    std::vector<uint32_t> out(r.size());
    for (size_t i = 0; i < r.size(); ++i) out[i] = r[i].first;
    return out;
}

}  // namespace testutil
