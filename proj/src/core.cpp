#include "zoom/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "zoom/detail/leio.hpp"
#include "zoom/detail/topk.hpp"

namespace zoom {

namespace {

uint64_t file_size_of(std::ifstream& is) {
    is.seekg(0, std::ios::end);
    auto end = is.tellg();
    is.seekg(0, std::ios::beg);
    return static_cast<uint64_t>(end);
}

void check_finite(const VectorDataset& ds, const std::string& path) {
    for (uint64_t i = 0; i < ds.data.size(); ++i) {
        if (!std::isfinite(ds.data[i]))
            throw FormatError(path + ": non-finite scalar at element " + std::to_string(i));
    }
}

VectorDataset load_vecs(const std::string& path, bool byte_elems) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(path + ": cannot open");
    const uint64_t fsize = file_size_of(is);

    VectorDataset ds;
    uint64_t offset = 0;
    std::vector<unsigned char> byte_buf;
    while (offset < fsize) {
        if (fsize - offset < 4)
            throw FormatError(path + ": truncated record header at byte offset " +
                              std::to_string(offset));
        int32_t dim = static_cast<int32_t>(detail::get_u32(is, "record dim"));
        if (dim <= 0)
            throw FormatError(path + ": non-positive dimension at byte offset " +
                              std::to_string(offset));
        if (ds.n == 0) {
            ds.d = static_cast<uint64_t>(dim);
        } else if (static_cast<uint64_t>(dim) != ds.d) {
            throw FormatError(path + ": inconsistent dimension " + std::to_string(dim) +
                              " (expected " + std::to_string(ds.d) + ") at byte offset " +
                              std::to_string(offset));
        }
        offset += 4;
        const uint64_t payload = ds.d * (byte_elems ? 1 : 4);
        if (fsize - offset < payload)
            throw FormatError(path + ": truncated record payload at byte offset " +
                              std::to_string(offset));
        const std::size_t base = ds.data.size();
        ds.data.resize(base + ds.d);
        if (byte_elems) {
            byte_buf.resize(ds.d);
            detail::get_bytes(is, byte_buf.data(), ds.d, "bvecs payload");
            for (uint64_t j = 0; j < ds.d; ++j)
                ds.data[base + j] = static_cast<float>(byte_buf[j]);
        } else {
            detail::get_f32_array(is, ds.data.data() + base, ds.d, "fvecs payload");
        }
        offset += payload;
        ++ds.n;
    }
    if (ds.n == 0) throw FormatError(path + ": empty dataset");
    check_finite(ds, path);
    return ds;
}

VectorDataset load_raw_f32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(path + ": cannot open");
    const uint64_t fsize = file_size_of(is);
    if (fsize < 16) throw FormatError(path + ": truncated raw_f32 header");
    VectorDataset ds;
    ds.n = detail::get_u64(is, "raw_f32 n");
    ds.d = detail::get_u64(is, "raw_f32 d");
    if (ds.n == 0 || ds.d == 0) throw FormatError(path + ": zero n or d in raw_f32 header");
    const uint64_t want = 16 + ds.n * ds.d * 4;
    if (fsize != want)
        throw FormatError(path + ": raw_f32 size mismatch, have " + std::to_string(fsize) +
                          " bytes, header implies " + std::to_string(want));
    ds.data.resize(ds.n * ds.d);
    detail::get_f32_array(is, ds.data.data(), ds.data.size(), "raw_f32 payload");
    check_finite(ds, path);
    return ds;
}

}  // namespace

VectorDataset load_dataset(const std::string& path, DatasetFormat format) {
    switch (format) {
        case DatasetFormat::fvecs: return load_vecs(path, false);
        case DatasetFormat::bvecs: return load_vecs(path, true);
        case DatasetFormat::raw_f32: return load_raw_f32(path);
    }
    throw ArgumentError("unknown dataset format");
}

void save_dataset(const VectorDataset& ds, const std::string& path, DatasetFormat format) {
    ZOOM_ARG_CHECK(ds.n > 0 && ds.d > 0, "save_dataset: empty dataset");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw StorageError(path + ": cannot open for writing");
    switch (format) {
        case DatasetFormat::fvecs:
            for (uint64_t i = 0; i < ds.n; ++i) {
                detail::put_u32(os, static_cast<uint32_t>(ds.d));
                detail::put_f32_array(os, ds.row(i), ds.d);
            }
            break;
        case DatasetFormat::raw_f32:
            detail::put_u64(os, ds.n);
            detail::put_u64(os, ds.d);
            detail::put_f32_array(os, ds.data.data(), ds.data.size());
            break;
        case DatasetFormat::bvecs:
            throw ArgumentError("save_dataset: bvecs writing not supported");
    }
    os.flush();
    if (!os) throw StorageError(path + ": write failed");
}

VectorDataset generate_synthetic(uint64_t n, uint64_t d, uint64_t n_clusters_true,
                                 uint64_t seed) {
    ZOOM_ARG_CHECK(n > 0 && d > 0 && n_clusters_true > 0,
                   "generate_synthetic: n, d, n_clusters_true must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.f, 1.f);
    std::uniform_int_distribution<uint64_t> pick(0, n_clusters_true - 1);
    // Blob spread relative to unit-variance centers: small enough that blobs
    // are distinct, large enough that near-neighbor gaps sit at the scale of
    // quantization noise.
    constexpr float kSpread = 0.2f;

    std::vector<float> centers(n_clusters_true * d);
    for (auto& c : centers) c = normal(rng);

    VectorDataset ds;
    ds.n = n;
    ds.d = d;
    ds.data.resize(n * d);
    for (uint64_t i = 0; i < n; ++i) {
        const float* c = centers.data() + pick(rng) * d;
        float* out = ds.row(i);
        for (uint64_t j = 0; j < d; ++j) out[j] = c[j] + kSpread * normal(rng);
    }
    return ds;
}

std::vector<std::pair<uint32_t, float>> exact_topk(const VectorDataset& ds,
                                                   const float* query, uint32_t k) {
    ZOOM_ARG_CHECK(k >= 1 && k <= ds.n, "exact_topk: require 1 <= k <= n");
    detail::TopK top(k);
    for (uint64_t i = 0; i < ds.n; ++i)
        top.consider(l2_sq(query, ds.row(i), ds.d), static_cast<uint32_t>(i));
    return top.take_sorted();
}

double recall(const std::vector<uint32_t>& found, const std::vector<uint32_t>& truth,
              uint32_t k) {
    ZOOM_ARG_CHECK(found.size() == k, "recall: |found| != k");
    ZOOM_ARG_CHECK(truth.size() == k, "recall: |truth| != k");
    std::vector<uint32_t> a = found, b = truth;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t hits = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++hits;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

uint64_t memory_cost(const ZoomConfig& config, uint64_t n, uint64_t d, uint32_t f) {
    const uint64_t code_bits = config.l <= 1 ? 0 : std::bit_width(uint64_t{config.l} - 1);
    const uint64_t per_vector_bits = n * config.m * code_bits;
    return per_vector_bits / 8 + n * f + uint64_t{config.l} * d * f +
           uint64_t{config.n_cluster} * (d + config.out_d) * f;
}

double vq(double latency_ms, uint64_t memory_bytes, uint64_t machine_memory_bytes) {
    ZOOM_ARG_CHECK(latency_ms > 0, "vq: latency must be positive");
    ZOOM_ARG_CHECK(memory_bytes > 0, "vq: memory must be positive");
    const double hostable =
        static_cast<double>(machine_memory_bytes) / static_cast<double>(memory_bytes);
    return hostable * (1000.0 / latency_ms);
}

}  // namespace zoom
