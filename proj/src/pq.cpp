#include "zoom/pq.hpp"

#include <algorithm>
#include <cstring>

#include "zoom/common.hpp"
#include "zoom/core.hpp"

namespace zoom {

namespace {

#ifdef ZOOM_ADC_F64
using adc_acc_t = double;
#else
using adc_acc_t = float;
#endif

uint8_t nearest_codeword(const PQCodebook& cb, uint32_t j, const float* sub) {
    uint32_t best = 0;
    float best_dist = l2_sq(sub, cb.codeword(j, 0), cb.sub_dim);
    for (uint32_t c = 1; c < cb.l; ++c) {
        const float dist = l2_sq(sub, cb.codeword(j, c), cb.sub_dim);
        if (dist < best_dist) {
            best_dist = dist;
            best = c;
        }
    }
    return static_cast<uint8_t>(best);
}

}  // namespace

PQCodebook train_codebooks(const Residuals& residuals, uint32_t m, uint32_t l,
                           uint32_t max_iters, uint64_t seed) {
    ZOOM_ARG_CHECK(m >= 1, "train_codebooks: m must be >= 1");
    ZOOM_ARG_CHECK(l >= 1 && l <= 256,
                   "train_codebooks: l must be in [1, 256] for byte codes");
    ZOOM_ARG_CHECK(residuals.n > 0, "train_codebooks: no residuals");
    ZOOM_ARG_CHECK(residuals.d % m == 0,
                   "train_codebooks: dimension not divisible by m");
    ZOOM_ARG_CHECK(residuals.n >= l,
                   "train_codebooks: need at least l residuals");

    const uint32_t sub_dim = static_cast<uint32_t>(residuals.d / m);
    PQCodebook cb;
    cb.m = m;
    cb.l = l;
    cb.sub_dim = sub_dim;
    cb.tables.resize(uint64_t{m} * l * sub_dim);

    VectorDataset sub;
    sub.n = residuals.n;
    sub.d = sub_dim;
    sub.data.resize(residuals.n * sub_dim);
    for (uint32_t j = 0; j < m; ++j) {
        for (uint64_t i = 0; i < residuals.n; ++i) {
            std::memcpy(sub.data.data() + i * sub_dim,
                        residuals.row(i) + uint64_t{j} * sub_dim,
                        sub_dim * sizeof(float));
        }
        const auto model = kmeans_train(sub, l, max_iters, seed + j);
        std::copy(model.centroids.begin(), model.centroids.end(),
                  cb.tables.begin() + uint64_t{j} * l * sub_dim);
    }
    return cb;
}

std::vector<uint8_t> encode(const PQCodebook& cb, const Residuals& residuals) {
    ZOOM_ARG_CHECK(residuals.d == cb.d(), "encode: dimension mismatch");
    std::vector<uint8_t> codes(residuals.n * cb.m);
    for (uint64_t i = 0; i < residuals.n; ++i) {
        const float* r = residuals.row(i);
        uint8_t* out = codes.data() + i * cb.m;
        for (uint32_t j = 0; j < cb.m; ++j)
            out[j] = nearest_codeword(cb, j, r + uint64_t{j} * cb.sub_dim);
    }
    return codes;
}

void decode(const PQCodebook& cb, const uint8_t* code, float* out) {
    for (uint32_t j = 0; j < cb.m; ++j) {
        std::memcpy(out + uint64_t{j} * cb.sub_dim, cb.codeword(j, code[j]),
                    cb.sub_dim * sizeof(float));
    }
}

float precompute_term(const PQCodebook& cb, const float* centroid,
                      const uint8_t* code) {
    double acc = 0.0;
    for (uint32_t j = 0; j < cb.m; ++j) {
        const float* w = cb.codeword(j, code[j]);
        const float* c = centroid + uint64_t{j} * cb.sub_dim;
        double norm = 0.0, ip = 0.0;
        for (uint32_t t = 0; t < cb.sub_dim; ++t) {
            norm += double{w[t]} * w[t];
            ip += double{c[t]} * w[t];
        }
        acc += norm + 2.0 * ip;
    }
    return static_cast<float>(acc);
}

TermDLut build_termd_lut(const PQCodebook& cb, const float* query) {
    TermDLut lut;
    lut.m = cb.m;
    lut.l = cb.l;
    lut.values.resize(uint64_t{cb.m} * cb.l);
    for (uint32_t j = 0; j < cb.m; ++j) {
        const float* qj = query + uint64_t{j} * cb.sub_dim;
        float* row = lut.values.data() + uint64_t{j} * cb.l;
        for (uint32_t c = 0; c < cb.l; ++c)
            row[c] = -2.f * dot(qj, cb.codeword(j, c), cb.sub_dim);
    }
    return lut;
}

float adc_naive(const PQCodebook& cb, const float* query,
                const float* centroid, const uint8_t* code) {
    const uint32_t d = cb.d();
    std::vector<float> recon(d);
    decode(cb, code, recon.data());
    double acc = 0.0;
    for (uint32_t t = 0; t < d; ++t) {
        const double diff = (double{query[t]} - centroid[t]) - recon[t];
        acc += diff * diff;
    }
    return static_cast<float>(acc);
}

InvertedLists build_inverted_lists(const PQCodebook& cb,
                                   const ClusterModel& clusters,
                                   const std::vector<uint8_t>& codes) {
    const uint64_t n = clusters.assignments.size();
    ZOOM_ARG_CHECK(clusters.d == cb.d(),
                   "build_inverted_lists: dimension mismatch");
    ZOOM_ARG_CHECK(codes.size() == n * cb.m,
                   "build_inverted_lists: code table size mismatch");

    InvertedLists lists;
    lists.m = cb.m;
    lists.ids.resize(clusters.n_cluster);
    lists.codes.resize(clusters.n_cluster);
    lists.cached.resize(clusters.n_cluster);
    for (uint32_t c = 0; c < clusters.n_cluster; ++c) {
        const uint64_t sz = clusters.sizes[c];
        lists.ids[c].reserve(sz);
        lists.codes[c].reserve(sz * cb.m);
        lists.cached[c].reserve(sz);
    }
    for (uint64_t i = 0; i < n; ++i) {
        const uint32_t c = clusters.assignments[i];
        const uint8_t* code = codes.data() + i * cb.m;
        lists.ids[c].push_back(static_cast<uint32_t>(i));
        lists.codes[c].insert(lists.codes[c].end(), code, code + cb.m);
        lists.cached[c].push_back(
            precompute_term(cb, clusters.centroid(c), code));
    }
    return lists;
}

void scan_cluster(const InvertedLists& lists, uint32_t cluster, float term_a,
                  const TermDLut& lut, detail::TopKFirstTie& out) {
    ZOOM_ARG_CHECK(cluster < lists.n_cluster(),
                   "scan_cluster: cluster id out of range");
    const auto& ids = lists.ids[cluster];
    const auto& codes = lists.codes[cluster];
    const auto& cached = lists.cached[cluster];
    const uint32_t m = lists.m;
    const uint32_t l = lut.l;
    const float* lv = lut.values.data();
    for (size_t i = 0; i < ids.size(); ++i) {
        const uint8_t* code = codes.data() + i * m;
        adc_acc_t acc = static_cast<adc_acc_t>(term_a) + cached[i];
        for (uint32_t j = 0; j < m; ++j) acc += lv[uint64_t{j} * l + code[j]];
        out.consider(static_cast<float>(acc), ids[i]);
    }
}

}  // namespace zoom
