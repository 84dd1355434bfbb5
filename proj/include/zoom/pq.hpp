#pragma once

#include <cstdint>
#include <vector>

#include "zoom/clustering.hpp"
#include "zoom/detail/topk.hpp"

namespace zoom {

// Product quantizer trained on residuals: m subquantizers with l codewords
// each over d/m-dimensional subspaces. Codes are one byte per subquantizer,
// so l is capped at 256.
struct PQCodebook {
    uint32_t m = 0;
    uint32_t l = 0;
    uint32_t sub_dim = 0;
    std::vector<float> tables;  // m * l * sub_dim floats

    uint32_t d() const { return m * sub_dim; }
    const float* codeword(uint32_t j, uint32_t code) const {
        return tables.data() + (uint64_t{j} * l + code) * sub_dim;
    }
};

// Per-cluster postings: vector ids, their codes, and the query-independent
// part of the decomposed distance (one float per vector).
struct InvertedLists {
    uint32_t m = 0;
    std::vector<std::vector<uint32_t>> ids;
    std::vector<std::vector<uint8_t>> codes;
    std::vector<std::vector<float>> cached;

    uint32_t n_cluster() const { return static_cast<uint32_t>(ids.size()); }
    uint64_t total() const {
        uint64_t t = 0;
        for (const auto& v : ids) t += v.size();
        return t;
    }
};

// Query-dependent lookup table: lut(j, code) = -2 <q_j, codeword_j(code)>,
// built from the raw query so it is shared by every scanned cluster.
struct TermDLut {
    uint32_t m = 0;
    uint32_t l = 0;
    std::vector<float> values;  // m * l

    float at(uint32_t j, uint32_t code) const {
        return values[uint64_t{j} * l + code];
    }
};

PQCodebook train_codebooks(const Residuals& residuals, uint32_t m, uint32_t l,
                           uint32_t max_iters, uint64_t seed);

// Nearest codeword per subspace; n * m bytes, row-major by vector.
std::vector<uint8_t> encode(const PQCodebook& cb, const Residuals& residuals);

// Reconstructs one residual from its code into out[0..d).
void decode(const PQCodebook& cb, const uint8_t* code, float* out);

// Query-independent terms for one vector: squared codeword norms plus twice
// the inner product between the centroid and the reconstruction.
float precompute_term(const PQCodebook& cb, const float* centroid,
                      const uint8_t* code);

TermDLut build_termd_lut(const PQCodebook& cb, const float* query);

// Reference evaluation through explicit reconstruction:
// || (q - c) - decode(code) ||^2.
float adc_naive(const PQCodebook& cb, const float* query,
                const float* centroid, const uint8_t* code);

// Groups codes by cluster and fills in the cached term per vector.
InvertedLists build_inverted_lists(const PQCodebook& cb,
                                   const ClusterModel& clusters,
                                   const std::vector<uint8_t>& codes);

// Scans one cluster's postings. term_a is the query-to-centroid squared
// distance; each vector costs m table lookups plus two adds.
void scan_cluster(const InvertedLists& lists, uint32_t cluster, float term_a,
                  const TermDLut& lut, detail::TopKFirstTie& out);

}  // namespace zoom
