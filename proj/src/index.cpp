#include "zoom/index.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zoom/detail/leio.hpp"
#include "zoom/detail/topk.hpp"

namespace zoom {

namespace {

using Clock = std::chrono::steady_clock;

constexpr char kMagic[4] = {'Z', 'O', 'O', 'M'};
constexpr uint32_t kVersion = 1;

enum : uint32_t {
    kSecCentroids = 1,
    kSecRouting = 2,
    kSecCodebook = 3,
    kSecLists = 4,
    kSecStore = 5,
};

double us_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
}

uint64_t checksum_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open for fingerprint: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h = fnv1a64(buf.data(), static_cast<size_t>(in.gcount()), h);
    }
    if (in.bad()) throw StorageError("read error while fingerprinting " + path);
    return h;
}

}  // namespace

ZoomIndex ZoomIndex::build(const VectorDataset& dataset, const ZoomConfig& config,
                           const std::string& store_path,
                           const BuildOptions& opts) {
    ZOOM_ARG_CHECK(dataset.n > 0 && dataset.d > 0, "build: empty dataset");
    ZOOM_ARG_CHECK(dataset.data.size() == dataset.n * dataset.d,
                   "build: dataset buffer does not match its dimensions");
    ZOOM_ARG_CHECK(config.n_cluster >= 1 && uint64_t{config.n_cluster} <= dataset.n,
                   "build: n_cluster must be in [1, n]");
    ZOOM_ARG_CHECK(config.m >= 1 && dataset.d % config.m == 0,
                   "build: d must be divisible by m");
    ZOOM_ARG_CHECK(config.l >= 1 && config.l <= 256, "build: l must be in [1, 256]");
    ZOOM_ARG_CHECK(uint64_t{config.l} <= dataset.n, "build: l exceeds dataset size");
    ZOOM_ARG_CHECK(config.out_d >= 2, "build: out_d must be >= 2");
    ZOOM_ARG_CHECK(!store_path.empty(), "build: store path is empty");

    ZoomIndex idx;
    idx.n_ = dataset.n;
    idx.d_ = dataset.d;
    idx.config_ = config;

    idx.clusters_ =
        kmeans_train(dataset, config.n_cluster, opts.kmeans_iters, config.seed);
    idx.routing_ = build_routing(idx.clusters_.centroids.data(), config.n_cluster,
                                 static_cast<uint32_t>(dataset.d), config.out_d,
                                 opts.ef_construction, config.seed + 1);
    connectivity_augment(idx.routing_, idx.clusters_.centroids.data(),
                         static_cast<uint32_t>(dataset.d));

    const Residuals residuals = compute_residuals(dataset, idx.clusters_);
    idx.codebook_ = train_codebooks(residuals, config.m, config.l, opts.pq_iters,
                                    config.seed + 2);
    const auto codes = encode(idx.codebook_, residuals);
    idx.lists_ = build_inverted_lists(idx.codebook_, idx.clusters_, codes);

    FullViewStore::write(store_path, dataset);
    idx.store_ = FullViewStore::open(store_path, IoMode::direct);
    if (opts.autotune_rerank) {
        const auto r = static_cast<uint32_t>(std::min<uint64_t>(100, dataset.n));
        idx.plan_ = FullViewStore::autotune_plan(idx.store_, r, config.seed + 3);
    }
    return idx;
}

QueryResult ZoomIndex::search(const float* query, const SearchParams& params) {
    return search_with(query, params, store_);
}

QueryResult ZoomIndex::search_with(const float* query, const SearchParams& params,
                                   FullViewStore& fv) const {
    params.validate();
    ZOOM_ARG_CHECK(query != nullptr, "search: null query");
    ZOOM_ARG_CHECK(fv.n() > 0, "search: no open full-view store");

    QueryResult out;
    const auto t0 = Clock::now();
    const auto routed =
        route(routing_, clusters_.centroids.data(), static_cast<uint32_t>(d_),
              query, std::min(params.nscan, config_.n_cluster), params.ef_search);
    const auto t1 = Clock::now();

    const TermDLut lut = build_termd_lut(codebook_, query);
    detail::TopKFirstTie preview(params.r);
    for (const auto& [cid, term_a] : routed)
        scan_cluster(lists_, cid, term_a, lut, preview);
    auto cand = preview.take_sorted();
    const auto t2 = Clock::now();

    std::vector<uint32_t> ids;
    ids.reserve(cand.size());
    for (const auto& [id, dist] : cand) ids.push_back(id);
    out.neighbors = fv.rerank(query, std::move(ids), params.k, plan_);
    const auto t3 = Clock::now();

    out.t_cs_us = us_between(t0, t1);
    out.t_vs_us = us_between(t1, t2);
    out.t_rerank_us = us_between(t2, t3);
    return out;
}

QueryResult ZoomIndex::search_preview(const float* query,
                                      const SearchParams& params) const {
    params.validate();
    ZOOM_ARG_CHECK(query != nullptr, "search_preview: null query");

    QueryResult out;
    const auto t0 = Clock::now();
    const auto routed =
        route(routing_, clusters_.centroids.data(), static_cast<uint32_t>(d_),
              query, std::min(params.nscan, config_.n_cluster), params.ef_search);
    const auto t1 = Clock::now();

    const TermDLut lut = build_termd_lut(codebook_, query);
    detail::TopKFirstTie preview(params.r);
    for (const auto& [cid, term_a] : routed)
        scan_cluster(lists_, cid, term_a, lut, preview);
    out.neighbors = preview.take_sorted();
    if (out.neighbors.size() > params.k) out.neighbors.resize(params.k);
    const auto t2 = Clock::now();

    out.t_cs_us = us_between(t0, t1);
    out.t_vs_us = us_between(t1, t2);
    return out;
}

void ZoomIndex::save(const std::string& path) const {
    ZOOM_ARG_CHECK(!path.empty(), "save: path is empty");
    ZOOM_ARG_CHECK(store_.n() > 0, "save: index has no open store");
    namespace fs = std::filesystem;
    using namespace detail;

    const fs::path index_abs = fs::weakly_canonical(fs::absolute(path));
    const fs::path store_abs = fs::weakly_canonical(fs::absolute(store_.path()));
    const std::string stored_path =
        store_abs.parent_path() == index_abs.parent_path()
            ? store_abs.filename().string()
            : store_abs.string();
    const uint64_t fingerprint = checksum_file(store_.path());

    std::ostringstream sec_centroids(std::ios::binary);
    put_f32_array(sec_centroids, clusters_.centroids.data(),
                  clusters_.centroids.size());

    std::ostringstream sec_routing(std::ios::binary);
    put_u32(sec_routing, routing_.entry_point);
    put_u32(sec_routing, static_cast<uint32_t>(routing_.layers.size()));
    put_bytes(sec_routing, routing_.node_levels.data(), routing_.node_levels.size());
    const bool narrow_ids = config_.n_cluster <= 65536;
    for (const auto& layer : routing_.layers) {
        for (const auto& edges : layer) {
            put_varint(sec_routing, edges.size());
            for (uint32_t v : edges) {
                if (narrow_ids)
                    put_u16(sec_routing, static_cast<uint16_t>(v));
                else
                    put_u32(sec_routing, v);
            }
        }
    }

    std::ostringstream sec_codebook(std::ios::binary);
    put_u32(sec_codebook, codebook_.m);
    put_u32(sec_codebook, codebook_.l);
    put_u32(sec_codebook, codebook_.sub_dim);
    put_f32_array(sec_codebook, codebook_.tables.data(), codebook_.tables.size());

    std::ostringstream sec_lists(std::ios::binary);
    for (uint32_t c = 0; c < lists_.n_cluster(); ++c) {
        const auto& ids = lists_.ids[c];
        put_varint(sec_lists, ids.size());
        uint32_t prev = 0;
        for (size_t i = 0; i < ids.size(); ++i) {
            put_varint(sec_lists, i == 0 ? ids[0] : ids[i] - prev);
            prev = ids[i];
        }
        put_bytes(sec_lists, lists_.codes[c].data(), lists_.codes[c].size());
        put_f32_array(sec_lists, lists_.cached[c].data(), lists_.cached[c].size());
    }

    std::ostringstream sec_store(std::ios::binary);
    put_varint(sec_store, stored_path.size());
    put_bytes(sec_store, stored_path.data(), stored_path.size());
    put_u64(sec_store, fingerprint);
    put_u64(sec_store, store_.n());
    put_u64(sec_store, store_.d());

    const std::pair<uint32_t, std::string> sections[] = {
        {kSecCentroids, std::move(sec_centroids).str()},
        {kSecRouting, std::move(sec_routing).str()},
        {kSecCodebook, std::move(sec_codebook).str()},
        {kSecLists, std::move(sec_lists).str()},
        {kSecStore, std::move(sec_store).str()},
    };

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot create " + tmp);
        put_bytes(out, kMagic, 4);
        put_u32(out, kVersion);
        put_u64(out, n_);
        put_u64(out, d_);
        put_u32(out, config_.n_cluster);
        put_u32(out, config_.m);
        put_u32(out, config_.l);
        put_u32(out, config_.out_d);
        put_u64(out, config_.seed);
        put_u32(out, plan_.b);
        put_u32(out, static_cast<uint32_t>(std::size(sections)));
        for (const auto& [tag, payload] : sections) {
            put_u32(out, tag);
            put_u64(out, payload.size());
            put_bytes(out, payload.data(), payload.size());
        }
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw StorageError("write error while saving " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw StorageError("cannot move index into place at " + path);
    }
}

ZoomIndex ZoomIndex::load(const std::string& path, IoMode io_mode) {
    namespace fs = std::filesystem;
    using namespace detail;

    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open index: " + path);

    char magic[4];
    get_bytes(in, magic, 4, "index magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("not an index container: " + path);
    const uint32_t version = get_u32(in, "index version");
    if (version != kVersion)
        throw FormatError("unsupported index version " + std::to_string(version) +
                          " in " + path);

    ZoomIndex idx;
    idx.n_ = get_u64(in, "vector count");
    idx.d_ = get_u64(in, "dimension");
    idx.config_.n_cluster = get_u32(in, "n_cluster");
    idx.config_.m = get_u32(in, "m");
    idx.config_.l = get_u32(in, "l");
    idx.config_.out_d = get_u32(in, "out_d");
    idx.config_.seed = get_u64(in, "seed");
    idx.plan_.b = get_u32(in, "rerank batch");
    if (idx.n_ == 0 || idx.d_ == 0 || idx.config_.n_cluster == 0)
        throw FormatError("index header has zero sizes: " + path);

    std::string store_rel;
    uint64_t fingerprint = 0, store_n = 0, store_d = 0;
    bool have[6] = {false, false, false, false, false, false};

    const uint32_t n_sections = get_u32(in, "section count");
    for (uint32_t s = 0; s < n_sections; ++s) {
        const uint32_t tag = get_u32(in, "section tag");
        const uint64_t len = get_u64(in, "section length");
        std::string payload(len, '\0');
        get_bytes(in, payload.data(), len, "section payload");
        std::istringstream is(std::move(payload), std::ios::binary);
        switch (tag) {
            case kSecCentroids: {
                idx.clusters_.n_cluster = idx.config_.n_cluster;
                idx.clusters_.d = idx.d_;
                idx.clusters_.centroids.resize(uint64_t{idx.config_.n_cluster} *
                                               idx.d_);
                if (len != idx.clusters_.centroids.size() * 4)
                    throw FormatError("centroid section size mismatch in " + path);
                get_f32_array(is, idx.clusters_.centroids.data(),
                              idx.clusters_.centroids.size(), "centroids");
                break;
            }
            case kSecRouting: {
                auto& g = idx.routing_;
                g.n = idx.config_.n_cluster;
                g.out_d = idx.config_.out_d;
                g.entry_point = get_u32(is, "entry point");
                if (g.entry_point >= g.n)
                    throw FormatError("routing entry point out of range in " + path);
                const uint32_t n_layers = get_u32(is, "layer count");
                if (n_layers == 0 || n_layers > 64)
                    throw FormatError("implausible routing layer count in " + path);
                g.node_levels.resize(g.n);
                get_bytes(is, g.node_levels.data(), g.n, "node levels");
                const bool narrow_ids = g.n <= 65536;
                g.layers.assign(n_layers,
                                std::vector<std::vector<uint32_t>>(g.n));
                for (auto& layer : g.layers) {
                    for (auto& edges : layer) {
                        const uint64_t deg = get_varint(is, "out-degree");
                        if (deg > g.n)
                            throw FormatError("implausible out-degree in " + path);
                        edges.resize(deg);
                        for (auto& v : edges) {
                            v = narrow_ids ? get_u16(is, "neighbor id")
                                           : get_u32(is, "neighbor id");
                            if (v >= g.n)
                                throw FormatError("neighbor id out of range in " +
                                                  path);
                        }
                    }
                }
                break;
            }
            case kSecCodebook: {
                auto& cb = idx.codebook_;
                cb.m = get_u32(is, "codebook m");
                cb.l = get_u32(is, "codebook l");
                cb.sub_dim = get_u32(is, "codebook sub_dim");
                if (cb.m != idx.config_.m || cb.l != idx.config_.l ||
                    uint64_t{cb.m} * cb.sub_dim != idx.d_)
                    throw FormatError("codebook shape mismatch in " + path);
                cb.tables.resize(uint64_t{cb.m} * cb.l * cb.sub_dim);
                get_f32_array(is, cb.tables.data(), cb.tables.size(),
                              "codebook tables");
                break;
            }
            case kSecLists: {
                auto& lists = idx.lists_;
                lists.m = idx.config_.m;
                lists.ids.resize(idx.config_.n_cluster);
                lists.codes.resize(idx.config_.n_cluster);
                lists.cached.resize(idx.config_.n_cluster);
                for (uint32_t c = 0; c < idx.config_.n_cluster; ++c) {
                    const uint64_t sz = get_varint(is, "list length");
                    if (sz > idx.n_)
                        throw FormatError("implausible list length in " + path);
                    lists.ids[c].resize(sz);
                    uint32_t prev = 0;
                    for (uint64_t i = 0; i < sz; ++i) {
                        const uint64_t delta = get_varint(is, "id delta");
                        const uint64_t id = i == 0 ? delta : uint64_t{prev} + delta;
                        if (id >= idx.n_)
                            throw FormatError("posting id out of range in " + path);
                        lists.ids[c][i] = static_cast<uint32_t>(id);
                        prev = static_cast<uint32_t>(id);
                    }
                    lists.codes[c].resize(sz * lists.m);
                    get_bytes(is, lists.codes[c].data(), lists.codes[c].size(),
                              "postings codes");
                    lists.cached[c].resize(sz);
                    get_f32_array(is, lists.cached[c].data(), sz, "cached terms");
                }
                break;
            }
            case kSecStore: {
                const uint64_t plen = get_varint(is, "store path length");
                if (plen > 65536)
                    throw FormatError("implausible store path length in " + path);
                store_rel.resize(plen);
                get_bytes(is, store_rel.data(), plen, "store path");
                fingerprint = get_u64(is, "store fingerprint");
                store_n = get_u64(is, "store rows");
                store_d = get_u64(is, "store dimension");
                break;
            }
            default:
                break;  // unknown section: ignore
        }
        if (tag >= 1 && tag <= 5) have[tag] = true;
    }
    for (uint32_t tag = 1; tag <= 5; ++tag) {
        if (!have[tag])
            throw FormatError("index container is missing a required section: " +
                              path);
    }
    if (store_n != idx.n_ || store_d != idx.d_)
        throw FormatError("store shape recorded in container disagrees with "
                          "index header: " + path);

    // Rebuild assignments and sizes from the postings.
    idx.clusters_.assignments.assign(idx.n_, UINT32_MAX);
    idx.clusters_.sizes.assign(idx.config_.n_cluster, 0);
    for (uint32_t c = 0; c < idx.config_.n_cluster; ++c) {
        for (uint32_t id : idx.lists_.ids[c]) {
            if (idx.clusters_.assignments[id] != UINT32_MAX)
                throw FormatError("vector listed in two clusters in " + path);
            idx.clusters_.assignments[id] = c;
        }
        idx.clusters_.sizes[c] =
            static_cast<uint32_t>(idx.lists_.ids[c].size());
    }
    for (uint64_t i = 0; i < idx.n_; ++i) {
        if (idx.clusters_.assignments[i] == UINT32_MAX)
            throw FormatError("vector missing from inverted lists in " + path);
    }

    fs::path store_path(store_rel);
    if (store_path.is_relative())
        store_path = fs::absolute(path).parent_path() / store_path;
    const std::string resolved = store_path.string();
    if (checksum_file(resolved) != fingerprint)
        throw FormatError("full-view store fingerprint mismatch for " + resolved);
    idx.store_ = FullViewStore::open(resolved, io_mode);
    if (idx.store_.n() != idx.n_ || idx.store_.d() != idx.d_)
        throw FormatError("full-view store shape mismatch for " + resolved);
    return idx;
}

}  // namespace zoom
