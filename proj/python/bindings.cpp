#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <utility>

#include "zoom/bench.hpp"
#include "zoom/common.hpp"
#include "zoom/core.hpp"
#include "zoom/index.hpp"

namespace py = pybind11;
using namespace zoom;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

VectorDataset to_dataset(const FloatArray& arr) {
    const auto info = arr.request();
    if (info.ndim != 2)
        throw py::value_error("expected a 2-d float array of shape (n, d)");
    VectorDataset ds;
    ds.n = static_cast<uint64_t>(info.shape[0]);
    ds.d = static_cast<uint64_t>(info.shape[1]);
    const auto* p = static_cast<const float*>(info.ptr);
    ds.data.assign(p, p + ds.n * ds.d);
    return ds;
}

py::array_t<float> from_dataset(const VectorDataset& ds) {
    py::array_t<float> out({static_cast<py::ssize_t>(ds.n),
                            static_cast<py::ssize_t>(ds.d)});
    std::memcpy(out.mutable_data(), ds.data.data(),
                ds.data.size() * sizeof(float));
    return out;
}

const float* query_ptr(const FloatArray& q, uint64_t d) {
    const auto info = q.request();
    const bool flat = info.ndim == 1 && info.shape[0] == py::ssize_t(d);
    const bool row = info.ndim == 2 && info.shape[0] == 1 &&
                     info.shape[1] == py::ssize_t(d);
    if (!flat && !row)
        throw py::value_error("query must have shape (d,) or (1, d)");
    return static_cast<const float*>(info.ptr);
}

DatasetFormat parse_format(const std::string& name) {
    if (name == "fvecs") return DatasetFormat::fvecs;
    if (name == "bvecs") return DatasetFormat::bvecs;
    if (name == "raw") return DatasetFormat::raw_f32;
    throw py::value_error("format must be 'fvecs', 'bvecs', or 'raw'");
}

IoMode parse_io_mode(const std::string& name) {
    if (name == "direct") return IoMode::direct;
    if (name == "buffered") return IoMode::buffered;
    throw py::value_error("io_mode must be 'direct' or 'buffered'");
}

py::tuple pack_neighbors(const std::vector<std::pair<uint32_t, float>>& nb) {
    const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(nb.size())};
    py::array_t<uint32_t> ids(shape);
    py::array_t<float> dists(shape);
    auto* pi = ids.mutable_data();
    auto* pd = dists.mutable_data();
    for (size_t i = 0; i < nb.size(); ++i) {
        pi[i] = nb[i].first;
        pd[i] = nb[i].second;
    }
    return py::make_tuple(std::move(ids), std::move(dists));
}

SearchParams make_params(uint32_t k, uint32_t r, uint32_t nscan,
                         uint32_t ef_search) {
    SearchParams p;
    p.k = k;
    p.r = r;
    p.nscan = nscan;
    p.ef_search = ef_search;
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Two-stage vector search: compact in-memory preview plus "
              "on-disk exact rerank.";

    py::register_exception<ArgumentError>(m, "ArgumentError",
                                          PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);
    py::register_exception<StorageError>(m, "StorageError",
                                         PyExc_RuntimeError);

    m.def(
        "generate_synthetic",
        [](uint64_t n, uint64_t d, uint64_t n_clusters_true, uint64_t seed) {
            return from_dataset(generate_synthetic(n, d, n_clusters_true, seed));
        },
        py::arg("n"), py::arg("d"), py::arg("n_clusters_true"),
        py::arg("seed"));

    m.def(
        "load_dataset",
        [](const std::string& path, const std::string& format) {
            return from_dataset(load_dataset(path, parse_format(format)));
        },
        py::arg("path"), py::arg("format") = "fvecs");

    m.def(
        "save_dataset",
        [](const std::string& path, const FloatArray& arr,
           const std::string& format) {
            save_dataset(to_dataset(arr), path, parse_format(format));
        },
        py::arg("path"), py::arg("data"), py::arg("format") = "fvecs");

    m.def(
        "exact_topk",
        [](const FloatArray& data, const FloatArray& query, uint32_t k) {
            const auto ds = to_dataset(data);
            return pack_neighbors(exact_topk(ds, query_ptr(query, ds.d), k));
        },
        py::arg("data"), py::arg("query"), py::arg("k"));

    m.def(
        "oracle",
        [](const FloatArray& data, const FloatArray& queries, uint32_t k) {
            const auto gt = run_oracle(to_dataset(data), to_dataset(queries), k);
            py::array_t<uint32_t> ids({static_cast<py::ssize_t>(gt.nq),
                                       static_cast<py::ssize_t>(gt.k)});
            py::array_t<float> dists({static_cast<py::ssize_t>(gt.nq),
                                      static_cast<py::ssize_t>(gt.k)});
            std::memcpy(ids.mutable_data(), gt.ids.data(),
                        gt.ids.size() * sizeof(uint32_t));
            std::memcpy(dists.mutable_data(), gt.dists.data(),
                        gt.dists.size() * sizeof(float));
            return py::make_tuple(std::move(ids), std::move(dists));
        },
        py::arg("data"), py::arg("queries"), py::arg("k"));

    m.def(
        "recall",
        [](const std::vector<uint32_t>& found,
           const std::vector<uint32_t>& truth, uint32_t k) {
            return recall(found, truth, k);
        },
        py::arg("found"), py::arg("truth"), py::arg("k"));

    m.def(
        "memory_cost",
        [](uint64_t n, uint64_t d, uint32_t n_cluster, uint32_t m_, uint32_t l,
           uint32_t out_d, uint32_t f) {
            ZoomConfig cfg;
            cfg.n_cluster = n_cluster;
            cfg.m = m_;
            cfg.l = l;
            cfg.out_d = out_d;
            return memory_cost(cfg, n, d, f);
        },
        py::arg("n"), py::arg("d"), py::arg("n_cluster"), py::arg("m"),
        py::arg("l") = 256, py::arg("out_d") = 10, py::arg("f") = 4);

    m.def("vq", &vq, py::arg("latency_ms"), py::arg("memory_bytes"),
          py::arg("machine_memory_bytes") = kMachineMemoryBytes);

    py::class_<ZoomIndex>(m, "Index")
        .def_static(
            "build",
            [](const FloatArray& data, const std::string& store_path,
               uint32_t n_cluster, uint32_t m_, uint32_t l, uint32_t out_d,
               uint64_t seed, uint32_t kmeans_iters, uint32_t pq_iters,
               uint32_t ef_construction, bool autotune_rerank) {
                ZoomConfig cfg;
                cfg.n_cluster = n_cluster;
                cfg.m = m_;
                cfg.l = l;
                cfg.out_d = out_d;
                cfg.seed = seed;
                BuildOptions opts;
                opts.kmeans_iters = kmeans_iters;
                opts.pq_iters = pq_iters;
                opts.ef_construction = ef_construction;
                opts.autotune_rerank = autotune_rerank;
                return ZoomIndex::build(to_dataset(data), cfg, store_path,
                                        opts);
            },
            py::arg("data"), py::arg("store_path"), py::arg("n_cluster"),
            py::arg("m"), py::arg("l") = 256, py::arg("out_d") = 10,
            py::arg("seed") = 0, py::arg("kmeans_iters") = 25,
            py::arg("pq_iters") = 25, py::arg("ef_construction") = 200,
            py::arg("autotune_rerank") = true)
        .def_static(
            "load",
            [](const std::string& path, const std::string& io_mode) {
                return ZoomIndex::load(path, parse_io_mode(io_mode));
            },
            py::arg("path"), py::arg("io_mode") = "direct")
        .def("save", &ZoomIndex::save, py::arg("path"))
        .def(
            "search",
            [](ZoomIndex& self, const FloatArray& query, uint32_t k,
               uint32_t r, uint32_t nscan, uint32_t ef_search) {
                const auto res = self.search(query_ptr(query, self.d()),
                                             make_params(k, r, nscan, ef_search));
                return pack_neighbors(res.neighbors);
            },
            py::arg("query"), py::arg("k") = 10, py::arg("r") = 100,
            py::arg("nscan") = 16, py::arg("ef_search") = 64)
        .def(
            "search_preview",
            [](const ZoomIndex& self, const FloatArray& query, uint32_t k,
               uint32_t r, uint32_t nscan, uint32_t ef_search) {
                const auto res =
                    self.search_preview(query_ptr(query, self.d()),
                                        make_params(k, r, nscan, ef_search));
                return pack_neighbors(res.neighbors);
            },
            py::arg("query"), py::arg("k") = 10, py::arg("r") = 100,
            py::arg("nscan") = 16, py::arg("ef_search") = 64)
        .def_property_readonly("n", &ZoomIndex::n)
        .def_property_readonly("d", &ZoomIndex::d)
        .def_property_readonly("memory_bytes", &ZoomIndex::memory_bytes)
        .def_property_readonly("config", [](const ZoomIndex& self) {
            const auto& c = self.config();
            py::dict out;
            out["n_cluster"] = c.n_cluster;
            out["m"] = c.m;
            out["l"] = c.l;
            out["out_d"] = c.out_d;
            out["seed"] = c.seed;
            return out;
        });
}
