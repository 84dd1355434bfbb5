#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/program_options.hpp>

#include "zoom/bench.hpp"
#include "zoom/core.hpp"
#include "zoom/index.hpp"

namespace po = boost::program_options;

namespace {

zoom::DatasetFormat parse_format(const std::string& s) {
    if (s == "fvecs") return zoom::DatasetFormat::fvecs;
    if (s == "bvecs") return zoom::DatasetFormat::bvecs;
    if (s == "raw") return zoom::DatasetFormat::raw_f32;
    throw zoom::ArgumentError("unknown --format '" + s +
                              "' (expected fvecs, bvecs, or raw)");
}

zoom::IoMode parse_io_mode(const std::string& s) {
    if (s == "direct") return zoom::IoMode::direct;
    if (s == "buffered") return zoom::IoMode::buffered;
    throw zoom::ArgumentError("unknown --io-mode '" + s +
                              "' (expected direct or buffered)");
}

std::vector<uint32_t> parse_u32_list(const std::string& csv, const char* flag) {
    std::vector<uint32_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            const unsigned long v = std::stoul(tok);
            if (v == 0 || v > UINT32_MAX) throw std::out_of_range(tok);
            out.push_back(static_cast<uint32_t>(v));
        } catch (const std::exception&) {
            throw zoom::ArgumentError(std::string("bad value '") + tok +
                                      "' in " + flag);
        }
    }
    if (out.empty())
        throw zoom::ArgumentError(std::string(flag) + " must list at least one value");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw zoom::StorageError("cannot create " + path);
    out << text;
    if (!out) throw zoom::StorageError("write error while saving " + path);
}

void usage(std::ostream& os) {
    os << "usage: zoomann <verb> [flags]\n"
          "\n"
          "verbs:\n"
          "  synth    generate a Gaussian-blob dataset\n"
          "           --n N --d D --out PATH [--format fvecs|raw] [--seed S] [--blobs B]\n"
          "  oracle   exact ground truth for a query set\n"
          "           --dataset P --queries P --k K --out TRUTH [--format F]\n"
          "  build    train an index and write container + full-view store\n"
          "           --dataset P --out INDEX [--store P] [--format F] [--seed S]\n"
          "           [--n-cluster C] [--m M] [--l L] [--out-degree O]\n"
          "           [--kmeans-iters I] [--pq-iters I] [--ef-construction E]\n"
          "  query    search and print per-neighbor CSV\n"
          "           --index P --queries P [--k K] [--r R] [--nscan N]\n"
          "           [--ef-search E] [--io-mode direct|buffered] [--format F] [--out CSV]\n"
          "  bench    recall/latency/memory/VQ over a parameter grid\n"
          "           --index P --queries P --truth P [--k list] [--r list]\n"
          "           [--nscan list] [--ef-search list] [--mode full|preview|both]\n"
          "           [--warmup W] [--threads T] [--io-mode M] [--out CSV]\n"
          "  tune     two-step parameter search under a memory target\n"
          "           --dataset P --queries P --truth P [--k K] [--format F]\n"
          "           [--memory-target BYTES] [--recall-target F] [--retries N]\n"
          "           [--ef-grid list] [--nscan-grid list] [--r-grid list]\n"
          "           [--work-dir DIR] [--seed S] [--out CSV]\n";
}

po::variables_map parse(const std::vector<std::string>& args,
                        const po::options_description& desc) {
    po::variables_map vm;
    po::store(po::command_line_parser(args).options(desc).run(), vm);
    po::notify(vm);
    return vm;
}

int cmd_synth(const std::vector<std::string>& args) {
    po::options_description desc("synth");
    uint64_t n = 0, d = 0, seed = 0, blobs = 64;
    std::string out, format = "fvecs";
    desc.add_options()
        ("n", po::value(&n)->required())
        ("d", po::value(&d)->required())
        ("out", po::value(&out)->required())
        ("format", po::value(&format))
        ("seed", po::value(&seed))
        ("blobs", po::value(&blobs));
    parse(args, desc);

    const auto ds = zoom::generate_synthetic(n, d, blobs, seed);
    zoom::save_dataset(ds, out, parse_format(format));
    std::cout << "wrote " << ds.n << "x" << ds.d << " vectors to " << out << "\n";
    return 0;
}

int cmd_oracle(const std::vector<std::string>& args) {
    po::options_description desc("oracle");
    std::string dataset, queries, out, format = "fvecs";
    uint32_t k = 0;
    desc.add_options()
        ("dataset", po::value(&dataset)->required())
        ("queries", po::value(&queries)->required())
        ("k", po::value(&k)->required())
        ("out", po::value(&out)->required())
        ("format", po::value(&format));
    parse(args, desc);

    const auto fmt = parse_format(format);
    const auto ds = zoom::load_dataset(dataset, fmt);
    const auto qs = zoom::load_dataset(queries, fmt);
    const auto gt = zoom::run_oracle(ds, qs, k);
    zoom::write_ground_truth(out, gt);
    std::cout << "wrote exact top-" << k << " for " << gt.nq << " queries to "
              << out << "\n";
    return 0;
}

int cmd_build(const std::vector<std::string>& args) {
    po::options_description desc("build");
    std::string dataset, out, store, format = "fvecs";
    zoom::ZoomConfig config;
    config.n_cluster = 0;  // 0: default to round(sqrt(n))
    zoom::BuildOptions opts;
    desc.add_options()
        ("dataset", po::value(&dataset)->required())
        ("out", po::value(&out)->required())
        ("store", po::value(&store))
        ("format", po::value(&format))
        ("n-cluster", po::value(&config.n_cluster))
        ("m", po::value(&config.m))
        ("l", po::value(&config.l))
        ("out-degree", po::value(&config.out_d))
        ("seed", po::value(&config.seed))
        ("kmeans-iters", po::value(&opts.kmeans_iters))
        ("pq-iters", po::value(&opts.pq_iters))
        ("ef-construction", po::value(&opts.ef_construction));
    parse(args, desc);

    const auto ds = zoom::load_dataset(dataset, parse_format(format));
    if (config.n_cluster == 0)
        config.n_cluster = static_cast<uint32_t>(
            std::max<long long>(1, std::llround(std::sqrt(double(ds.n)))));
    if (store.empty()) store = out + ".zfv";

    const auto t0 = std::chrono::steady_clock::now();
    auto index = zoom::ZoomIndex::build(ds, config, store, opts);
    index.save(out);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();

    std::cout << "built index: n=" << index.n() << " d=" << index.d()
              << " n_cluster=" << config.n_cluster << " m=" << config.m
              << " l=" << config.l << " out_degree=" << config.out_d
              << " seed=" << config.seed << "\n"
              << "memory_bytes=" << index.memory_bytes()
              << " rerank_batch=" << index.plan().b << " io_mode="
              << (index.store().mode() == zoom::IoMode::direct ? "direct"
                                                               : "buffered")
              << "\n"
              << "index=" << out << " store=" << store << " build_s=" << secs
              << "\n";
    return 0;
}

int cmd_query(const std::vector<std::string>& args) {
    po::options_description desc("query");
    std::string index_path, queries, out, format = "fvecs", io_mode = "direct";
    zoom::SearchParams params;
    desc.add_options()
        ("index", po::value(&index_path)->required())
        ("queries", po::value(&queries)->required())
        ("format", po::value(&format))
        ("io-mode", po::value(&io_mode))
        ("k", po::value(&params.k))
        ("r", po::value(&params.r))
        ("nscan", po::value(&params.nscan))
        ("ef-search", po::value(&params.ef_search))
        ("out", po::value(&out));
    parse(args, desc);

    auto index = zoom::ZoomIndex::load(index_path, parse_io_mode(io_mode));
    const auto qs = zoom::load_dataset(queries, parse_format(format));
    ZOOM_ARG_CHECK(qs.d == index.d(), "query dimension mismatch with index");

    std::ostringstream csv;
    csv << "query,rank,id,dist,t_cs_us,t_vs_us,t_rerank_us\n";
    csv << std::setprecision(10);
    for (uint64_t q = 0; q < qs.n; ++q) {
        const auto res = index.search(qs.row(q), params);
        for (size_t rank = 0; rank < res.neighbors.size(); ++rank) {
            csv << q << ',' << rank << ',' << res.neighbors[rank].first << ','
                << res.neighbors[rank].second << ',' << res.t_cs_us << ','
                << res.t_vs_us << ',' << res.t_rerank_us << '\n';
        }
    }
    if (out.empty())
        std::cout << csv.str();
    else
        write_text(out, csv.str());
    return 0;
}

int cmd_bench(const std::vector<std::string>& args) {
    po::options_description desc("bench");
    std::string index_path, queries, truth, out, format = "fvecs";
    std::string io_mode = "direct", mode = "full";
    std::string k_list = "10", r_list = "100", nscan_list = "16", ef_list = "64";
    uint64_t warmup = UINT64_MAX;
    uint32_t threads = 1;
    desc.add_options()
        ("index", po::value(&index_path)->required())
        ("queries", po::value(&queries)->required())
        ("truth", po::value(&truth)->required())
        ("format", po::value(&format))
        ("io-mode", po::value(&io_mode))
        ("mode", po::value(&mode))
        ("k", po::value(&k_list))
        ("r", po::value(&r_list))
        ("nscan", po::value(&nscan_list))
        ("ef-search", po::value(&ef_list))
        ("warmup", po::value(&warmup))
        ("threads", po::value(&threads))
        ("out", po::value(&out));
    parse(args, desc);
    if (mode != "full" && mode != "preview" && mode != "both")
        throw zoom::ArgumentError("unknown --mode '" + mode +
                                  "' (expected full, preview, or both)");

    auto index = zoom::ZoomIndex::load(index_path, parse_io_mode(io_mode));
    const auto qs = zoom::load_dataset(queries, parse_format(format));
    const auto gt = zoom::read_ground_truth(truth);
    const uint64_t warm = std::min(warmup, qs.n);

    zoom::BenchReport report;
    for (const uint32_t k : parse_u32_list(k_list, "--k")) {
        for (const uint32_t r : parse_u32_list(r_list, "--r")) {
            for (const uint32_t nscan : parse_u32_list(nscan_list, "--nscan")) {
                for (const uint32_t ef : parse_u32_list(ef_list, "--ef-search")) {
                    const zoom::SearchParams params{k, r, nscan, ef};
                    if (mode == "full" || mode == "both")
                        report.rows.push_back(zoom::run_bench_point(
                            index, qs, gt, params, false, warm, threads));
                    if (mode == "preview" || mode == "both")
                        report.rows.push_back(zoom::run_bench_point(
                            index, qs, gt, params, true, warm, threads));
                }
            }
        }
    }

    if (out.empty()) {
        std::cout << zoom::to_csv(report);
    } else {
        write_text(out, zoom::to_csv(report));
        std::cout << zoom::to_table(report);
    }
    return 0;
}

int cmd_tune(const std::vector<std::string>& args) {
    po::options_description desc("tune");
    std::string dataset, queries, truth, out, format = "fvecs";
    std::string work_dir = ".zoomann_tune";
    std::string ef_grid = "32,64,128", nscan_grid = "4,8,16,32,64";
    std::string r_grid = "10,50,100";
    zoom::TuneSpec spec;
    desc.add_options()
        ("dataset", po::value(&dataset)->required())
        ("queries", po::value(&queries)->required())
        ("truth", po::value(&truth)->required())
        ("format", po::value(&format))
        ("k", po::value(&spec.k))
        ("memory-target", po::value(&spec.memory_target_bytes))
        ("recall-target", po::value(&spec.recall_target))
        ("retries", po::value(&spec.max_retries))
        ("ef-grid", po::value(&ef_grid))
        ("nscan-grid", po::value(&nscan_grid))
        ("r-grid", po::value(&r_grid))
        ("work-dir", po::value(&work_dir))
        ("seed", po::value(&spec.seed))
        ("out", po::value(&out));
    parse(args, desc);

    const auto fmt = parse_format(format);
    const auto ds = zoom::load_dataset(dataset, fmt);
    const auto qs = zoom::load_dataset(queries, fmt);
    const auto gt = zoom::read_ground_truth(truth);
    spec.ef_search_grid = parse_u32_list(ef_grid, "--ef-grid");
    spec.nscan_grid = parse_u32_list(nscan_grid, "--nscan-grid");
    spec.r_grid = parse_u32_list(r_grid, "--r-grid");
    if (spec.memory_target_bytes == 0)
        spec.memory_target_bytes = 2 * zoom::tune_min_memory(ds.n, ds.d);

    const auto result = zoom::run_tune(ds, qs, gt, spec, work_dir);

    std::ostringstream csv;
    csv << "n_cluster,m,l,out_degree,k,r,nscan,ef_search,recall,mean_ms,"
           "memory_bytes,vq\n";
    csv << std::setprecision(10);
    for (const auto& row : result.evaluated) {
        csv << row.config.n_cluster << ',' << row.config.m << ','
            << row.config.l << ',' << row.config.out_d << ',' << row.params.k
            << ',' << row.params.r << ',' << row.params.nscan << ','
            << row.params.ef_search << ',' << row.recall << ',' << row.mean_ms
            << ',' << row.memory_bytes << ',' << row.vq << '\n';
    }
    if (!out.empty()) write_text(out, csv.str());

    std::cout << (result.success ? "tune: success" : "tune: no qualifying configuration")
              << " (evaluated " << result.evaluated.size() << " grid points, mot="
              << result.final_mot << ", escalations=" << result.escalations
              << ")\n";
    if (!result.evaluated.empty()) {
        const auto& c = result.chosen;
        std::cout << (result.success ? "chosen: " : "best found: ")
                  << "n_cluster=" << c.config.n_cluster << " m=" << c.config.m
                  << " l=" << c.config.l << " out_degree=" << c.config.out_d
                  << " k=" << c.params.k << " r=" << c.params.r
                  << " nscan=" << c.params.nscan
                  << " ef_search=" << c.params.ef_search
                  << " recall=" << c.recall << " mean_ms=" << c.mean_ms
                  << " memory_bytes=" << c.memory_bytes << " vq=" << c.vq
                  << "\n";
    }
    if (!out.empty()) std::cout << "report=" << out << "\n";
    return result.success ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        usage(std::cerr);
        return 2;
    }
    const std::string verb = argv[1];
    if (verb == "-h" || verb == "--help" || verb == "help") {
        usage(std::cout);
        return 0;
    }
    const std::vector<std::string> rest(argv + 2, argv + argc);
    try {
        if (verb == "synth") return cmd_synth(rest);
        if (verb == "oracle") return cmd_oracle(rest);
        if (verb == "build") return cmd_build(rest);
        if (verb == "query") return cmd_query(rest);
        if (verb == "bench") return cmd_bench(rest);
        if (verb == "tune") return cmd_tune(rest);
        std::cerr << "error: unknown verb '" << verb << "'\n";
        usage(std::cerr);
        return 2;
    } catch (const po::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const zoom::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
