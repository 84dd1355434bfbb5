#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace zoom {

// Layered navigation graph over cluster centroids. Edges are directed; a
// node with level L appears on layers 0..L.
struct RoutingGraph {
    uint32_t n = 0;
    uint32_t out_d = 0;
    uint32_t entry_point = 0;
    std::vector<uint8_t> node_levels;
    // layers[l][node] = out-neighbors of node on layer l.
    std::vector<std::vector<std::vector<uint32_t>>> layers;

    uint32_t max_level() const {
        return layers.empty() ? 0 : static_cast<uint32_t>(layers.size()) - 1;
    }
};

// Condensation of the ground layer into strongly connected components.
struct CondensationInfo {
    uint32_t scc_count = 0;
    uint32_t sources = 0;  // components with no incoming condensation edge
    uint32_t sinks = 0;    // components with no outgoing condensation edge
};

struct GraphStats {
    uint32_t n_nodes = 0;
    uint32_t n_layers = 0;
    uint64_t ground_edges = 0;
    uint32_t min_out_degree = 0;
    uint32_t max_out_degree = 0;
    double avg_out_degree = 0.0;
    std::map<uint32_t, uint32_t> indegree_histogram;  // ground layer
    uint32_t zero_indegree_count = 0;
    CondensationInfo condensation;
};

// Builds the graph by inserting centroids in index order. Each inserted node
// receives up to out_d-1 edges to its nearest already-inserted neighbours on
// every layer it joins, plus one uniform-random long-range edge. Selected
// neighbours link back to the new node; lists over the out_d cap drop their
// farthest entry.
RoutingGraph build_routing(const float* centroids, uint32_t n, uint32_t d,
                           uint32_t out_d, uint32_t ef_construction,
                           uint64_t seed);

// Adds the minimum number of ground-layer edges needed to make the graph
// strongly connected. Endpoints are chosen by centroid proximity. Returns
// the number of edges added.
uint32_t connectivity_augment(RoutingGraph& graph, const float* centroids,
                              uint32_t d);

CondensationInfo condensation_info(const RoutingGraph& graph);

GraphStats graph_stats(const RoutingGraph& graph);

// Descends from the entry point and runs a bounded best-first search on the
// ground layer. Returns up to nscan (cluster id, squared distance) pairs in
// ascending (distance, id) order.
std::vector<std::pair<uint32_t, float>> route(const RoutingGraph& graph,
                                              const float* centroids,
                                              uint32_t d, const float* query,
                                              uint32_t nscan,
                                              uint32_t ef_search);

}  // namespace zoom
