#include "zoom/routing.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <random>

#include "zoom/common.hpp"
#include "zoom/detail/topk.hpp"

namespace zoom {

namespace {

uint32_t level_cap(uint32_t n, uint32_t out_d) {
    if (n <= 1) return 0;
    const double raw = std::log(static_cast<double>(n)) /
                       std::log(static_cast<double>(out_d));
    return static_cast<uint32_t>(std::ceil(raw - 1e-9));
}

// Reusable visited set; bumping the epoch clears it in O(1).
struct VisitMarks {
    std::vector<uint32_t> mark;
    uint32_t epoch = 0;
    explicit VisitMarks(uint32_t n) : mark(n, 0) {}
    void next() { ++epoch; }
    bool seen(uint32_t v) const { return mark[v] == epoch; }
    void set(uint32_t v) { mark[v] = epoch; }
};

uint32_t greedy_descend(const RoutingGraph& g, const float* centroids,
                        uint32_t d, const float* q, uint32_t layer,
                        uint32_t start) {
    uint32_t cur = start;
    float cur_dist = l2_sq(q, centroids + uint64_t{cur} * d, d);
    for (;;) {
        uint32_t best = cur;
        float best_dist = cur_dist;
        for (uint32_t v : g.layers[layer][cur]) {
            const float dist = l2_sq(q, centroids + uint64_t{v} * d, d);
            if (dist < best_dist || (dist == best_dist && v < best)) {
                best = v;
                best_dist = dist;
            }
        }
        if (best == cur) return cur;
        cur = best;
        cur_dist = best_dist;
    }
}

// Best-first expansion bounded by ef; runs until the candidate queue holds
// nothing closer than the worst kept result.
detail::TopK search_layer(const RoutingGraph& g, const float* centroids,
                          uint32_t d, const float* q, uint32_t layer,
                          uint32_t start, uint32_t ef, VisitMarks& marks) {
    marks.next();
    detail::TopK res(ef);
    using Cand = std::pair<float, uint32_t>;
    std::priority_queue<Cand, std::vector<Cand>, std::greater<Cand>> frontier;
    const float d0 = l2_sq(q, centroids + uint64_t{start} * d, d);
    marks.set(start);
    frontier.emplace(d0, start);
    res.consider(d0, start);
    while (!frontier.empty()) {
        const auto [dist, u] = frontier.top();
        frontier.pop();
        if (res.full() && dist > res.worst()) break;
        for (uint32_t v : g.layers[layer][u]) {
            if (marks.seen(v)) continue;
            marks.set(v);
            const float dv = l2_sq(q, centroids + uint64_t{v} * d, d);
            if (!res.full() || dv <= res.worst()) {
                frontier.emplace(dv, v);
                res.consider(dv, v);
            }
        }
    }
    return res;
}

// Strongly connected components of the ground layer (Kosaraju, iterative).
std::vector<uint32_t> scc_labels(const RoutingGraph& g, uint32_t& scc_count) {
    const uint32_t n = g.n;
    const auto& adj = g.layers[0];

    std::vector<uint32_t> order;
    order.reserve(n);
    std::vector<uint8_t> state(n, 0);
    std::vector<std::pair<uint32_t, uint32_t>> stack;
    for (uint32_t s = 0; s < n; ++s) {
        if (state[s]) continue;
        state[s] = 1;
        stack.emplace_back(s, 0);
        while (!stack.empty()) {
            const uint32_t u = stack.back().first;
            uint32_t& idx = stack.back().second;
            if (idx < adj[u].size()) {
                const uint32_t v = adj[u][idx++];
                if (!state[v]) {
                    state[v] = 1;
                    stack.emplace_back(v, 0);
                }
            } else {
                order.push_back(u);
                stack.pop_back();
            }
        }
    }

    std::vector<uint32_t> roff(n + 1, 0);
    for (uint32_t u = 0; u < n; ++u)
        for (uint32_t v : adj[u]) ++roff[v + 1];
    for (uint32_t v = 0; v < n; ++v) roff[v + 1] += roff[v];
    std::vector<uint32_t> radj(roff[n]);
    std::vector<uint32_t> cursor(roff.begin(), roff.end() - 1);
    for (uint32_t u = 0; u < n; ++u)
        for (uint32_t v : adj[u]) radj[cursor[v]++] = u;

    std::vector<uint32_t> comp(n, UINT32_MAX);
    scc_count = 0;
    std::vector<uint32_t> dfs;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] != UINT32_MAX) continue;
        const uint32_t c = scc_count++;
        comp[*it] = c;
        dfs.push_back(*it);
        while (!dfs.empty()) {
            const uint32_t u = dfs.back();
            dfs.pop_back();
            for (uint32_t e = roff[u]; e < roff[u + 1]; ++e) {
                const uint32_t v = radj[e];
                if (comp[v] == UINT32_MAX) {
                    comp[v] = c;
                    dfs.push_back(v);
                }
            }
        }
    }
    return comp;
}

// Shrinks an over-cap list with the diversity heuristic: closest first,
// setting aside entries that sit closer to an already-kept neighbour than
// to the owner, then backfilling with the nearest of those set aside. This
// keeps an edge into each local direction instead of letting one dense
// patch crowd out the rest of the neighbourhood.
void prune_to_cap(std::vector<uint32_t>& list, uint32_t cap,
                  const float* owner, const float* centroids, uint32_t d) {
    if (list.size() <= cap) return;
    std::vector<std::pair<float, uint32_t>> order;
    order.reserve(list.size());
    for (uint32_t v : list)
        order.emplace_back(l2_sq(owner, centroids + uint64_t{v} * d, d), v);
    std::sort(order.begin(), order.end());
    std::vector<uint32_t> kept, spare;
    for (const auto& [dist, v] : order) {
        if (kept.size() == cap) break;
        bool shadowed = false;
        for (uint32_t r : kept) {
            if (l2_sq(centroids + uint64_t{v} * d,
                      centroids + uint64_t{r} * d, d) < dist) {
                shadowed = true;
                break;
            }
        }
        (shadowed ? spare : kept).push_back(v);
    }
    for (uint32_t v : spare) {
        if (kept.size() == cap) break;
        kept.push_back(v);
    }
    list = std::move(kept);
}

// Closest pair of nodes across two components, by centroid distance.
// Large components are stride-sampled to bound the pair count.
std::pair<uint32_t, uint32_t> closest_pair(const std::vector<uint32_t>& a,
                                           const std::vector<uint32_t>& b,
                                           const float* centroids, uint32_t d,
                                           float* dist_out) {
    const size_t step_a = std::max<size_t>(1, a.size() / 2048);
    const size_t step_b = std::max<size_t>(1, b.size() / 2048);
    uint32_t best_a = a.front(), best_b = b.front();
    float best = std::numeric_limits<float>::infinity();
    for (size_t i = 0; i < a.size(); i += step_a) {
        const float* pa = centroids + uint64_t{a[i]} * d;
        for (size_t j = 0; j < b.size(); j += step_b) {
            const float dist = l2_sq(pa, centroids + uint64_t{b[j]} * d, d);
            if (dist < best) {
                best = dist;
                best_a = a[i];
                best_b = b[j];
            }
        }
    }
    if (dist_out) *dist_out = best;
    return {best_a, best_b};
}

// Links every target component to the hub with one edge at the closest
// cross pair. Hub-side tails go to distinct nodes so no node takes more
// than one augmentation edge; once the hub runs out of unused tails the
// remaining targets hang off the previously wired component instead.
// Returns the number of edges added.
uint32_t star_components(RoutingGraph& g, const float* centroids, uint32_t d,
                         uint32_t hub, const std::vector<uint32_t>& targets,
                         const std::vector<std::vector<uint32_t>>& members,
                         bool edges_into_hub) {
    const auto& h = members[hub];
    const size_t step_h = std::max<size_t>(1, h.size() / 2048);
    std::vector<uint8_t> used(h.size(), 0);
    uint32_t added = 0;
    uint32_t prev = hub;
    for (uint32_t tc : targets) {
        const auto& m = members[tc];
        if (edges_into_hub) {
            auto pair = closest_pair(m, h, centroids, d, nullptr);
            g.layers[0][pair.first].push_back(pair.second);
        } else {
            const size_t step_m = std::max<size_t>(1, m.size() / 2048);
            size_t best_i = h.size();
            uint32_t best_b = m.front();
            float best = std::numeric_limits<float>::infinity();
            for (size_t i = 0; i < h.size(); i += step_h) {
                if (used[i]) continue;
                const float* pa = centroids + uint64_t{h[i]} * d;
                for (size_t j = 0; j < m.size(); j += step_m) {
                    const float dist =
                        l2_sq(pa, centroids + uint64_t{m[j]} * d, d);
                    if (dist < best) {
                        best = dist;
                        best_i = i;
                        best_b = m[j];
                    }
                }
            }
            if (best_i < h.size()) {
                used[best_i] = 1;
                g.layers[0][h[best_i]].push_back(best_b);
            } else {
                auto pair = closest_pair(members[prev], m, centroids, d,
                                         nullptr);
                g.layers[0][pair.first].push_back(pair.second);
            }
        }
        ++added;
        prev = tc;
    }
    return added;
}

}  // namespace

RoutingGraph build_routing(const float* centroids, uint32_t n, uint32_t d,
                           uint32_t out_d, uint32_t ef_construction,
                           uint64_t seed) {
    ZOOM_ARG_CHECK(centroids != nullptr, "centroids must not be null");
    ZOOM_ARG_CHECK(n > 0, "routing graph needs at least one node");
    ZOOM_ARG_CHECK(d > 0, "dimension must be positive");
    ZOOM_ARG_CHECK(out_d >= 2, "routing out-degree must be at least 2");
    ZOOM_ARG_CHECK(ef_construction > 0, "ef_construction must be positive");

    RoutingGraph g;
    g.n = n;
    g.out_d = out_d;
    g.node_levels.assign(n, 0);
    const uint32_t cap = level_cap(n, out_d);
    g.layers.assign(cap + 1, std::vector<std::vector<uint32_t>>(n));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double promote = 1.0 / out_d;

    std::vector<std::vector<uint32_t>> members(cap + 1);
    VisitMarks marks(n);
    uint32_t max_lvl = 0;

    for (uint32_t i = 0; i < n; ++i) {
        uint32_t lvl = 0;
        while (lvl < cap && unit(rng) < promote) ++lvl;
        g.node_levels[i] = static_cast<uint8_t>(lvl);
        const float* qi = centroids + uint64_t{i} * d;

        if (i == 0) {
            g.entry_point = 0;
            max_lvl = lvl;
            for (uint32_t l = 0; l <= lvl; ++l) members[l].push_back(0);
            continue;
        }

        uint32_t cur = g.entry_point;
        for (uint32_t l = max_lvl; l > lvl; --l)
            cur = greedy_descend(g, centroids, d, qi, l, cur);

        for (uint32_t l = std::min(lvl, max_lvl);; --l) {
            auto near = search_layer(g, centroids, d, qi, l, cur,
                                     ef_construction, marks)
                            .take_sorted();
            auto& edges = g.layers[l][i];
            for (const auto& [id, dist] : near) {
                if (edges.size() + 1 >= out_d) break;
                edges.push_back(id);
            }
            const auto& pool = members[l];
            if (!pool.empty()) {
                std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
                for (int attempt = 0; attempt < 8; ++attempt) {
                    const uint32_t far = pool[pick(rng)];
                    if (std::find(edges.begin(), edges.end(), far) ==
                        edges.end()) {
                        edges.push_back(far);
                        break;
                    }
                }
            }
            for (uint32_t v : edges) {
                auto& back = g.layers[l][v];
                back.push_back(i);
                prune_to_cap(back, out_d, centroids + uint64_t{v} * d,
                             centroids, d);
            }
            if (!near.empty()) cur = near.front().first;
            if (l == 0) break;
        }

        for (uint32_t l = 0; l <= lvl; ++l) members[l].push_back(i);
        if (lvl > max_lvl) {
            max_lvl = lvl;
            g.entry_point = i;
        }
    }
    g.layers.resize(max_lvl + 1);
    return g;
}

uint32_t connectivity_augment(RoutingGraph& g, const float* centroids,
                              uint32_t d) {
    ZOOM_ARG_CHECK(g.n > 0, "empty routing graph");
    ZOOM_ARG_CHECK(centroids != nullptr, "centroids must not be null");

    uint32_t added_total = 0;
    for (int round = 0; round < 16; ++round) {
        uint32_t scc_count = 0;
        const auto comp = scc_labels(g, scc_count);
        if (scc_count <= 1) return added_total;

        std::vector<std::vector<uint32_t>> members(scc_count);
        for (uint32_t v = 0; v < g.n; ++v) members[comp[v]].push_back(v);

        std::vector<uint8_t> has_in(scc_count, 0), has_out(scc_count, 0);
        for (uint32_t u = 0; u < g.n; ++u) {
            for (uint32_t v : g.layers[0][u]) {
                if (comp[u] != comp[v]) {
                    has_out[comp[u]] = 1;
                    has_in[comp[v]] = 1;
                }
            }
        }
        std::vector<uint32_t> sources, sinks;
        for (uint32_t c = 0; c < scc_count; ++c) {
            if (!has_in[c]) sources.push_back(c);
            if (!has_out[c]) sinks.push_back(c);
        }

        if (sinks.size() == 1) {
            // Every component already reaches the lone sink; one edge from
            // the sink into each source component closes every cycle.
            std::vector<uint32_t> targets;
            for (uint32_t c : sources)
                if (c != sinks[0]) targets.push_back(c);
            if (!targets.empty()) {
                added_total += star_components(g, centroids, d, sinks[0],
                                               targets, members,
                                               /*edges_into_hub=*/false);
                continue;
            }
        }
        if (sources.size() == 1) {
            // Mirror image: one edge from each sink back into the source.
            std::vector<uint32_t> targets;
            for (uint32_t c : sinks)
                if (c != sources[0]) targets.push_back(c);
            if (!targets.empty()) {
                added_total += star_components(g, centroids, d, sources[0],
                                               targets, members,
                                               /*edges_into_hub=*/true);
                continue;
            }
        }

        // Multiple sources and sinks: match each source with a sink it can
        // reach, chain the pairs into one cycle, then hook unmatched sinks
        // into the cycle head and unmatched sources off the matched sinks.
        const uint32_t s = static_cast<uint32_t>(sources.size());
        const uint32_t t = static_cast<uint32_t>(sinks.size());
        std::vector<std::vector<uint32_t>> cadj(scc_count);
        for (uint32_t u = 0; u < g.n; ++u)
            for (uint32_t v : g.layers[0][u])
                if (comp[u] != comp[v]) cadj[comp[u]].push_back(comp[v]);
        std::vector<uint32_t> sink_slot(scc_count, UINT32_MAX);
        for (uint32_t j = 0; j < t; ++j) sink_slot[sinks[j]] = j;

        std::vector<std::vector<uint32_t>> reach(s);
        std::vector<uint8_t> vis(scc_count);
        for (uint32_t i = 0; i < s; ++i) {
            std::fill(vis.begin(), vis.end(), 0);
            std::vector<uint32_t> walk{sources[i]};
            vis[sources[i]] = 1;
            while (!walk.empty()) {
                const uint32_t c = walk.back();
                walk.pop_back();
                if (sink_slot[c] != UINT32_MAX)
                    reach[i].push_back(sink_slot[c]);
                for (uint32_t nc : cadj[c]) {
                    if (!vis[nc]) {
                        vis[nc] = 1;
                        walk.push_back(nc);
                    }
                }
            }
            std::sort(reach[i].begin(), reach[i].end());
        }

        struct Matcher {
            const std::vector<std::vector<uint32_t>>& reach;
            std::vector<uint32_t>& sink_of;
            std::vector<uint32_t>& src_of;
            std::vector<uint8_t>& tried;
            bool operator()(uint32_t src) const {
                for (uint32_t w : reach[src]) {
                    if (tried[w]) continue;
                    tried[w] = 1;
                    if (src_of[w] == UINT32_MAX || (*this)(src_of[w])) {
                        src_of[w] = src;
                        sink_of[src] = w;
                        return true;
                    }
                }
                return false;
            }
        };
        std::vector<uint32_t> sink_of(s, UINT32_MAX), src_of(t, UINT32_MAX);
        std::vector<uint8_t> tried(t);
        Matcher matcher{reach, sink_of, src_of, tried};
        for (uint32_t i = 0; i < s; ++i) {
            std::fill(tried.begin(), tried.end(), 0);
            matcher(i);
        }

        std::vector<std::pair<uint32_t, uint32_t>> pairs;
        std::vector<uint32_t> loose_src, loose_sink;
        for (uint32_t i = 0; i < s; ++i) {
            if (sink_of[i] != UINT32_MAX)
                pairs.emplace_back(sources[i], sinks[sink_of[i]]);
            else
                loose_src.push_back(sources[i]);
        }
        for (uint32_t j = 0; j < t; ++j)
            if (src_of[j] == UINT32_MAX) loose_sink.push_back(sinks[j]);

        auto link = [&](uint32_t from_comp, uint32_t to_comp) {
            if (from_comp == to_comp) return;
            auto pair = closest_pair(members[from_comp], members[to_comp],
                                     centroids, d, nullptr);
            g.layers[0][pair.first].push_back(pair.second);
            ++added_total;
        };
        const size_t p = pairs.size();
        if (p == 0) continue;
        for (size_t j = 0; j + 1 < p; ++j)
            link(pairs[j].second, pairs[j + 1].first);
        link(pairs[p - 1].second, pairs[0].first);
        for (uint32_t c : loose_sink) link(c, pairs[0].first);
        for (size_t j = 0; j < loose_src.size(); ++j)
            link(pairs[j % p].second, loose_src[j]);
    }
    return added_total;
}

CondensationInfo condensation_info(const RoutingGraph& graph) {
    CondensationInfo info;
    if (graph.n == 0 || graph.layers.empty()) return info;
    uint32_t scc_count = 0;
    const auto comp = scc_labels(graph, scc_count);
    info.scc_count = scc_count;
    std::vector<uint8_t> has_in(scc_count, 0), has_out(scc_count, 0);
    for (uint32_t u = 0; u < graph.n; ++u) {
        for (uint32_t v : graph.layers[0][u]) {
            if (comp[u] != comp[v]) {
                has_out[comp[u]] = 1;
                has_in[comp[v]] = 1;
            }
        }
    }
    for (uint32_t c = 0; c < scc_count; ++c) {
        if (!has_in[c]) ++info.sources;
        if (!has_out[c]) ++info.sinks;
    }
    return info;
}

GraphStats graph_stats(const RoutingGraph& graph) {
    GraphStats s;
    s.n_nodes = graph.n;
    s.n_layers = static_cast<uint32_t>(graph.layers.size());
    if (graph.n == 0 || graph.layers.empty()) return s;
    uint64_t total = 0;
    uint32_t mn = UINT32_MAX, mx = 0;
    for (uint32_t u = 0; u < graph.n; ++u) {
        const auto deg = static_cast<uint32_t>(graph.layers[0][u].size());
        total += deg;
        mn = std::min(mn, deg);
        mx = std::max(mx, deg);
    }
    s.ground_edges = total;
    s.min_out_degree = mn;
    s.max_out_degree = mx;
    s.avg_out_degree = static_cast<double>(total) / graph.n;
    std::vector<uint32_t> indeg(graph.n, 0);
    for (uint32_t u = 0; u < graph.n; ++u)
        for (uint32_t v : graph.layers[0][u]) ++indeg[v];
    for (uint32_t u = 0; u < graph.n; ++u) {
        ++s.indegree_histogram[indeg[u]];
        if (indeg[u] == 0) ++s.zero_indegree_count;
    }
    s.condensation = condensation_info(graph);
    return s;
}

std::vector<std::pair<uint32_t, float>> route(const RoutingGraph& graph,
                                              const float* centroids,
                                              uint32_t d, const float* query,
                                              uint32_t nscan,
                                              uint32_t ef_search) {
    ZOOM_ARG_CHECK(graph.n > 0, "empty routing graph");
    ZOOM_ARG_CHECK(nscan > 0, "nscan must be positive");
    ZOOM_ARG_CHECK(nscan <= graph.n, "nscan exceeds the cluster count");
    ZOOM_ARG_CHECK(ef_search > 0, "ef_search must be positive");

    const uint32_t ef = std::max(ef_search, nscan);
    VisitMarks marks(graph.n);
    uint32_t cur = graph.entry_point;
    for (uint32_t l = graph.max_level(); l > 0; --l)
        cur = greedy_descend(graph, centroids, d, query, l, cur);
    auto res =
        search_layer(graph, centroids, d, query, 0, cur, ef, marks)
            .take_sorted();
    if (res.size() > nscan) res.resize(nscan);
    return res;
}

}  // namespace zoom
