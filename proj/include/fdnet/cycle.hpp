#pragma once

// Closed-walk cycle representations.
//
// A cycle here is a closed walk through the graph that may visit nodes and
// edges more than once, written as the sequence of nodes it passes through
// (the successor of the last entry is the first entry). Simulations care
// about two views of it:
//   - the global string, with position 0 holding the token initially, and
//   - each node's local view: its occurrence count k and, per occurrence in
//     string order, the neighbor the walk arrives from (prev) and departs to
//     (next).
// The local view is what a station actually wires up; occurrence numbering by
// string order makes every station's numbering mutually consistent.

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include <json.hpp>

#include "fdnet/graph.hpp"

namespace fdnet {

struct LocalView {
    int k = 0;
    std::vector<NodeId> prev;  // prev[i]: node before occurrence i
    std::vector<NodeId> next;  // next[i]: node after occurrence i
};

struct CycleRep {
    std::vector<NodeId> global;

    int length() const { return int(global.size()); }

    NodeId at(int i) const { return global[std::size_t(((i % length()) + length()) % length())]; }

    std::vector<NodeId> nodes() const {
        std::set<NodeId> s(global.begin(), global.end());
        return {s.begin(), s.end()};
    }

    bool contains(NodeId u) const {
        return std::find(global.begin(), global.end(), u) != global.end();
    }

    LocalView local_view(NodeId u) const {
        LocalView v;
        for (int i = 0; i < length(); ++i) {
            if (global[std::size_t(i)] != u) continue;
            ++v.k;
            v.prev.push_back(at(i - 1));
            v.next.push_back(at(i + 1));
        }
        return v;
    }

    // Directed edges the walk uses, with multiplicity collapsed.
    std::set<std::pair<NodeId, NodeId>> directed_edges() const {
        std::set<std::pair<NodeId, NodeId>> out;
        for (int i = 0; i < length(); ++i) out.insert({global[std::size_t(i)], at(i + 1)});
        return out;
    }

    std::set<Edge> undirected_edges() const {
        std::set<Edge> out;
        for (auto [a, b] : directed_edges()) out.insert(make_edge(a, b));
        return out;
    }
};

// Structural checks a usable cycle must satisfy. Orientation matters: a walk
// that traverses some edge in both directions cannot give its endpoints a
// consistent clockwise direction, so it is rejected.
struct CycleCheck {
    bool nonempty = false;
    bool long_enough = false;        // at least 3 positions
    bool edges_exist = false;        // every step is a graph edge
    bool single_orientation = false; // no edge used in both directions
    bool covers_nodes = false;
    bool covers_edges = false;
    std::string detail;

    bool ok() const {
        return nonempty && long_enough && edges_exist && single_orientation && covers_nodes &&
               covers_edges;
    }
};

inline CycleCheck validate_cycle(const CycleRep& c, const Graph& g) {
    CycleCheck r;
    r.nonempty = !c.global.empty();
    if (!r.nonempty) {
        r.detail = "empty cycle";
        return r;
    }
    r.long_enough = c.length() >= 3;
    if (!r.long_enough) r.detail = "cycle shorter than 3 positions; ";

    r.edges_exist = true;
    for (int i = 0; i < c.length(); ++i) {
        NodeId a = c.at(i), b = c.at(i + 1);
        if (a < 0 || a >= g.n || !g.has_edge(a, b)) {
            r.edges_exist = false;
            r.detail += "step " + std::to_string(i) + " is not a graph edge; ";
            break;
        }
    }

    r.single_orientation = true;
    auto dir = c.directed_edges();
    for (auto [a, b] : dir) {
        if (dir.count({b, a})) {
            r.single_orientation = false;
            r.detail += "edge traversed in both directions; ";
            break;
        }
    }

    std::set<NodeId> ns(c.global.begin(), c.global.end());
    r.covers_nodes = int(ns.size()) == g.n;
    if (!r.covers_nodes) r.detail += "not all nodes covered; ";
    // undirected_edges assumes well-formed steps, so only consult it then.
    r.covers_edges =
        r.edges_exist && c.undirected_edges() == std::set<Edge>(g.edges.begin(), g.edges.end());
    if (!r.covers_edges) r.detail += "not all edges covered; ";
    return r;
}

// Shortest path from `from` to `to` using only the walk's directed edges.
// BFS with sorted expansion, so ties break toward lower node ids and the
// result is the same on every node that runs it.
inline std::vector<NodeId> shortest_directed_path(const CycleRep& c, NodeId from, NodeId to) {
    if (from == to) return {from};
    std::map<NodeId, std::vector<NodeId>> succ;
    for (auto [a, b] : c.directed_edges()) succ[a].push_back(b);
    for (auto& [a, row] : succ) std::sort(row.begin(), row.end());

    std::map<NodeId, NodeId> parent;
    std::deque<NodeId> queue{from};
    parent[from] = from;
    while (!queue.empty()) {
        NodeId u = queue.front();
        queue.pop_front();
        for (NodeId v : succ[u]) {
            if (parent.count(v)) continue;
            parent[v] = u;
            if (v == to) {
                std::vector<NodeId> path{to};
                while (path.back() != from) path.push_back(parent[path.back()]);
                return {path.rbegin(), path.rend()};
            }
            queue.push_back(v);
        }
    }
    throw Error("shortest_directed_path: target unreachable along the walk");
}

// Left-rotate the string so the first occurrence of u sits at position 0.
inline CycleRep rotate_to(const CycleRep& c, NodeId u) {
    auto it = std::find(c.global.begin(), c.global.end(), u);
    if (it == c.global.end()) throw Error("rotate_to: node not on cycle");
    CycleRep out;
    out.global.assign(it, c.global.end());
    out.global.insert(out.global.end(), c.global.begin(), it);
    return out;
}

// For a graph that is itself a simple cycle: the closed walk starting at root,
// oriented toward root's lowest-id neighbor.
inline CycleRep cycle_from_simple_graph(const Graph& g, NodeId root) {
    for (int u = 0; u < g.n; ++u)
        if (g.degree(u) != 2) throw Error("cycle_from_simple_graph: graph is not a simple cycle");
    if (!is_connected(g)) throw Error("cycle_from_simple_graph: graph is not connected");
    CycleRep c;
    NodeId prev = root;
    NodeId cur = g.neighbors(root)[0];
    c.global.push_back(root);
    while (cur != root) {
        c.global.push_back(cur);
        const auto& nb = g.neighbors(cur);
        NodeId nxt = nb[0] == prev ? nb[1] : nb[0];
        prev = cur;
        cur = nxt;
    }
    return c;
}

// ---- file format -----------------------------------------------------------
//
// {
//   "cycle": [names in walk order, position 0 = initial token holder],
//   "length": 8,
//   "local": { "name": {"k": 2, "prev": [...], "next": [...]}, ... }
// }
//
// "cycle" is authoritative; "local" is emitted for human consumption and for
// downstream tools that want per-node wiring without recomputing it.

inline nlohmann::json cycle_to_json(const CycleRep& c, const Graph& g) {
    nlohmann::json j;
    auto arr = nlohmann::json::array();
    for (NodeId u : c.global) arr.push_back(g.name_of(u));
    j["cycle"] = arr;
    j["length"] = c.length();
    nlohmann::json local = nlohmann::json::object();
    for (NodeId u : c.nodes()) {
        LocalView v = c.local_view(u);
        nlohmann::json lv;
        lv["k"] = v.k;
        auto pv = nlohmann::json::array(), nx = nlohmann::json::array();
        for (NodeId p : v.prev) pv.push_back(g.name_of(p));
        for (NodeId nn : v.next) nx.push_back(g.name_of(nn));
        lv["prev"] = pv;
        lv["next"] = nx;
        local[std::to_string(g.name_of(u))] = lv;
    }
    j["local"] = local;
    return j;
}

inline CycleRep cycle_from_json(const nlohmann::json& j, const Graph& g) {
    if (!j.contains("cycle")) throw Error("cycle file: missing \"cycle\"");
    CycleRep c;
    for (const auto& v : j.at("cycle")) c.global.push_back(g.internal_of(v.get<long long>()));
    if (c.global.empty()) throw Error("cycle file: empty cycle");
    return c;
}

}  // namespace fdnet
