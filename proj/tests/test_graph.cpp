#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "fdnet/graph.hpp"

using namespace fdnet;

namespace {

// Oracle: an edge is a bridge iff deleting it disconnects its component.
// Quadratic and obviously correct; the low-link implementation is checked
// against it on random graphs.
std::vector<Edge> bridges_by_removal(const Graph& g) {
    std::vector<Edge> out;
    for (Edge e : g.edges) {
        std::vector<Edge> rest;
        for (Edge f : g.edges)
            if (f != e) rest.push_back(f);
        Graph h = make_graph(g.n, rest);
        // Deleting an edge splits the graph iff its endpoints end up in
        // different components; test reachability from one endpoint.
        std::vector<char> seen(std::size_t(h.n), 0);
        std::vector<NodeId> stack{e.first};
        seen[std::size_t(e.first)] = 1;
        while (!stack.empty()) {
            NodeId u = stack.back();
            stack.pop_back();
            for (NodeId v : h.neighbors(u))
                if (!seen[std::size_t(v)]) {
                    seen[std::size_t(v)] = 1;
                    stack.push_back(v);
                }
        }
        if (!seen[std::size_t(e.second)]) out.push_back(e);
    }
    return out;
}

Graph random_graph(Rng& rng, int n, int extra_edges) {
    // Random spanning tree plus extra edges: connected, bridge-rich.
    std::vector<Edge> es;
    for (int v = 1; v < n; ++v) es.push_back(make_edge(v, rng.below_int(v)));
    for (int i = 0; i < extra_edges; ++i) {
        NodeId a = rng.below_int(n), b = rng.below_int(n);
        if (a != b) es.push_back(make_edge(a, b));
    }
    return make_graph(n, es);
}

}  // namespace

TEST_CASE("graph construction normalizes and deduplicates", "[graph]") {
    Graph g = make_graph(4, {{1, 0}, {0, 1}, {2, 3}, {3, 1}});
    CHECK(g.edges == std::vector<Edge>{{0, 1}, {1, 3}, {2, 3}});
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 0));
    CHECK_FALSE(g.has_edge(0, 3));
    CHECK(g.degree(1) == 2);
    CHECK_THROWS_AS(make_graph(2, {{0, 0}}), Error);
}

TEST_CASE("connectivity detection", "[graph]") {
    CHECK(is_connected(make_cycle_graph(5)));
    Graph split = make_graph(4, {{0, 1}, {2, 3}});
    CHECK_FALSE(is_connected(split));
    Graph lone = make_graph(1, {});
    CHECK(is_connected(lone));
}

TEST_CASE("bridges on hand-checked graphs", "[graph]") {
    // Path: every edge is a bridge.
    Graph path = make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
    CHECK(find_bridges(path) == std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}});

    // Cycle: none.
    CHECK(find_bridges(make_cycle_graph(6)).empty());

    // Two triangles joined by one edge: exactly that edge.
    Graph barbell = make_graph(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {2, 3}});
    CHECK(find_bridges(barbell) == std::vector<Edge>{{2, 3}});
}

TEST_CASE("bridge finder agrees with removal oracle on random graphs", "[graph]") {
    Rng rng(0x5eedULL);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 3 + rng.below_int(10);
        Graph g = random_graph(rng, n, rng.below_int(n + 3));
        auto fast = find_bridges(g);
        auto slow = bridges_by_removal(g);
        std::sort(slow.begin(), slow.end());
        REQUIRE(fast == slow);
    }
}

TEST_CASE("two-edge-connectivity predicate", "[graph]") {
    CHECK(is_two_edge_connected(make_cycle_graph(3)));
    CHECK(is_two_edge_connected(make_cycle_graph(9)));
    CHECK_FALSE(is_two_edge_connected(make_graph(2, {{0, 1}})));
    CHECK_FALSE(is_two_edge_connected(make_graph(4, {{0, 1}, {1, 2}, {2, 3}})));
    Graph barbell = make_graph(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {2, 3}});
    CHECK_FALSE(is_two_edge_connected(barbell));
}

TEST_CASE("random 2EC generator output really is 2-edge-connected", "[graph]") {
    Rng rng(0xabcdef01ULL);
    for (int trial = 0; trial < 80; ++trial) {
        int n = 3 + rng.below_int(12);
        Graph g = random_two_edge_connected(rng, n);
        INFO("trial " << trial << " n " << n);
        REQUIRE(g.n == n);
        REQUIRE(is_connected(g));
        REQUIRE(find_bridges(g).empty());
        for (int u = 0; u < n; ++u) REQUIRE(g.degree(u) >= 2);
    }
}

TEST_CASE("graph json round trip with external names", "[graph]") {
    nlohmann::json j = {
        {"nodes", {10, 30, 20}},
        {"edges", {{10, 30}, {30, 20}, {20, 10}}},
        {"root", 30},
    };
    GraphFile gf = graph_from_json(j);
    REQUIRE(gf.graph.n == 3);
    // Dense ids follow sorted names: 10 -> 0, 20 -> 1, 30 -> 2.
    CHECK(gf.graph.name_of(0) == 10);
    CHECK(gf.graph.name_of(2) == 30);
    CHECK(gf.root == 2);
    CHECK(gf.graph.has_edge(0, 2));

    nlohmann::json back = graph_to_json(gf.graph, gf.root);
    GraphFile again = graph_from_json(back);
    CHECK(again.graph.edges == gf.graph.edges);
    CHECK(again.root == gf.root);

    nlohmann::json bad = {{"nodes", {1, 1}}, {"edges", nlohmann::json::array()}};
    CHECK_THROWS_AS(graph_from_json(bad), Error);
}

TEST_CASE("bit string helpers", "[bits]") {
    CHECK(bits_from_uint(0) == "0");
    CHECK(bits_from_uint(1) == "1");
    CHECK(bits_from_uint(6) == "110");
    CHECK(uint_from_bits("110") == 6);
    CHECK(uint_from_bits("0") == 0);
    CHECK(bits_fixed(5, 4) == "0101");
    CHECK_THROWS_AS(bits_fixed(16, 4), Error);
    CHECK_THROWS_AS(uint_from_bits("01x"), Error);

    // Gamma codes round-trip and are self-delimiting in a stream.
    Bits s;
    for (std::uint64_t v : {1ULL, 2ULL, 3ULL, 7ULL, 100ULL, 1ULL << 40}) gamma_append(s, v);
    std::size_t pos = 0;
    CHECK(gamma_read(s, pos) == 1);
    CHECK(gamma_read(s, pos) == 2);
    CHECK(gamma_read(s, pos) == 3);
    CHECK(gamma_read(s, pos) == 7);
    CHECK(gamma_read(s, pos) == 100);
    CHECK(gamma_read(s, pos) == (1ULL << 40));
    CHECK(pos == s.size());
    // Known encodings: 1 -> "1", 2 -> "010", 4 -> "00100".
    Bits one, two, four;
    gamma_append(one, 1);
    gamma_append(two, 2);
    gamma_append(four, 4);
    CHECK(one == "1");
    CHECK(two == "010");
    CHECK(four == "00100");
}

TEST_CASE("rng is deterministic and uniformish", "[bits]") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next() == b.next());
    Rng c(42);
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < 4000; ++i) ++counts[c.below(4)];
    for (int k = 0; k < 4; ++k) CHECK(counts[k] > 800);
}
