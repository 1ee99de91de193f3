// The distributed walk construction: content-less probes explore the graph,
// detours are wired and id runs simulated over them, and every node ends up
// agreeing on one covering walk. Fixtures are hand-traced; the campaign
// checks validity, determinism, traffic bounds, and reset soundness.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fdnet/builder.hpp"
#include "fdnet/verifier.hpp"

using namespace fdnet;

namespace {

SchedulerCfg fifo() { return {SchedKind::Fifo, 0, {}}; }
SchedulerCfg lifo() { return {SchedKind::Lifo, 0, {}}; }
SchedulerCfg rnd(std::uint64_t seed) { return {SchedKind::Random, seed, {}}; }
AdversaryCfg clean() { return {AdvKind::Identity, 0, '1'}; }
AdversaryCfg garble(std::uint64_t seed) { return {AdvKind::Randomize, seed, '1'}; }

BuildResult build(const Graph& g, SchedulerCfg sched = fifo(), AdversaryCfg adv = clean()) {
    BuildConfig cfg;
    cfg.sched = sched;
    cfg.adv = adv;
    return build_cycle(g, cfg);
}

// Square 0-1-2-3 plus node 4 chorded to 0 and 2: one open detour grows the
// seed square by the path through 4 and the return route 2 -> 3 -> 0.
Graph square_with_spur() {
    return make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {2, 4}});
}

// Five nodes, six edges; the covering walk must revisit nodes.
Graph two_diamond() {
    return make_graph(5, {{4, 1}, {0, 1}, {3, 4}, {3, 0}, {1, 2}, {2, 3}});
}

Graph k4() { return make_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}); }

// Triangle 0-1-2 with a pocket at 1: the probe explores 3-4-5, bounces off
// the path at 3, cancels out of 5, and exits through 6 to walk node 2.
Graph pocket_graph() {
    return make_graph(
        7, {{0, 1}, {1, 2}, {2, 0}, {1, 3}, {3, 4}, {4, 5}, {5, 3}, {4, 6}, {6, 2}});
}

// Round boundaries: probe windows are separated by the "new-root" decisions.
std::vector<std::pair<std::uint64_t, std::uint64_t>> round_windows(const Transcript& t) {
    std::vector<std::uint64_t> cuts;
    for (const Annotation& a : t.notes)
        if (a.kind == "new-root") cuts.push_back(a.at);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> w;
    std::uint64_t start = 0;
    for (std::uint64_t c : cuts) {
        w.push_back({start, c});
        start = c;
    }
    w.push_back({start, ~std::uint64_t(0)});
    return w;
}

std::uint64_t count_in(const Transcript& t, const std::string& kind, std::uint64_t lo,
                       std::uint64_t hi) {
    std::uint64_t n = 0;
    for (const Annotation& a : t.notes)
        if (a.kind == kind && a.at > lo && a.at <= hi) ++n;
    return n;
}

}  // namespace

TEST_CASE("a triangle's seed loop is already the whole walk") {
    Graph g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
    BuildResult r = build(g);
    CHECK(r.cycle.global == std::vector<NodeId>{0, 1, 2});
    CHECK(r.stats.ears == 1);
    CHECK(r.stats.rounds == 0);
}

TEST_CASE("a plain ring builds itself in one round") {
    BuildResult r = build(make_cycle_graph(6));
    CHECK(r.cycle.global == std::vector<NodeId>{0, 1, 2, 3, 4, 5});
    CHECK(r.stats.ears == 1);
    CHECK(r.stats.rounds == 0);
}

TEST_CASE("one open detour grows the seed square through the spur node") {
    BuildResult r = build(square_with_spur());
    // Seed loop [0,1,2,3]; the probe runs 0 -> 4 -> 2, the return route is
    // 2 -> 3 -> 0, and the grown walk is the concatenation.
    CHECK(r.cycle.global == std::vector<NodeId>{0, 1, 2, 3, 0, 4, 2, 3});
    CHECK(r.stats.ears == 2);
    CHECK(r.stats.rounds == 1);
}

TEST_CASE("complete graph on four nodes: open detour, then a one-edge detour") {
    BuildResult r = build(k4());
    // Hand trace: seed triangle [0,1,2]; detour 0 -> 3 -> 1 with return
    // [1,2,0]; rotation to root 2; one-edge detour 2 -> 3 with return
    // [3,1,2]. The final walk uses all six edges, some twice.
    CHECK(r.cycle.global == std::vector<NodeId>{2, 0, 3, 1, 2, 0, 1, 2, 3, 1});
    CHECK(r.stats.ears == 3);
    CHECK(r.stats.rounds == 2);
    CHECK(validate_cycle(r.cycle, k4()).ok());
}

TEST_CASE("pocket graph: bounce, cancel, and a fresh revisit next round") {
    Graph g = pocket_graph();
    BuildResult r = build(g);
    CHECK(r.cycle.global ==
          std::vector<NodeId>{3, 4, 6, 2, 0, 1, 2, 0, 1, 3, 5, 4, 6, 2, 0, 1});
    CHECK(r.stats.ears == 3);
    CHECK(r.stats.rounds == 2);

    // Node 5 is visited and reset in the first detour round, then joins the
    // walk in the second: two visits, one reset, in different rounds.
    std::uint64_t visits = 0, resets = 0;
    for (const Annotation& a : r.transcript.notes) {
        if (a.node != 5) continue;
        if (a.kind == "probe-visit") ++visits;
        if (a.kind == "probe-reset") ++resets;
    }
    CHECK(visits == 2);
    CHECK(resets == 1);
}

TEST_CASE("node and edge coverage on the fixture graphs") {
    for (const Graph& g : {two_diamond(), pocket_graph(), square_with_spur()}) {
        BuildResult r = build(g);
        CycleCheck chk = validate_cycle(r.cycle, g);
        INFO(chk.detail);
        CHECK(chk.ok());
    }
}

TEST_CASE("the built walk does not depend on scheduling or corruption") {
    for (const Graph& g : {square_with_spur(), k4(), pocket_graph(), two_diamond()}) {
        BuildResult a = build(g, fifo(), clean());
        BuildResult b = build(g, lifo(), garble(7));
        BuildResult c = build(g, rnd(3), garble(99));
        CHECK(a.cycle.global == b.cycle.global);
        CHECK(a.cycle.global == c.cycle.global);
        CHECK(a.stats.ears == c.stats.ears);
        CHECK(a.stats.rounds == c.stats.rounds);
    }
}

TEST_CASE("graphs with bridges are refused with a diagnosis") {
    Graph path = make_graph(3, {{0, 1}, {1, 2}});
    CHECK_THROWS_WITH(build_cycle(path), Catch::Matchers::ContainsSubstring("bridge"));

    // Two triangles joined by a single edge: connected, every node degree>=2,
    // but the joining edge is a bridge.
    Graph barbell = make_graph(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {2, 3}});
    CHECK_THROWS_WITH(build_cycle(barbell), Catch::Matchers::ContainsSubstring("2-3"));

    Graph split = make_graph(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}});
    CHECK_THROWS_WITH(build_cycle(split), Catch::Matchers::ContainsSubstring("disconnected"));
}

TEST_CASE("random bridgeless graphs all build valid covering walks") {
    Rng rng(0xb111dULL);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 4 + trial % 7;
        Graph g = random_two_edge_connected(rng, n);
        BuildConfig cfg;
        cfg.sched = rnd(std::uint64_t(trial));
        cfg.adv = garble(std::uint64_t(trial) + 1);
        BuildResult r = build_cycle(g, cfg);
        CycleCheck chk = validate_cycle(r.cycle, g);
        INFO("trial " << trial << " n=" << n << ": " << chk.detail);
        REQUIRE(chk.ok());
        CHECK(r.cycle.length() <= n * n * n);
    }
}

TEST_CASE("probe traffic per round stays quadratic in the node count") {
    Rng rng(0x70baccULL);
    std::vector<Graph> graphs = {square_with_spur(), k4(), pocket_graph()};
    for (int trial = 0; trial < 6; ++trial) graphs.push_back(random_two_edge_connected(rng, 5 + trial));
    for (const Graph& g : graphs) {
        BuildResult r = build(g, rnd(11), garble(5));
        std::uint64_t bound = std::uint64_t(8) * std::uint64_t(g.n) * std::uint64_t(g.n) + 16;
        for (auto [lo, hi] : round_windows(r.transcript)) {
            CHECK(count_in(r.transcript, "probe-pulse", lo, hi) <= bound);
        }
    }
}

TEST_CASE("a cancelled node is never probed again within the same round") {
    Rng rng(0x5e7ULL);
    std::vector<Graph> graphs = {pocket_graph(), k4()};
    for (int trial = 0; trial < 8; ++trial) graphs.push_back(random_two_edge_connected(rng, 5 + trial % 5));
    bool saw_reset = false;
    for (const Graph& g : graphs) {
        BuildResult r = build(g);
        for (auto [lo, hi] : round_windows(r.transcript)) {
            std::map<NodeId, std::uint64_t> reset_at;
            for (const Annotation& a : r.transcript.notes) {
                if (a.at <= lo || a.at > hi) continue;
                if (a.kind == "probe-reset") {
                    reset_at[a.node] = a.at;
                    saw_reset = true;
                }
            }
            for (const Annotation& a : r.transcript.notes) {
                if (a.at <= lo || a.at > hi || a.kind != "probe-visit") continue;
                auto it = reset_at.find(a.node);
                if (it != reset_at.end()) CHECK(a.at < it->second);
            }
        }
    }
    CHECK(saw_reset);  // the battery actually exercised a cancellation
}

TEST_CASE("a built walk carries a protocol run end to end") {
    Graph g = two_diamond();
    BuildResult built = build(g);

    ScenarioSpec s;
    s.protocol = "flood-max";
    for (NodeId u = 0; u < g.n; ++u) s.inputs[u] = bits_from_uint(std::uint64_t(3 + u));
    CycleSimConfig cfg;
    cfg.mode = Mode::Binary;
    cfg.sched = rnd(1);
    cfg.adv = garble(13);
    CycleRunResult run = run_cycle_sim(g, built.cycle, s, cfg);

    for (NodeId u = 0; u < g.n; ++u) {
        REQUIRE(run.outputs.at(u).has_value());
        CHECK(*run.outputs.at(u) == 7);  // max input is 3 + 4
    }
    TauCheck tau = verify_tau(g, s, run.transcript, run.outputs, BroadcastShape::AllButSender,
                              /*check_fifo=*/true);
    INFO(tau.detail);
    CHECK(tau.ok);
    EpochCheck ep = check_epoch_invariants(g, built.cycle, run.transcript, Mode::Binary, 2, g.n);
    INFO(ep.detail);
    CHECK(ep.ok);
}

TEST_CASE("control messages survive pack and unpack") {
    std::vector<BuildMsg> msgs = {
        {BuildTag::EarClosed, 4, {}},
        {BuildTag::Ready, -1, {}},
        {BuildTag::NewCycle, -1, {0, 1, 2, 0, 3, 1, 2}},
        {BuildTag::CheckEdges, -1, {}},
        {BuildTag::HasSpare, 0, {}},
        {BuildTag::NoSpare, 9, {}},
        {BuildTag::NewRoot, 2, {}},
        {BuildTag::Finished, -1, {}},
        {BuildTag::IdChain, -1, {5}},
        {BuildTag::IdDone, -1, {1, 0}},
    };
    for (const BuildMsg& m : msgs) {
        BuildMsg back = build_msg_unpack(build_msg_pack(m));
        CHECK(back.tag == m.tag);
        switch (m.tag) {
            case BuildTag::EarClosed:
            case BuildTag::HasSpare:
            case BuildTag::NoSpare:
            case BuildTag::NewRoot:
                CHECK(back.id == m.id);
                break;
            default:
                CHECK(back.ids == m.ids);
        }
    }
    CHECK_THROWS(build_msg_unpack(Bits("1")));  // tag 1 wants an id
    Bits padded = build_msg_pack({BuildTag::Ready, -1, {}});
    padded.push_back('0');
    CHECK_THROWS_WITH(build_msg_unpack(padded), Catch::Matchers::ContainsSubstring("trailing"));
}
