// Built-in protocols over the direct (payload-carrying) transport: reference
// behavior on a clean channel, and the failure that motivates the pulse
// transport when the channel corrupts content.

#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "fdnet/protocol.hpp"

using namespace fdnet;

namespace {

SchedulerCfg fifo() { return {SchedKind::Fifo, 0, {}}; }
SchedulerCfg rnd(std::uint64_t seed) { return {SchedKind::Random, seed, {}}; }
AdversaryCfg clean() { return {AdvKind::Identity, 0, '1'}; }

Graph ring(int n) { return make_cycle_graph(n); }

}  // namespace

TEST_CASE("flood-max stabilizes every node on the maximum input") {
    Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {1, 3}});
    ScenarioSpec s;
    s.protocol = "flood-max";
    s.inputs = {{0, "101"}, {1, "1"}, {2, "1110"}, {3, "0"}, {4, "110"}};  // max = 14 at node 2
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        RunResult r = run_direct(g, s, rnd(seed), clean());
        REQUIRE(r.transcript.halt == HaltReason::Quiescence);
        for (NodeId u = 0; u < g.n; ++u) {
            REQUIRE(r.outputs[u].has_value());
            CHECK(*r.outputs[u] == 14);
        }
    }
}

TEST_CASE("pairwise-sum outputs each node's closed-neighborhood sum") {
    Graph g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}});
    ScenarioSpec s;
    s.protocol = "pairwise-sum";
    s.inputs = {{0, "1"}, {1, "10"}, {2, "100"}, {3, "1000"}};  // 1, 2, 4, 8
    RunResult r = run_direct(g, s, rnd(9), clean());
    REQUIRE(r.transcript.halt == HaltReason::Quiescence);
    // closed neighborhoods: 0:{0,1,2,3}=15, 1:{1,0,2}=7, 2:{2,0,1,3}=15, 3:{3,0,2}=13
    CHECK(r.outputs[0] == std::optional<std::int64_t>(15));
    CHECK(r.outputs[1] == std::optional<std::int64_t>(7));
    CHECK(r.outputs[2] == std::optional<std::int64_t>(15));
    CHECK(r.outputs[3] == std::optional<std::int64_t>(13));
}

TEST_CASE("ping-pong volleys to the round budget") {
    Graph g = make_graph(2, {{0, 1}});
    ScenarioSpec s;
    s.protocol = "ping-pong";
    s.params = {{"a", 0}, {"b", 1}, {"rounds", 7}};
    RunResult r = run_direct(g, s, fifo(), clean());
    REQUIRE(r.transcript.halt == HaltReason::Quiescence);
    // Counter path: 1 (a->b), 2, ..., 7; whoever holds 7 outputs it. 7 is odd,
    // so it lands at b.
    CHECK(r.outputs[1] == std::optional<std::int64_t>(7));
    REQUIRE(r.transcript.deliveries == 7);
}

TEST_CASE("counter-ring counts laps times ring length") {
    Graph g = ring(5);
    ScenarioSpec s;
    s.protocol = "counter-ring";
    s.params = {{"root", 0}, {"laps", 3}};
    RunResult r = run_direct(g, s, fifo(), clean());
    REQUIRE(r.transcript.halt == HaltReason::Quiescence);
    CHECK(r.outputs[0] == std::optional<std::int64_t>(15));
}

TEST_CASE("one-shot sends a single payload and the receiver reports its length") {
    Graph g = ring(4);
    ScenarioSpec s;
    s.protocol = "one-shot";
    s.params = {{"src", 2}, {"dst", 3}, {"payload", "10110"}};
    RunResult r = run_direct(g, s, fifo(), clean());
    REQUIRE(r.transcript.halt == HaltReason::Quiescence);
    CHECK(r.outputs[3] == std::optional<std::int64_t>(5));
    int sends = 0;
    for (const Annotation& a : r.transcript.notes)
        if (a.kind == "send") ++sends;
    CHECK(sends == 1);
}

TEST_CASE("one-shot rejects non-adjacent endpoints and non-bit payloads") {
    Graph g = ring(5);
    ScenarioSpec s;
    s.protocol = "one-shot";
    s.params = {{"src", 0}, {"dst", 2}, {"payload", "1"}};
    REQUIRE_THROWS_AS(make_protocol(s, 0, g), Error);
    s.params = {{"src", 0}, {"dst", 1}, {"payload", "10x"}};
    REQUIRE_THROWS_AS(make_protocol(s, 0, g), Error);
}

TEST_CASE("naive-xor is right on a clean channel and wrong under corruption") {
    Graph g = make_graph(2, {{0, 1}});
    ScenarioSpec s;
    s.protocol = "naive-xor";
    s.params = {{"a", 0}, {"b", 1}};
    s.inputs = {{0, "1"}, {1, "0"}};  // true answer: 1 ^ 0 = 1

    RunResult ok = run_direct(g, s, fifo(), clean());
    REQUIRE(ok.outputs[0].has_value());
    REQUIRE(ok.outputs[1].has_value());
    CHECK(*ok.outputs[0] == 1);
    CHECK(*ok.outputs[1] == 1);

    // A channel that rewrites everything to 1s makes node 0 read its peer's 0
    // as 1 and answer 1^1 = 0.
    RunResult bad = run_direct(g, s, fifo(), {AdvKind::Constant, 0, '1'});
    REQUIRE(bad.outputs[0].has_value());
    CHECK(*bad.outputs[0] == 0);  // wrong, and provably unavoidable for content-trusting protocols
}

TEST_CASE("direct transport expands a broadcast into per-neighbor sends") {
    Graph g = make_graph(4, {{0, 1}, {0, 2}, {0, 3}});
    ScenarioSpec s;
    s.protocol = "flood-max";
    s.inputs = {{0, "11"}, {1, "0"}, {2, "0"}, {3, "0"}};
    RunResult r = run_direct(g, s, fifo(), clean());
    int sends_from_0 = 0;
    for (const Annotation& a : r.transcript.notes)
        if (a.kind == "send" && a.node == 0) ++sends_from_0;
    REQUIRE(sends_from_0 == 3);  // one per neighbor for the single broadcast
    for (NodeId u = 0; u < 4; ++u) CHECK(r.outputs[u] == std::optional<std::int64_t>(3));
}

TEST_CASE("scenario json round trip maps external names") {
    Graph g = graph_from_json({{"nodes", {10, 20, 30}}, {"edges", {{10, 20}, {20, 30}, {30, 10}}}}).graph;
    nlohmann::json j = {{"protocol", "flood-max"},
                        {"inputs", {{"10", "1"}, {"30", "111"}}},
                        {"params", nlohmann::json::object()}};
    ScenarioSpec s = scenario_from_json(j, g);
    CHECK(s.protocol == "flood-max");
    CHECK(s.input_of(g.internal_of(10)) == "1");
    CHECK(s.input_of(g.internal_of(20)) == "0");  // default
    CHECK(s.input_of(g.internal_of(30)) == "111");
    nlohmann::json back = scenario_to_json(s, g);
    CHECK(back.at("inputs").at("10") == "1");
    CHECK(back.at("inputs").at("30") == "111");
}

TEST_CASE("unknown protocol name is rejected") {
    Graph g = make_graph(2, {{0, 1}});
    ScenarioSpec s;
    s.protocol = "no-such-thing";
    REQUIRE_THROWS_AS(make_protocol(s, 0, g), Error);
}
