// fdnet — command-line front end for the defective-network simulation stack.
//
// Subcommands:
//
//   simulate     Run a protocol scenario over a network whose channels corrupt
//                every payload, carried by the pulse transport (unary or
//                binary framing), verify the resulting transcript, and emit a
//                report. `--mode direct` instead runs the protocol unprotected
//                on the raw channels, as a reference (pair it with
//                `--adversary identity` for a clean run).
//
//   build-cycle  Run the distributed, content-oblivious walk construction on a
//                graph and emit the walk document that `simulate --cycle`
//                consumes.
//
//   bench        Per-message pulse-cost table across payload sizes and framing
//                modes, on rings of configurable size.
//
//   demo-bridge  Two-party impossibility demonstration: under an adversary
//                that rewrites every payload to "1", a protocol that trusts
//                message content must answer wrongly or not at all on some
//                input. Exits nonzero when the demonstration succeeds — which
//                it is designed to do.
//
// Every command prints a short human summary followed by a machine-readable
// report; `--out` additionally writes a document to a file. Reports are
// deterministic: the same command line produces byte-identical output.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdnet/builder.hpp"
#include "fdnet/verifier.hpp"

namespace {

using ordered = nlohmann::ordered_json;

// ---- shared option plumbing -------------------------------------------------

struct NetOpts {
    std::string scheduler = "random";
    std::string adversary = "randomize";
    std::uint64_t seed_sched = 1;
    std::uint64_t seed_adv = 2;
    std::uint64_t budget = 5'000'000;
};

void add_net_flags(CLI::App* cmd, NetOpts& o) {
    cmd->add_option("--scheduler", o.scheduler, "Delivery-order policy")
        ->check(CLI::IsMember({"fifo", "random", "lifo"}))
        ->capture_default_str();
    cmd->add_option("--adversary", o.adversary,
                    "Payload corruption policy (ones rewrites every bit to 1)")
        ->check(CLI::IsMember({"identity", "randomize", "ones", "flip-all"}))
        ->capture_default_str();
    cmd->add_option("--seed-sched", o.seed_sched, "Scheduler RNG seed")->capture_default_str();
    cmd->add_option("--seed-adv", o.seed_adv, "Adversary RNG seed")->capture_default_str();
    cmd->add_option("--budget", o.budget, "Pulse-delivery budget before a run is cut off")
        ->capture_default_str();
}

fdnet::SchedulerCfg sched_of(const NetOpts& o) {
    return {fdnet::sched_kind_from_string(o.scheduler), o.seed_sched, {}};
}

fdnet::AdversaryCfg adv_of(const NetOpts& o) {
    fdnet::AdversaryCfg a;
    a.seed = o.seed_adv;
    if (o.adversary == "ones") {
        a.kind = fdnet::AdvKind::Constant;
        a.bit = '1';
    } else {
        a.kind = fdnet::adv_kind_from_string(o.adversary);
    }
    return a;
}

ordered net_config_json(const NetOpts& o) {
    ordered j;
    j["scheduler"] = o.scheduler;
    j["adversary"] = o.adversary;
    j["seed_sched"] = o.seed_sched;
    j["seed_adv"] = o.seed_adv;
    j["budget"] = o.budget;
    return j;
}

void emit_report(const ordered& report, const std::string& out_path) {
    std::cout << report.dump(2) << "\n";
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw fdnet::Error("cannot write file: " + out_path);
        f << report.dump(2) << "\n";
    }
}

ordered walk_names(const fdnet::CycleRep& c, const fdnet::Graph& g) {
    auto arr = ordered::array();
    for (fdnet::NodeId u : c.global) arr.push_back(g.name_of(u));
    return arr;
}

std::uint64_t count_notes(const fdnet::Transcript& t, const std::string& kind) {
    std::uint64_t n = 0;
    for (const fdnet::Annotation& a : t.notes)
        if (a.kind == kind) ++n;
    return n;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateOpts {
    std::string graph_path;
    std::string scenario_path;
    std::string mode = "binary";
    int pad_l = 2;
    std::string cycle_path;
    std::string out_path;
    NetOpts net;
};

int cmd_simulate(const SimulateOpts& o) {
    fdnet::GraphFile gf = fdnet::graph_from_json(fdnet::load_json_file(o.graph_path));
    const fdnet::Graph& g = gf.graph;
    fdnet::ScenarioSpec s = fdnet::scenario_from_json(fdnet::load_json_file(o.scenario_path), g);

    ordered report;
    report["command"] = "simulate";
    ordered cfg = net_config_json(o.net);
    cfg["graph"] = o.graph_path;
    cfg["scenario"] = o.scenario_path;
    cfg["protocol"] = s.protocol;
    cfg["mode"] = o.mode;
    cfg["pad_l"] = o.pad_l;
    cfg["cycle"] = o.cycle_path.empty() ? ordered(nullptr) : ordered(o.cycle_path);
    report["config"] = cfg;

    fdnet::Transcript t;
    std::map<fdnet::NodeId, std::optional<std::int64_t>> outputs;
    fdnet::BroadcastShape shape = fdnet::BroadcastShape::AllButSender;
    bool check_fifo = true;

    if (o.mode == "direct") {
        fdnet::RunResult r = fdnet::run_direct(g, s, sched_of(o.net), adv_of(o.net), o.net.budget);
        t = std::move(r.transcript);
        outputs = std::move(r.outputs);
        shape = fdnet::BroadcastShape::PerNeighbor;
        check_fifo = false;
    } else {
        fdnet::CycleRep cycle;
        std::string source;
        if (!o.cycle_path.empty()) {
            cycle = fdnet::cycle_from_json(fdnet::load_json_file(o.cycle_path), g);
            source = "loaded from file";
        } else {
            bool degree_two = true;
            for (int u = 0; u < g.n; ++u) degree_two = degree_two && g.degree(u) == 2;
            if (degree_two) {
                cycle = fdnet::cycle_from_simple_graph(g, gf.root);
                source = "the graph is itself a cycle";
            } else {
                fdnet::BuildConfig bc;
                bc.root = gf.root;
                bc.sched = sched_of(o.net);
                bc.adv = adv_of(o.net);
                cycle = fdnet::build_cycle(g, bc).cycle;
                source = "constructed";
            }
        }
        ordered cj;
        cj["source"] = source;
        cj["length"] = cycle.length();
        cj["walk"] = walk_names(cycle, g);
        report["cycle"] = cj;

        fdnet::CycleSimConfig cc;
        cc.mode = fdnet::mode_from_string(o.mode);
        cc.pad_l = o.pad_l;
        cc.sched = sched_of(o.net);
        cc.adv = adv_of(o.net);
        cc.budget = o.net.budget;
        fdnet::CycleRunResult r = fdnet::run_cycle_sim(g, cycle, s, cc);
        t = std::move(r.transcript);
        outputs = std::move(r.outputs);
    }

    fdnet::TauCheck v = fdnet::verify_tau(g, s, t, outputs, shape, check_fifo);

    ordered outj = ordered::object();
    std::ostringstream outline;
    for (const auto& [u, val] : outputs) {
        std::string name = std::to_string(g.name_of(u));
        if (val) {
            outj[name] = *val;
            outline << " " << name << "=" << *val;
        } else {
            outj[name] = nullptr;
            outline << " " << name << "=none";
        }
    }
    report["outputs"] = outj;

    ordered m;
    m["pulses"] = t.deliveries;
    m["envelope_sends"] = v.sends;
    m["envelope_recvs"] = v.recvs;
    if (o.mode != "direct") m["epochs"] = count_notes(t, "dequeue");
    report["metrics"] = m;
    report["verdict"] = v.ok ? "valid" : "invalid: " + v.detail;
    if (t.halt == fdnet::HaltReason::Fault) report["fault"] = t.fault;
    report["halt"] = fdnet::halt_reason_name(t.halt);

    std::cout << "simulate: " << s.protocol << " on " << o.graph_path << ", mode " << o.mode
              << "\n"
              << "outputs:" << outline.str() << "\n"
              << "verdict: " << (v.ok ? "valid" : "INVALID") << ", halt: "
              << fdnet::halt_reason_name(t.halt) << "\n";
    emit_report(report, o.out_path);
    return v.ok && t.halt == fdnet::HaltReason::Quiescence ? 0 : 1;
}

// ---- build-cycle ---------------------------------------------------------------

struct BuildOpts {
    std::string graph_path;
    std::string out_path;
    NetOpts net;
};

int cmd_build_cycle(const BuildOpts& o) {
    fdnet::GraphFile gf = fdnet::graph_from_json(fdnet::load_json_file(o.graph_path));
    const fdnet::Graph& g = gf.graph;

    fdnet::BuildConfig bc;
    bc.root = gf.root;
    bc.sched = sched_of(o.net);
    bc.adv = adv_of(o.net);
    bc.budget = o.net.budget;
    fdnet::BuildResult r = fdnet::build_cycle(g, bc);

    if (!o.out_path.empty())
        fdnet::save_json_file(o.out_path, fdnet::cycle_to_json(r.cycle, g));

    ordered report;
    report["command"] = "build-cycle";
    ordered cfg = net_config_json(o.net);
    cfg["graph"] = o.graph_path;
    cfg["root"] = g.name_of(bc.root);
    cfg["out"] = o.out_path.empty() ? ordered(nullptr) : ordered(o.out_path);
    report["config"] = cfg;

    ordered cj;
    cj["length"] = r.cycle.length();
    cj["walk"] = walk_names(r.cycle, g);
    report["cycle"] = cj;

    ordered m;
    m["nodes"] = g.n;
    m["edges"] = g.edges.size();
    m["ears"] = r.stats.ears;
    m["rounds"] = r.stats.rounds;
    m["probe_pulses"] = r.stats.probe_pulses;
    m["deliveries"] = r.stats.deliveries;
    report["metrics"] = m;
    report["halt"] = fdnet::halt_reason_name(r.transcript.halt);

    std::cout << "build-cycle: walk of length " << r.cycle.length() << " over " << g.n
              << " nodes / " << g.edges.size() << " edges (" << r.stats.ears << " ears, "
              << r.stats.rounds << " rounds)\n";
    if (!o.out_path.empty()) std::cout << "walk document written to " << o.out_path << "\n";
    emit_report(report, "");
    return 0;
}

// ---- bench ---------------------------------------------------------------------

struct BenchOpts {
    std::vector<int> n_list = {5};
    int m_min = 1;
    int m_max = 6;
    std::string mode = "both";
    int pad_l = 2;
    std::string out_path;
    NetOpts net;
};

int cmd_bench(const BenchOpts& o) {
    std::vector<std::string> modes;
    if (o.mode == "both")
        modes = {"unary", "binary"};
    else
        modes = {o.mode};

    ordered report;
    report["command"] = "bench";
    ordered cfg = net_config_json(o.net);
    cfg["n"] = o.n_list;
    cfg["m_min"] = o.m_min;
    cfg["m_max"] = o.m_max;
    cfg["mode"] = o.mode;
    cfg["pad_l"] = o.pad_l;
    report["config"] = cfg;

    std::cout << "one message of |m| payload bits around a ring of n stations\n\n"
              << std::left << std::setw(8) << "mode" << std::right << std::setw(4) << "n"
              << std::setw(5) << "|m|" << std::setw(10) << "pulses" << std::setw(8) << "epochs"
              << "  halt\n";

    auto rows = ordered::array();
    bool all_quiescent = true;
    for (const std::string& mode : modes) {
        for (int n : o.n_list) {
            fdnet::Graph g = fdnet::make_cycle_graph(n);

            for (int m = o.m_min; m <= o.m_max; ++m) {
                fdnet::ScenarioSpec s;
                s.protocol = "one-shot";
                s.params = {{"src", 0}, {"dst", 1}, {"payload", "1" + std::string(m - 1, '0')}};

                fdnet::CycleSimConfig cc;
                cc.mode = fdnet::mode_from_string(mode);
                cc.pad_l = o.pad_l;
                cc.sched = sched_of(o.net);
                cc.adv = adv_of(o.net);
                cc.budget = o.net.budget;
                cc.record_pulses = false;
                fdnet::CycleRunResult r = fdnet::run_simple_cycle_sim(g, 0, s, cc);

                const char* halt = fdnet::halt_reason_name(r.transcript.halt);
                all_quiescent =
                    all_quiescent && r.transcript.halt == fdnet::HaltReason::Quiescence;

                ordered row;
                row["mode"] = mode;
                row["n"] = n;
                row["m"] = m;
                row["pulses"] = r.transcript.deliveries;
                row["epochs"] = count_notes(r.transcript, "dequeue");
                row["halt"] = halt;
                rows.push_back(row);

                std::cout << std::left << std::setw(8) << mode << std::right << std::setw(4) << n
                          << std::setw(5) << m << std::setw(10) << r.transcript.deliveries
                          << std::setw(8) << count_notes(r.transcript, "dequeue") << "  " << halt
                          << "\n";
            }
        }
    }
    std::cout << "\n";

    report["rows"] = rows;
    report["halt"] = all_quiescent ? "quiescence" : "budget";
    emit_report(report, o.out_path);
    return all_quiescent ? 0 : 1;
}

// ---- demo-bridge ---------------------------------------------------------------

struct BridgeOpts {
    std::string candidate = "naive-xor";
    std::string params_text = "{}";
    std::string adversary = "ones";
    std::uint64_t seed_adv = 2;
    std::uint64_t budget = 200'000;
    std::string out_path;
};

int cmd_demo_bridge(const BridgeOpts& o) {
    NetOpts net;
    net.adversary = o.adversary;
    net.seed_adv = o.seed_adv;

    nlohmann::json params;
    try {
        params = nlohmann::json::parse(o.params_text);
    } catch (const std::exception& e) {
        throw fdnet::Error(std::string("--params is not valid JSON: ") + e.what());
    }

    fdnet::BridgeOutcome out = fdnet::bridge_demo(
        [](int x, int y) { return std::int64_t(x ^ y); }, o.candidate, adv_of(net), o.budget,
        params);

    std::cout << "two nodes, one channel, every payload corrupted by the '" << o.adversary
              << "' adversary\n"
              << "candidate: " << o.candidate << ", target function: xor\n\n";
    auto rows = ordered::array();
    for (const fdnet::BridgeRun& r : out.runs) {
        ordered row;
        row["x"] = r.x;
        row["y"] = r.y;
        row["expected"] = r.expected;
        row["output_a"] = r.out_a ? ordered(*r.out_a) : ordered(nullptr);
        row["output_b"] = r.out_b ? ordered(*r.out_b) : ordered(nullptr);
        row["halt"] = r.halt;
        row["ok"] = r.ok;
        rows.push_back(row);

        auto show = [](const std::optional<std::int64_t>& v) {
            return v ? std::to_string(*v) : std::string("none");
        };
        std::cout << "  inputs (" << r.x << "," << r.y << "): expected " << r.expected
                  << ", party a -> " << show(r.out_a) << ", party b -> " << show(r.out_b)
                  << (r.ok ? "" : "   [WRONG]") << "\n";
    }
    std::cout << "\n" << (out.demonstrated ? "demonstrated: " : "not demonstrated: ")
              << out.detail << "\n";
    if (out.demonstrated)
        std::cout << "exiting nonzero: the candidate failed, as any deterministic protocol "
                     "must on this channel\n";

    ordered report;
    report["command"] = "demo-bridge";
    ordered cfg;
    cfg["candidate"] = o.candidate;
    cfg["adversary"] = o.adversary;
    cfg["seed_adv"] = o.seed_adv;
    cfg["budget"] = o.budget;
    report["config"] = cfg;
    report["runs"] = rows;
    report["demonstrated"] = out.demonstrated;
    report["detail"] = out.detail;
    emit_report(report, o.out_path);
    return out.demonstrated ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "fdnet — protocol simulation over fully-defective networks: every payload may be\n"
        "corrupted in transit, nothing is dropped or injected, and computation survives by\n"
        "carrying information in pulse counts rather than content."};
    app.require_subcommand(1);

    SimulateOpts sim;
    CLI::App* c_sim = app.add_subcommand(
        "simulate", "Run a scenario over the noise-resilient transport and verify it");
    c_sim->add_option("--graph", sim.graph_path, "Graph document (nodes, edges, root)")
        ->required()
        ->check(CLI::ExistingFile);
    c_sim->add_option("--scenario", sim.scenario_path, "Scenario document (protocol, inputs)")
        ->required()
        ->check(CLI::ExistingFile);
    c_sim->add_option("--mode", sim.mode, "Transport framing; direct = unprotected reference")
        ->check(CLI::IsMember({"unary", "binary", "direct"}))
        ->capture_default_str();
    c_sim->add_option("--pad-l", sim.pad_l, "Binary framing terminator length L")
        ->check(CLI::Range(2, 64))
        ->capture_default_str();
    c_sim->add_option("--cycle", sim.cycle_path,
                      "Walk document from build-cycle (skips construction)")
        ->check(CLI::ExistingFile);
    c_sim->add_option("--out", sim.out_path, "Also write the report to this file");
    add_net_flags(c_sim, sim.net);

    BuildOpts bld;
    CLI::App* c_bld = app.add_subcommand(
        "build-cycle", "Construct a closed walk covering every channel, content-obliviously");
    c_bld->add_option("--graph", bld.graph_path, "Graph document (nodes, edges, root)")
        ->required()
        ->check(CLI::ExistingFile);
    c_bld->add_option("--out", bld.out_path, "Write the walk document here");
    bld.net.budget = 10'000'000;
    add_net_flags(c_bld, bld.net);

    BenchOpts bch;
    CLI::App* c_bch = app.add_subcommand(
        "bench", "Pulse cost of one message across payload sizes and framing modes");
    c_bch->add_option("--n", bch.n_list, "Ring sizes to measure")
        ->delimiter(',')
        ->check(CLI::Range(3, 64))
        ->capture_default_str();
    c_bch->add_option("--m-min", bch.m_min, "Smallest payload bit length")
        ->check(CLI::Range(1, 24))
        ->capture_default_str();
    c_bch->add_option("--m-max", bch.m_max, "Largest payload bit length")
        ->check(CLI::Range(1, 24))
        ->capture_default_str();
    c_bch->add_option("--mode", bch.mode, "Framing modes to measure")
        ->check(CLI::IsMember({"unary", "binary", "both"}))
        ->capture_default_str();
    c_bch->add_option("--pad-l", bch.pad_l, "Binary framing terminator length L")
        ->check(CLI::Range(2, 64))
        ->capture_default_str();
    c_bch->add_option("--out", bch.out_path, "Also write the report to this file");
    add_net_flags(c_bch, bch.net);

    BridgeOpts brg;
    CLI::App* c_brg = app.add_subcommand(
        "demo-bridge",
        "Show a content-trusting two-party protocol failing on one corrupted channel");
    c_brg->add_option("--candidate", brg.candidate, "Protocol to run as the candidate")
        ->capture_default_str();
    c_brg->add_option("--params", brg.params_text,
                      "Extra scenario params for the candidate, as JSON")
        ->capture_default_str();
    c_brg->add_option("--adversary", brg.adversary, "Payload corruption policy")
        ->check(CLI::IsMember({"identity", "randomize", "ones", "flip-all"}))
        ->capture_default_str();
    c_brg->add_option("--seed-adv", brg.seed_adv, "Adversary RNG seed")->capture_default_str();
    c_brg->add_option("--budget", brg.budget, "Pulse-delivery budget per run")
        ->capture_default_str();
    c_brg->add_option("--out", brg.out_path, "Also write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_bld->parsed()) return cmd_build_cycle(bld);
        if (c_bch->parsed()) return cmd_bench(bch);
        if (c_brg->parsed()) return cmd_demo_bridge(brg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
