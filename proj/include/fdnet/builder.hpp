#pragma once
//
// Distributed construction of the transport walk.
//
// A bridgeless graph always admits a closed walk that visits every node and
// uses every edge in exactly one direction. The stations here build one
// cooperatively even though the channels destroy all content: coordination
// rides on which edge a pulse arrives on and in what order, plus simulated
// epochs over the walks already built. No station ever consults the size of
// the graph; ids are learned by circulating them over wired detours.
//
// Round structure, starting from a designated seed node:
//   1. The current root launches a depth-first probe of content-less pulses
//      across an edge the walk does not use yet. Off-walk nodes relay it,
//      bounce it off edges into territory already visited, and cancel
//      exhausted branches back toward their parent. The probe stops when it
//      re-enters the walk (on the seed round, when it returns to the root
//      and closes the seed loop).
//   2. A second sweep along the probe path wires a detour: the path itself
//      plus, when the probe re-entered the walk elsewhere, the shortest
//      return route along the walk's own steps. An id run is simulated over
//      the detour: the root circulates its id, every member appends its own,
//      and the root announces the grown walk (old walk followed by the
//      detour's id string).
//   3. Members of the old walk adopt the grown walk, the root polls every
//      member for edges the walk still misses, and the lowest-id member
//      that reported one becomes the next round's root. No reports means
//      every edge is covered and everyone stops.
//
// Everything a station does is triggered by a pulse arrival, a decoded
// delivery, or an epoch completion of one of its hosted walk transports;
// transports are rewired only inside epoch completions, where the epoch
// structure guarantees no traffic for the old wiring is still in flight.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fdnet/bits.hpp"
#include "fdnet/cycle.hpp"
#include "fdnet/cycle_sim.hpp"
#include "fdnet/engine.hpp"
#include "fdnet/graph.hpp"

namespace fdnet {

// ---- control messages -------------------------------------------------------

enum class BuildTag : int {
    EarClosed = 1,   // + node id: the probe re-entered the walk at this node
    Ready = 2,       //            the detour is wired end to end
    NewCycle = 3,    // + id list: the grown walk, adopted by old-walk members
    CheckEdges = 4,  //            root asks everyone to scan for unused edges
    HasSpare = 5,    // + node id: reporter still has an edge off the walk
    NoSpare = 6,     // + node id: all of the reporter's edges are on the walk
    NewRoot = 7,     // + node id: rotate the walk here; this node probes next
    Finished = 8,    //            every edge is covered; stop
    IdChain = 9,     // + id list: ids accumulated along the detour so far
    IdDone = 10,     // + id list: the grown walk, announced over the detour
};

struct BuildMsg {
    BuildTag tag = BuildTag::Ready;
    NodeId id = -1;
    std::vector<NodeId> ids;
};

inline Bits build_msg_pack(const BuildMsg& m) {
    Bits out;
    gamma_append(out, std::uint64_t(int(m.tag)));
    switch (m.tag) {
        case BuildTag::EarClosed:
        case BuildTag::HasSpare:
        case BuildTag::NoSpare:
        case BuildTag::NewRoot:
            if (m.id < 0) throw Error("control message: negative id");
            gamma_append(out, std::uint64_t(m.id) + 1);
            break;
        case BuildTag::NewCycle:
        case BuildTag::IdChain:
        case BuildTag::IdDone:
            gamma_append(out, std::uint64_t(m.ids.size()) + 1);
            for (NodeId u : m.ids) {
                if (u < 0) throw Error("control message: negative id");
                gamma_append(out, std::uint64_t(u) + 1);
            }
            break;
        default:
            break;
    }
    return out;
}

inline BuildMsg build_msg_unpack(const Bits& b) {
    std::size_t pos = 0;
    std::uint64_t tag = gamma_read(b, pos);
    if (tag < 1 || tag > 10) throw Error("control message: unknown tag");
    BuildMsg m;
    m.tag = BuildTag(int(tag));
    switch (m.tag) {
        case BuildTag::EarClosed:
        case BuildTag::HasSpare:
        case BuildTag::NoSpare:
        case BuildTag::NewRoot:
            m.id = NodeId(gamma_read(b, pos) - 1);
            break;
        case BuildTag::NewCycle:
        case BuildTag::IdChain:
        case BuildTag::IdDone: {
            std::uint64_t n = gamma_read(b, pos) - 1;
            m.ids.reserve(std::size_t(n));
            for (std::uint64_t i = 0; i < n; ++i) m.ids.push_back(NodeId(gamma_read(b, pos) - 1));
            break;
        }
        default:
            break;
    }
    if (pos != b.size()) throw Error("control message: trailing bits");
    return m;
}

// ---- the per-node automaton ---------------------------------------------------

class BuildStation : public Automaton {
   public:
    BuildStation(const Graph& g, NodeId me, bool seed_root)
        : graph_(g), me_(me), seed_root_(seed_root) {}

    void on_init(Context& ctx) override {
        Scoped bind(*this, ctx);
        if (seed_root_) launch_probe();
    }

    void on_pulse(Context& ctx, NodeId from, const Bits&) override {
        Scoped bind(*this, ctx);
        if (ear_armed_ && ear_ids_.count(from)) {
            ear_->on_pulse(from);
            return;
        }
        if (cur_ && cur_ids_.count(from)) {
            cur_->on_pulse(from);
            return;
        }
        raw_pulse(from);
    }

    bool finished() const { return finished_; }
    const CycleRep& walk() const { return cycle_; }

   private:
    // Station callbacks need the engine context of the call they run inside.
    struct Scoped {
        Scoped(BuildStation& s, Context& c) : s_(s) { s_.ctx_ = &c; }
        ~Scoped() { s_.ctx_ = nullptr; }
        BuildStation& s_;
    };

    // ---- raw probe layer ------------------------------------------------------

    // The probe is a single content-less pulse walking depth-first through
    // off-walk territory. Path nodes remember only the edge it came from and
    // the edge it left by; `used_` marks edges that must not be tried again
    // this round (taken, bounced, or cancelled).
    enum class Probe {
        Idle,        // not visited this round (walk members stay Idle)
        Path,        // on the probe's current path
        RootWait,    // this round's root, probe launched
        RootReturn,  // seed root only: loop closed, second sweep under way
    };

    void raw_pulse(NodeId w) {
        if (await_arm_pulse_ && w == ear_prev_) {
            // The second sweep reached the detour's end: everything between
            // the root and us is wired. Tell the walk to switch over.
            await_arm_pulse_ = false;
            enqueue_cur({BuildTag::Ready, -1, {}});
            return;
        }
        if (!ear_armed_ && ear_prev_ != -1 && w == ear_prev_ && probe_ != Probe::RootReturn) {
            // Detour traffic can outrun our own switch-over (the id run
            // starts as soon as the root is ready); hold it until we are.
            // The seed root is exempt: its returning sweep rides this edge
            // and is handled below.
            ear_buffer_.push_back(w);
            return;
        }
        if (on_walk_) {
            if (probe_ == Probe::RootWait && w == probe_next_) {
                ctx_->fault("probe cancelled back to its root: graph has a bridge");
                return;
            }
            // A probe re-entered the walk here: this node closes the detour.
            probe_ = Probe::Idle;
            ear_prev_ = w;
            await_arm_pulse_ = true;
            ctx_->annotate("ear-closed", {{"at", me_}});
            enqueue_cur({BuildTag::EarClosed, me_, {}});
            return;
        }
        switch (probe_) {
            case Probe::Idle: {  // first visit this round
                ctx_->annotate("probe-visit", nlohmann::json::object());
                probe_prev_ = w;
                used_.insert(w);
                NodeId u = pick_unused();
                if (u == -1) {
                    ctx_->fault("probe stuck at a dead end: graph has a bridge");
                    return;
                }
                used_.insert(u);
                probe_next_ = u;
                probe_ = Probe::Path;
                raw_send(u);
                return;
            }
            case Probe::Path: {
                if (w == probe_next_) {
                    // The branch we sent the probe down came back; try another
                    // edge, or cancel toward the parent and forget the visit.
                    NodeId u = pick_unused();
                    if (u != -1) {
                        used_.insert(u);
                        probe_next_ = u;
                        raw_send(u);
                        return;
                    }
                    NodeId parent = probe_prev_;
                    reset_probe();
                    ctx_->annotate("probe-reset", nlohmann::json::object());
                    raw_send(parent);
                    return;
                }
                if (w == probe_prev_) {
                    // The second sweep: this node is on the detour. Pass the
                    // sweep along and switch to transport duty.
                    NodeId next = probe_next_;
                    NodeId prev = probe_prev_;
                    reset_probe();
                    raw_send(next);
                    arm_ear(prev, next, /*holder=*/false);
                    return;
                }
                // A probe pulse from elsewhere: the path is taken; bounce it.
                used_.insert(w);
                raw_send(w);
                return;
            }
            case Probe::RootWait: {  // seed root, off-walk
                if (w == probe_next_) {
                    ctx_->fault("probe cancelled back to its root: graph has a bridge");
                    return;
                }
                // The probe came back around: the seed loop exists. Sweep it
                // once more to wire every member.
                ear_prev_ = w;
                ctx_->annotate("ear-closed", {{"at", me_}});
                probe_ = Probe::RootReturn;
                raw_send(probe_next_);
                return;
            }
            case Probe::RootReturn: {
                if (w != ear_prev_) {
                    ctx_->fault("unexpected pulse while wiring the seed loop");
                    return;
                }
                arm_ear(ear_prev_, probe_next_, /*holder=*/true);
                probe_ = Probe::Idle;
                // Circulate the id string; everyone appends theirs after ours.
                enqueue_ear_to_next({BuildTag::IdChain, -1, {me_}});
                return;
            }
        }
    }

    void launch_probe() {
        NodeId u = lowest_spare_neighbor();
        if (u == -1) {
            ctx_->fault("root has no unused edge to probe");
            return;
        }
        probe_next_ = u;
        probe_ = Probe::RootWait;
        raw_send(u);
    }

    void raw_send(NodeId to) {
        ctx_->annotate("probe-pulse", {{"to", to}});
        ctx_->send(to, Bits("0"));
    }

    void reset_probe() {
        probe_ = Probe::Idle;
        probe_prev_ = probe_next_ = -1;
        used_.clear();
    }

    // Lowest-id neighbor across an edge this round has not tried yet.
    NodeId pick_unused() const {
        for (NodeId w : graph_.neighbors(me_))  // adjacency is sorted
            if (!used_.count(w)) return w;
        return -1;
    }

    // Lowest-id neighbor across an edge the walk does not use.
    NodeId lowest_spare_neighbor() const {
        auto onwalk = walk_edges();
        for (NodeId w : graph_.neighbors(me_))
            if (!onwalk.count(make_edge(me_, w))) return w;
        return -1;
    }

    std::set<Edge> walk_edges() const {
        return cycle_.global.empty() ? std::set<Edge>{} : cycle_.undirected_edges();
    }

    bool has_spare_edge() const { return lowest_spare_neighbor() != -1; }

    // ---- walk (cur) deliveries ------------------------------------------------

    void cur_deliver(const Envelope& e) {
        BuildMsg m = build_msg_unpack(e.payload);
        switch (m.tag) {
            case BuildTag::EarClosed:
                on_ear_closed(m.id);
                break;
            case BuildTag::Ready:
                // Wired detour members switch over once this epoch is done
                // everywhere they can see; the root then starts the id run.
                if (ear_prev_ != -1 && ear_next_ != -1 && !ear_armed_)
                    cur_deferred_.push_back([this] {
                        arm_ear(ear_prev_, ear_next_, me_ == root_);
                        if (me_ == root_) enqueue_ear_to_next({BuildTag::IdChain, -1, {me_}});
                    });
                break;
            case BuildTag::NewCycle: {
                CycleRep grown{m.ids};
                cur_deferred_.push_back([this, grown] { adopt_walk(grown); });
                break;
            }
            case BuildTag::CheckEdges:
                if (me_ == root_) {
                    poll_replies_.clear();
                    poll_spare_.clear();
                }
                enqueue_cur({has_spare_edge() ? BuildTag::HasSpare : BuildTag::NoSpare, me_, {}});
                break;
            case BuildTag::HasSpare:
            case BuildTag::NoSpare:
                on_poll_reply(m.tag == BuildTag::HasSpare, m.id);
                break;
            case BuildTag::NewRoot:
                root_ = m.id;
                cycle_ = rotate_to(cycle_, m.id);
                if (me_ == root_) launch_probe();
                break;
            case BuildTag::Finished:
                cur_deferred_.push_back([this] { finish(); });
                break;
            default:
                ctx_->fault("unexpected control message on the walk");
        }
    }

    void on_ear_closed(NodeId z) {
        if (z != root_) {
            // Open detour: the return route is the shortest path from the
            // closing node back to the root along the walk's directed steps.
            // Every member computes the same path and wires its own hop.
            auto path = shortest_directed_path(cycle_, z, root_);
            for (std::size_t i = 0; i < path.size(); ++i) {
                if (path[i] != me_) continue;
                if (i + 1 < path.size()) ear_next_ = path[i + 1];
                if (i > 0) ear_prev_ = path[i - 1];
            }
        }
        if (me_ == root_) {
            // Our probe edge is the detour's first hop (a closed detour came
            // back to us, so ear_prev_ is already the raw closure edge).
            ear_next_ = probe_next_;
            probe_ = Probe::Idle;
            probe_prev_ = probe_next_ = -1;
            raw_send(ear_next_);  // second sweep: wire the detour end to end
        }
    }

    void on_poll_reply(bool spare, NodeId id) {
        if (me_ != root_) return;
        poll_replies_.insert(id);
        if (spare) poll_spare_.insert(id);
        std::set<NodeId> members(cycle_.global.begin(), cycle_.global.end());
        if (poll_replies_.size() < members.size()) return;
        if (poll_spare_.empty()) {
            enqueue_cur({BuildTag::Finished, -1, {}});
        } else {
            NodeId next_root = *poll_spare_.begin();
            ctx_->annotate("new-root", {{"id", next_root}});
            enqueue_cur({BuildTag::NewRoot, next_root, {}});
        }
    }

    // ---- detour (ear) deliveries ------------------------------------------------

    void ear_deliver(const Envelope& e) {
        BuildMsg m = build_msg_unpack(e.payload);
        switch (m.tag) {
            case BuildTag::IdChain: {
                if (m.ids.empty()) {
                    ctx_->fault("empty id chain");
                    return;
                }
                if (m.ids.front() != me_) {
                    std::vector<NodeId> ids = m.ids;
                    ids.push_back(me_);
                    enqueue_ear_to_next({BuildTag::IdChain, -1, std::move(ids)});
                } else {
                    // The chain came home: old walk followed by the detour's
                    // id string is the grown walk.
                    std::vector<NodeId> grown = cycle_.global;
                    grown.insert(grown.end(), m.ids.begin(), m.ids.end());
                    ctx_->annotate("walk-grown", {{"len", grown.size()}});
                    enqueue_ear({BuildTag::IdDone, -1, std::move(grown)});
                }
                break;
            }
            case BuildTag::IdDone: {
                CycleRep grown{m.ids};
                ear_deferred_.push_back([this, grown] { absorb_grown_walk(grown); });
                break;
            }
            default:
                ctx_->fault("unexpected control message on the detour");
        }
    }

    void absorb_grown_walk(const CycleRep& grown) {
        retire_ear();
        if (!on_walk_) {
            // Seed-loop members and nodes the probe picked up join here.
            adopt_walk(grown);
        } else if (me_ == root_) {
            // Old-walk members adopt when this lands (the detour members who
            // are also on the old walk keep their old transport until then).
            enqueue_cur({BuildTag::NewCycle, -1, grown.global});
        }
    }

    void adopt_walk(const CycleRep& grown) {
        retire_cur();
        cycle_ = grown;
        root_ = grown.global.front();
        on_walk_ = true;
        reset_probe();
        arm_cur();
        if (me_ == root_) enqueue_cur({BuildTag::CheckEdges, -1, {}});
    }

    void finish() {
        if (cur_) cur_->halt();
        finished_ = true;
        ctx_->annotate("build-complete", {{"len", cycle_.length()}});
    }

    // ---- hosted transports ------------------------------------------------------

    StationHost make_host(const char* lane, int gen, bool ear) {
        StationHost host;
        host.pulse = [this](NodeId to) { ctx_->send(to, Bits("0")); };
        host.annotate = [this, lane, gen](const std::string& k, nlohmann::json d) {
            d["lane"] = lane;
            d["gen"] = gen;
            ctx_->annotate(k, std::move(d));
        };
        if (ear) {
            host.deliver = [this](const Envelope& e) { ear_deliver(e); };
            host.epoch_complete = [this](std::uint64_t) { run_deferred(ear_deferred_); };
        } else {
            host.deliver = [this](const Envelope& e) { cur_deliver(e); };
            host.epoch_complete = [this](std::uint64_t) { run_deferred(cur_deferred_); };
        }
        return host;
    }

    static StationConfig base_config(NodeId me, bool holder) {
        StationConfig sc;
        sc.me = me;
        sc.mode = Mode::Binary;
        sc.pad_l = 2;
        sc.initial_holder = holder;
        sc.self_deliver_broadcast = true;  // senders act on the common schedule
        sc.self_delimiting_wire = true;    // the id universe is not known here
        return sc;
    }

    void arm_ear(NodeId prev, NodeId next, bool holder) {
        StationConfig sc = base_config(me_, holder);
        sc.view = LocalView{1, {prev}, {next}};
        ear_ = std::make_unique<CycleStation>(std::move(sc), make_host("ear", ear_gen_++, true));
        ear_ids_ = {prev, next};
        ear_prev_ = prev;
        ear_next_ = next;
        ear_armed_ = true;
        ear_->start();
        std::vector<NodeId> held = std::move(ear_buffer_);
        ear_buffer_.clear();
        for (NodeId w : held) ear_->on_pulse(w);
    }

    void arm_cur() {
        StationConfig sc = base_config(me_, me_ == root_);
        sc.view = cycle_.local_view(me_);
        cur_ids_.clear();
        for (NodeId w : sc.view.prev) cur_ids_.insert(w);
        for (NodeId w : sc.view.next) cur_ids_.insert(w);
        cur_ = std::make_unique<CycleStation>(std::move(sc), make_host("cur", cur_gen_++, false));
        cur_->start();
    }

    // Stations retire inside their own epoch-completion callbacks; halting
    // first makes the rest of that callback a no-op, and the graveyard keeps
    // the object alive until the run ends.
    void retire_ear() {
        if (!ear_) return;
        ear_->halt();
        graveyard_.push_back(std::move(ear_));
        ear_ids_.clear();
        ear_armed_ = false;
        ear_prev_ = ear_next_ = -1;
        await_arm_pulse_ = false;
        ear_buffer_.clear();
        ear_deferred_.clear();
    }

    void retire_cur() {
        if (!cur_) return;
        cur_->halt();
        graveyard_.push_back(std::move(cur_));
        cur_ids_.clear();
        cur_deferred_.clear();
    }

    void enqueue_cur(const BuildMsg& m) {
        cur_->enqueue(Envelope{me_, kBroadcast, build_msg_pack(m)});
    }

    void enqueue_ear(const BuildMsg& m) {
        ear_->enqueue(Envelope{me_, kBroadcast, build_msg_pack(m)});
    }

    void enqueue_ear_to_next(const BuildMsg& m) {
        ear_->enqueue(Envelope{me_, ear_next_, build_msg_pack(m)});
    }

    static void run_deferred(std::vector<std::function<void()>>& v) {
        std::vector<std::function<void()>> acts = std::move(v);
        v.clear();
        for (auto& f : acts) f();
    }

    // ---- state -------------------------------------------------------------------

    const Graph& graph_;
    NodeId me_;
    bool seed_root_;
    Context* ctx_ = nullptr;

    Probe probe_ = Probe::Idle;
    NodeId probe_prev_ = -1;
    NodeId probe_next_ = -1;
    std::set<NodeId> used_;

    bool on_walk_ = false;
    bool finished_ = false;
    CycleRep cycle_;  // current walk, first entry is the current root
    NodeId root_ = -1;

    std::unique_ptr<CycleStation> cur_, ear_;
    std::set<NodeId> cur_ids_, ear_ids_;
    std::vector<std::function<void()>> cur_deferred_, ear_deferred_;
    std::vector<std::unique_ptr<CycleStation>> graveyard_;
    int cur_gen_ = 0, ear_gen_ = 0;

    NodeId ear_prev_ = -1, ear_next_ = -1;
    bool ear_armed_ = false;
    bool await_arm_pulse_ = false;
    std::vector<NodeId> ear_buffer_;

    std::set<NodeId> poll_replies_, poll_spare_;
};

// ---- runner -----------------------------------------------------------------------

struct BuildConfig {
    NodeId root = 0;
    SchedulerCfg sched{};
    AdversaryCfg adv{};
    std::uint64_t budget = 10'000'000;
    bool record_pulses = false;
};

struct BuildStats {
    std::uint64_t probe_pulses = 0;  // raw exploration pulses (all sweeps)
    std::uint64_t deliveries = 0;    // every pulse the run delivered
    int ears = 0;                    // detour closures, seed loop included
    int rounds = 0;                  // root hand-offs
};

struct BuildResult {
    CycleRep cycle;
    Transcript transcript;
    BuildStats stats;
};

inline BuildResult build_cycle(const Graph& g, const BuildConfig& cfg = {}) {
    if (cfg.root < 0 || cfg.root >= g.n) throw Error("build_cycle: root out of range");
    if (!is_two_edge_connected(g)) {
        std::string why;
        if (g.n < 3)
            why = "fewer than three nodes";
        else if (!is_connected(g))
            why = "the graph is disconnected";
        else {
            why = "bridge edges:";
            for (const Edge& e : find_bridges(g))
                why += " " + std::to_string(e.first) + "-" + std::to_string(e.second);
        }
        throw Error("build_cycle: every channel must lie on a cycle (" + why + ")");
    }
    Engine eng(g, cfg.sched, cfg.adv, cfg.budget);
    eng.set_record_pulses(cfg.record_pulses);
    std::vector<BuildStation*> st(std::size_t(g.n));
    for (NodeId u = 0; u < g.n; ++u) {
        auto s = std::make_unique<BuildStation>(g, u, u == cfg.root);
        st[std::size_t(u)] = s.get();
        eng.attach(u, std::move(s));
    }
    BuildResult r;
    r.transcript = eng.run();
    if (r.transcript.halt != HaltReason::Quiescence) {
        std::string why = halt_reason_name(r.transcript.halt);
        if (!r.transcript.fault.empty()) why += ": " + r.transcript.fault;
        throw Error("build_cycle: run ended early (" + why + ")");
    }
    for (NodeId u = 0; u < g.n; ++u) {
        if (!st[std::size_t(u)]->finished())
            throw Error("build_cycle: node " + std::to_string(u) + " never finished");
        if (st[std::size_t(u)]->walk().global != st[0]->walk().global)
            throw Error("build_cycle: stations disagree about the walk");
    }
    CycleCheck chk = validate_cycle(st[0]->walk(), g);
    if (!chk.ok()) throw Error("build_cycle: built walk is invalid: " + chk.detail);
    r.cycle = st[0]->walk();
    r.stats.deliveries = r.transcript.deliveries;
    for (const Annotation& a : r.transcript.notes) {
        if (a.kind == "probe-pulse") ++r.stats.probe_pulses;
        else if (a.kind == "ear-closed") ++r.stats.ears;
        else if (a.kind == "new-root") ++r.stats.rounds;
    }
    return r;
}

}  // namespace fdnet
