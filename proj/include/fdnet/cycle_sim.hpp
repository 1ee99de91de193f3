#pragma once

// Pulse transport over a closed walk.
//
// Stations exchange only content-free pulses: every decision a station makes
// depends on which edge a pulse arrived on and on local state, never on pulse
// content. That is what makes the transport immune to channels that corrupt
// payloads arbitrarily (as long as they neither drop nor invent pulses).
//
// The cycle is a closed walk that uses each of its undirected edges in one
// direction only, so a station can classify any arrival as "forward"
// (clockwise, from one of its walk predecessors) or "reverse" (counter-
// clockwise, from one of its walk successors) purely by the sender.
//
// One epoch moves one queued message:
//
//   Request round   A station with something to send (or woken by a request)
//                   sends one request pulse along each of its outgoing walk
//                   edges; the wave floods the whole walk. Each station waits
//                   until every incoming walk edge delivered its request.
//   Token          The current token holder then releases the token as a
//                   reverse pulse. It walks the cycle backwards, one position
//                   at a time; the first station with a nonempty queue keeps
//                   it. A full silent lap returns it to the releaser.
//   Data           The new holder dequeues one message and emits it as a
//                   sequence of full-cycle circulations ("units"): a forward
//                   circulation encodes 1, a reverse circulation encodes 0.
//                     - unary mode: d forward circulations, d = value of
//                       1·wire in binary, then one reverse circulation as the
//                       end marker. Pulse count carries the message.
//                     - binary mode: the circulation directions spell the
//                       frame 1·pad(wire)·1·0^L bit by bit; the run of L
//                       reverse circulations is the only such run, so it
//                       terminates the epoch without any length header.
//                   Every other station forwards each circulation through all
//                   of its walk positions and records the direction pattern;
//                   when the pattern is complete it decodes the message and
//                   delivers it if it is the addressee (broadcasts deliver
//                   everywhere).
//
// A station that occurs k times on the walk tracks a local window of k
// predecessor / k successor edges, numbered relative to the holder's
// position; each token passage shifts the numbering by one (a full lap is the
// identity). All bookkeeping below is the fine print of that picture.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdnet/codec.hpp"
#include "fdnet/cycle.hpp"
#include "fdnet/engine.hpp"
#include "fdnet/protocol.hpp"

namespace fdnet {

enum class Mode { Unary, Binary };

inline const char* mode_name(Mode m) { return m == Mode::Unary ? "unary" : "binary"; }

inline Mode mode_from_string(const std::string& s) {
    if (s == "unary") return Mode::Unary;
    if (s == "binary") return Mode::Binary;
    throw Error("unknown transport mode: " + s);
}

// Callbacks a station uses to act on the world. The wrapper that hosts the
// station decides what they mean (engine sends, protocol delivery, ...).
struct StationHost {
    std::function<void(NodeId)> pulse;
    std::function<void(const std::string&, nlohmann::json)> annotate;
    std::function<void(const Envelope&)> deliver;
    std::function<void(std::uint64_t)> epoch_complete;
};

struct StationConfig {
    NodeId me = 0;
    LocalView view;
    Mode mode = Mode::Unary;
    int pad_l = 2;  // binary mode: zero-run bound of the frame
    bool initial_holder = false;
    // Deliver a station's own broadcast back to it when its epoch completes.
    // Off for user protocols (a sender knows what it sent); the cycle
    // construction turns it on so every instance reacts on a common schedule.
    bool self_deliver_broadcast = false;
    // Gamma-coded headers instead of fixed-width ones, for stations that run
    // before the id universe is known.
    bool self_delimiting_wire = false;
    int universe = 0;  // node-id bound for the fixed-width wire format
};

class CycleStation {
   public:
    CycleStation(StationConfig cfg, StationHost host)
        : me_(cfg.me),
          mode_(cfg.mode),
          pad_l_(cfg.pad_l),
          self_deliver_(cfg.self_deliver_broadcast),
          self_delimiting_(cfg.self_delimiting_wire),
          universe_(cfg.universe),
          k_(cfg.view.k),
          prev_(cfg.view.prev),
          next_(cfg.view.next),
          holder_(cfg.initial_holder),
          host_(std::move(host)) {
        if (k_ < 1 || int(prev_.size()) != k_ || int(next_.size()) != k_)
            throw Error("station: malformed local view");
        if (mode_ == Mode::Binary && pad_l_ < 2) throw Error("station: pad length must be >= 2");
        if (!self_delimiting_ && universe_ < 1)
            throw Error("station: id universe required for the fixed-width wire format");
        for (int i = 0; i < k_; ++i) {
            if (prev_[std::size_t(i)] == me_ || next_[std::size_t(i)] == me_)
                throw Error("station: self-adjacent local view");
            ++expected_[prev_[std::size_t(i)]];
            ++next_count_[next_[std::size_t(i)]];
        }
        // One direction per undirected edge; a neighbor on both sides would
        // make arrival classification ambiguous.
        for (const auto& [w, cnt] : expected_)
            if (next_count_.count(w)) throw Error("station: node appears on both sides of the walk");
        ccw_cursor_ = k_ - 1;
    }

    void start() {
        if (started_) throw Error("station: started twice");
        started_ = true;
        if (holder_) note("token-acquired");
        poll_token_phase();
    }

    void enqueue(const Envelope& env) {
        if (halted_) throw Error("station: enqueue after halt");
        if (env.src != me_) throw Error("station: enqueue with foreign src");
        if (env.dst == me_) throw Error("station: message addressed to self");
        encode_env(env);  // reject unencodable envelopes at send time, not mid-epoch
        note("send", {{"src", env.src}, {"dst", env.dst}, {"payload", env.payload}});
        queue_.push_back(env);
        poll_token_phase();
    }

    void on_pulse(NodeId from) {
        if (halted_) throw Error("station: pulse after halt");
        if (!started_) throw Error("station: pulse before start");
        const bool cw = expected_.count(from) > 0;
        if (!cw && !next_count_.count(from))
            throw Error("station: pulse from a node not adjacent on the walk");
        switch (phase_) {
            case Phase::Token: cw ? token_cw(from) : token_ccw(from); break;
            case Phase::ForwardData: cw ? forward_cw(from) : forward_ccw(from); break;
            case Phase::HolderData: cw ? holder_cw(from) : holder_ccw(from); break;
        }
    }

    // Permanently stop the station (used when a construction instance is
    // superseded). Any further traffic is a protocol violation.
    void halt() { halted_ = true; }

    bool holds_token() const { return holder_; }
    bool halted() const { return halted_; }
    std::uint64_t epoch() const { return epoch_; }
    std::size_t queue_depth() const { return queue_.size(); }
    bool idle() const { return phase_ == Phase::Token && !flooded_ && queue_.empty(); }

   private:
    enum class Phase { Token, ForwardData, HolderData };

    // ---- request round and token walk ---------------------------------------

    // Drives the token phase forward whenever its wait conditions might have
    // become true: on entry, on every queued message, on every credit.
    void poll_token_phase() {
        if (halted_ || phase_ != Phase::Token) return;
        if (!flooded_ && (!queue_.empty() || credit_total_ > 0)) {
            flooded_ = true;
            for (int i = 0; i < k_; ++i) host_.pulse(next_[std::size_t(i)]);
        }
        if (flooded_ && !awaiting_second_ && credit_total_ == k_) {
            if (holder_ && !released_) {
                released_ = true;
                holder_ = false;
                note("token-released");
                host_.pulse(prev_[0]);
            }
            awaiting_second_ = true;
            // A pulse that raced ahead of the request round is served now.
            if (early_ccw_) {
                early_ccw_ = false;
                handle_token(early_ccw_from_);
            } else if (early_cw_) {
                early_cw_ = false;
                NodeId w = early_cw_from_;
                enter_forward();
                forward_cw(w);
            }
        }
    }

    void token_cw(NodeId from) {
        if (!awaiting_second_) {
            auto it = credits_.find(from);
            int have = it == credits_.end() ? 0 : it->second;
            if (have < expected_.at(from)) {
                credits_[from] = have + 1;
                ++credit_total_;
                poll_token_phase();
                return;
            }
            // Beyond this edge's request quota: the epoch's first data pulse
            // overtook a request still in flight elsewhere. At most one pulse
            // can be ahead of us, and data reaches our window position 0 first.
            if (holder_) throw Error("station: stray forward pulse at the token holder");
            if (early_cw_ || early_ccw_)
                throw Error("station: more than one pulse ahead of the request round");
            if (from != prev_[0]) throw Error("station: early data pulse from unexpected edge");
            early_cw_ = true;
            early_cw_from_ = from;
            return;
        }
        if (from != prev_[0]) throw Error("station: first data pulse from unexpected edge");
        enter_forward();
        forward_cw(from);
    }

    void token_ccw(NodeId from) {
        if (holder_) throw Error("station: token pulse while already holding the token");
        if (!awaiting_second_) {
            if (early_cw_ || early_ccw_)
                throw Error("station: more than one pulse ahead of the request round");
            early_ccw_ = true;
            early_ccw_from_ = from;
            return;
        }
        handle_token(from);
    }

    void handle_token(NodeId from) {
        // The token walks backwards one position at a time, so it always
        // enters through our highest-numbered window slot.
        if (from != next_[std::size_t(k_ - 1)])
            throw Error("station: token arrived from unexpected edge");
        rotate_window();
        if (!queue_.empty()) {
            holder_ = true;
            note("token-acquired");
            enter_holder();
        } else {
            host_.pulse(prev_[0]);
        }
    }

    // The window is numbered relative to the holder's position; every token
    // passage moves that origin one position backwards past us, which shifts
    // our numbering by one. k passages (a full lap) restore it.
    void rotate_window() {
        if (k_ == 1) return;
        std::rotate(prev_.rbegin(), prev_.rbegin() + 1, prev_.rend());
        std::rotate(next_.rbegin(), next_.rbegin() + 1, next_.rend());
    }

    // ---- data phase: holder ---------------------------------------------------

    void enter_holder() {
        Envelope env = queue_.front();
        queue_.pop_front();
        pending_ = env;
        Bits wire = encode_env(env);
        std::uint64_t total_units = 0;
        if (mode_ == Mode::Unary) {
            ones_left_ = unary_value(wire);
            meta_sent_ = false;
            total_units = ones_left_ + 1;
        } else {
            send_units_ = frame(wire, pad_l_);
            send_idx_ = 0;
            total_units = send_units_.size();
        }
        note("dequeue", {{"src", env.src},
                         {"dst", env.dst},
                         {"payload", env.payload},
                         {"units", total_units}});
        phase_ = Phase::HolderData;
        start_next_unit();
    }

    std::optional<char> take_holder_unit() {
        if (mode_ == Mode::Unary) {
            if (ones_left_ > 0) {
                --ones_left_;
                return '1';
            }
            if (!meta_sent_) {
                meta_sent_ = true;
                return '0';
            }
            return std::nullopt;
        }
        if (send_idx_ < send_units_.size()) return send_units_[send_idx_++];
        return std::nullopt;
    }

    // Each unit is one full circulation of the cycle, pushed segment by
    // segment: send into a segment, wait for the pulse to come back around at
    // the segment's far end, move to the next segment.
    void start_next_unit() {
        std::optional<char> u = take_holder_unit();
        if (!u) {
            finish_holder_epoch();
            return;
        }
        cur_unit_ = *u;
        if (cur_unit_ == '1') {
            leg_ = 0;
            host_.pulse(next_[0]);
        } else {
            leg_ = k_ - 1;
            host_.pulse(prev_[0]);  // prev[(k-1+1) mod k]
        }
    }

    void holder_cw(NodeId from) {
        if (cur_unit_ != '0') {
            // Forward circulation in flight: the only legal forward arrival
            // is its return at the current segment's end. (No station can
            // have finished the epoch yet, so no next-epoch requests exist.)
            if (from != prev_[std::size_t((leg_ + 1) % k_)])
                throw Error("station: circulation return from unexpected edge");
            ++leg_;
            if (leg_ == k_) start_next_unit();
            else host_.pulse(next_[std::size_t(leg_)]);
            return;
        }
        // Reverse circulation in flight: stations that already finished the
        // epoch may be flooding requests for the next one.
        credit_next(from);
    }

    void holder_ccw(NodeId from) {
        if (cur_unit_ != '0') throw Error("station: reverse pulse during a forward circulation");
        if (from != next_[std::size_t(leg_)])
            throw Error("station: reverse circulation return from unexpected edge");
        --leg_;
        if (leg_ < 0) start_next_unit();
        else host_.pulse(prev_[std::size_t((leg_ + 1) % k_)]);
    }

    void finish_holder_epoch() {
        if (self_deliver_ && pending_ && pending_->dst == kBroadcast) deliver_decoded(*pending_);
        pending_.reset();
        complete_epoch();
    }

    // ---- data phase: forwarding stations --------------------------------------

    void enter_forward() {
        phase_ = Phase::ForwardData;
        cw_cursor_ = 0;
        ccw_cursor_ = k_ - 1;
        end_seen_ = false;
        ones_units_ = 0;
        rec_units_.clear();
        zero_run_ = 0;
    }

    void forward_cw(NodeId from) {
        if (ccw_cursor_ != k_ - 1) {
            // Mid reverse circulation nothing forward can reach us except
            // requests for the next epoch from stations already done.
            credit_next(from);
            return;
        }
        if (from != prev_[std::size_t(cw_cursor_)])
            throw Error("station: data pulse from unexpected edge");
        host_.pulse(next_[std::size_t(cw_cursor_)]);
        cw_cursor_ = (cw_cursor_ + 1) % k_;
        if (cw_cursor_ == 0) record_forward_unit('1');
    }

    void forward_ccw(NodeId from) {
        if (cw_cursor_ != 0) throw Error("station: reverse pulse during a forward circulation");
        if (from != next_[std::size_t(ccw_cursor_)])
            throw Error("station: reverse pulse from unexpected edge");
        if (mode_ == Mode::Unary && !end_seen_) {
            // First reverse pulse of the epoch is the end marker: the unit
            // count is final, so decode before helping it along.
            end_seen_ = true;
            deliver_decoded(decode_env(unary_wire(ones_units_)));
        }
        host_.pulse(prev_[std::size_t(ccw_cursor_)]);
        --ccw_cursor_;
        if (ccw_cursor_ < 0) {
            ccw_cursor_ = k_ - 1;
            record_forward_unit('0');
        }
    }

    void record_forward_unit(char unit) {
        if (mode_ == Mode::Unary) {
            if (unit == '1') ++ones_units_;
            else complete_epoch();  // the end marker finished its lap
            return;
        }
        rec_units_.push_back(unit);
        zero_run_ = unit == '0' ? zero_run_ + 1 : 0;
        if (zero_run_ == pad_l_) {
            // First (and only) run of L reverse circulations: frame complete.
            std::optional<Bits> wire = deframe(rec_units_, pad_l_);
            if (!wire) throw Error("station: malformed frame");
            deliver_decoded(decode_env(*wire));
            complete_epoch();
        }
    }

    // ---- shared ---------------------------------------------------------------

    void credit_next(NodeId from) {
        int have = ++next_credits_[from];
        if (have > expected_.at(from))
            throw Error("station: too many request pulses for one epoch");
    }

    void deliver_decoded(const Envelope& env) {
        if (env.dst != me_ && env.dst != kBroadcast) return;
        note("recv", {{"src", env.src}, {"dst", env.dst}, {"payload", env.payload}});
        host_.deliver(env);
    }

    void complete_epoch() {
        if (early_cw_ || early_ccw_) throw Error("station: buffered pulse left over at epoch end");
        note("epoch-complete");
        const std::uint64_t done = epoch_++;
        phase_ = Phase::Token;
        flooded_ = false;
        released_ = false;
        awaiting_second_ = false;
        credits_ = std::move(next_credits_);
        next_credits_.clear();
        credit_total_ = 0;
        for (const auto& [w, c] : credits_) credit_total_ += c;
        cw_cursor_ = 0;
        ccw_cursor_ = k_ - 1;
        end_seen_ = false;
        ones_units_ = 0;
        rec_units_.clear();
        zero_run_ = 0;
        ones_left_ = 0;
        meta_sent_ = false;
        send_units_.clear();
        send_idx_ = 0;
        host_.epoch_complete(done);
        poll_token_phase();
    }

    Bits encode_env(const Envelope& e) const {
        return self_delimiting_ ? wire_pack_sd(e) : wire_pack(e, universe_);
    }

    Envelope decode_env(const Bits& w) const {
        return self_delimiting_ ? wire_unpack_sd(w) : wire_unpack(w, universe_);
    }

    void note(const std::string& kind, nlohmann::json data = nlohmann::json::object()) {
        data["epoch"] = epoch_;
        host_.annotate(kind, std::move(data));
    }

    // configuration
    NodeId me_;
    Mode mode_;
    int pad_l_;
    bool self_deliver_;
    bool self_delimiting_;
    int universe_;
    int k_;
    std::vector<NodeId> prev_, next_;  // current window, rotated per token passage
    std::map<NodeId, int> expected_;   // request quota per incoming walk edge
    std::map<NodeId, int> next_count_;

    // lifecycle
    bool started_ = false;
    bool halted_ = false;
    Phase phase_ = Phase::Token;
    std::uint64_t epoch_ = 0;
    bool holder_ = false;
    std::deque<Envelope> queue_;
    StationHost host_;

    // token phase
    bool flooded_ = false;
    bool released_ = false;
    bool awaiting_second_ = false;
    std::map<NodeId, int> credits_;
    int credit_total_ = 0;
    std::map<NodeId, int> next_credits_;  // requests for the following epoch
    bool early_cw_ = false, early_ccw_ = false;
    NodeId early_cw_from_ = 0, early_ccw_from_ = 0;

    // data phase, forwarding side
    int cw_cursor_ = 0;
    int ccw_cursor_ = 0;
    bool end_seen_ = false;
    std::uint64_t ones_units_ = 0;  // unary: completed forward circulations
    Bits rec_units_;                // binary: recorded circulation directions
    int zero_run_ = 0;

    // data phase, holder side
    char cur_unit_ = '1';
    int leg_ = 0;
    std::uint64_t ones_left_ = 0;
    bool meta_sent_ = false;
    Bits send_units_;
    std::size_t send_idx_ = 0;
    std::optional<Envelope> pending_;
};

// ---- protocol wrapper ----------------------------------------------------------

// Hosts one protocol instance on top of one station: protocol emissions become
// queued envelopes, decoded deliveries become protocol messages, and station
// actions become engine sends/annotations.
class PiStation : public Automaton {
   public:
    PiStation(const Graph& g, StationConfig cfg, std::unique_ptr<Protocol> pi,
              std::optional<std::int64_t>* reg)
        : graph_(g), me_(cfg.me), proto_(std::move(pi)), reg_(reg) {
        StationHost host;
        host.pulse = [this](NodeId to) { ctx_->send(to, "0"); };
        host.annotate = [this](const std::string& kind, nlohmann::json data) {
            ctx_->annotate(kind, std::move(data));
        };
        host.deliver = [this](const Envelope& e) { deliver(e); };
        host.epoch_complete = [](std::uint64_t) {};
        st_ = std::make_unique<CycleStation>(std::move(cfg), std::move(host));
    }

    void on_init(Context& ctx) override {
        Scoped bind(*this, ctx);
        st_->start();
        ProtoCtx c{.sends = {}, .new_output = {}, .self = me_};
        proto_->on_init(c);
        flush(c);
    }

    void on_pulse(Context& ctx, NodeId from, const Bits&) override {
        Scoped bind(*this, ctx);
        st_->on_pulse(from);
    }

    const Protocol& protocol() const { return *proto_; }
    const CycleStation& station() const { return *st_; }

   private:
    // Station callbacks need the engine context of the call they run inside.
    struct Scoped {
        Scoped(PiStation& s, Context& c) : s_(s) { s_.ctx_ = &c; }
        ~Scoped() { s_.ctx_ = nullptr; }
        PiStation& s_;
    };

    void deliver(const Envelope& e) {
        ProtoCtx c{.sends = {}, .new_output = {}, .self = me_};
        proto_->on_message(c, e.src, e.payload);
        flush(c);
    }

    void flush(ProtoCtx& c) {
        for (const Envelope& e : c.sends) {
            if (e.dst != kBroadcast && !graph_.has_edge(me_, e.dst))
                throw Error("protocol sent to non-neighbor " + std::to_string(e.dst));
            st_->enqueue(e);
        }
        if (c.new_output) {
            if (reg_ && reg_->has_value()) throw Error("output register written twice");
            if (reg_) *reg_ = c.new_output;
            ctx_->annotate("output", {{"value", *c.new_output}});
        }
    }

    const Graph& graph_;
    NodeId me_;
    std::unique_ptr<Protocol> proto_;
    std::unique_ptr<CycleStation> st_;
    std::optional<std::int64_t>* reg_;
    Context* ctx_ = nullptr;
};

// ---- runners --------------------------------------------------------------------

struct CycleSimConfig {
    Mode mode = Mode::Unary;
    int pad_l = 2;
    SchedulerCfg sched;
    AdversaryCfg adv;
    std::uint64_t budget = 5'000'000;
    bool record_pulses = true;
};

struct CycleRunResult {
    Transcript transcript;
    std::map<NodeId, std::optional<std::int64_t>> outputs;  // effective outputs
    CycleRep cycle;
};

inline CycleRunResult run_cycle_sim(const Graph& g, const CycleRep& cycle, const ScenarioSpec& s,
                                    const CycleSimConfig& cfg = {}) {
    CycleCheck chk = validate_cycle(cycle, g);
    if (!chk.ok()) throw Error("run_cycle_sim: invalid cycle: " + chk.detail);
    Engine eng(g, cfg.sched, cfg.adv, cfg.budget);
    eng.set_record_pulses(cfg.record_pulses);
    std::vector<std::optional<std::int64_t>> regs(std::size_t(g.n));
    std::vector<const PiStation*> stations(std::size_t(g.n));
    for (NodeId u = 0; u < g.n; ++u) {
        StationConfig sc;
        sc.me = u;
        sc.view = cycle.local_view(u);
        sc.mode = cfg.mode;
        sc.pad_l = cfg.pad_l;
        sc.initial_holder = u == cycle.global.front();
        sc.universe = g.n;
        auto st = std::make_unique<PiStation>(g, std::move(sc), make_protocol(s, u, g),
                                              &regs[std::size_t(u)]);
        stations[std::size_t(u)] = st.get();
        eng.attach(u, std::move(st));
    }
    CycleRunResult r;
    r.cycle = cycle;
    r.transcript = eng.run();
    for (NodeId u = 0; u < g.n; ++u) {
        r.outputs[u] = regs[std::size_t(u)] ? regs[std::size_t(u)]
                                            : stations[std::size_t(u)]->protocol().snapshot();
    }
    return r;
}

// Degree-2 graphs carry the transport directly: the walk is the graph itself.
inline CycleRunResult run_simple_cycle_sim(const Graph& g, NodeId root, const ScenarioSpec& s,
                                           const CycleSimConfig& cfg = {}) {
    return run_cycle_sim(g, cycle_from_simple_graph(g, root), s, cfg);
}

}  // namespace fdnet
