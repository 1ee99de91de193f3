#pragma once

// User protocol layer.
//
// A protocol instance is the per-node logic under test: it reacts to an init
// call and to delivered messages, emits messages (to graph neighbors, or as a
// broadcast), and produces at most one output value via a write-once register.
// Protocols whose natural "answer" is a running best (they cannot know when
// the network is done) expose it through snapshot(); a run's effective output
// is the register if written, else the snapshot at halt time.
//
// Message identity at this layer is (src, dst, payload). dst is either a
// neighbor of src or kBroadcast; broadcast means "every node except the
// sender" and is delivered natively by the cycle transports. The direct
// transport expands it into one unicast per neighbor, which is the closest a
// single hop can get on an arbitrary graph.

#include <map>
#include <memory>
#include <optional>

#include "fdnet/codec.hpp"
#include "fdnet/engine.hpp"

namespace fdnet {

struct ProtoCtx {
    std::vector<Envelope> sends;
    std::optional<std::int64_t> new_output;
    NodeId self = 0;

    void send(NodeId dst, const Bits& payload) { sends.push_back({self, dst, payload}); }
    void broadcast(const Bits& payload) { sends.push_back({self, kBroadcast, payload}); }
    void output(std::int64_t v) {
        if (new_output) throw Error("protocol wrote its output register twice in one handler");
        new_output = v;
    }
};

class Protocol {
   public:
    Protocol(NodeId self, const Graph& g) : self_(self), graph_(g) {}
    virtual ~Protocol() = default;

    virtual void on_init(ProtoCtx&) {}
    virtual void on_message(ProtoCtx&, NodeId src, const Bits& payload) = 0;

    // Running best for protocols without a termination point of their own.
    virtual std::optional<std::int64_t> snapshot() const { return std::nullopt; }

   protected:
    NodeId self_;
    const Graph& graph_;

    const std::vector<NodeId>& neighbors() const { return graph_.neighbors(self_); }
};

struct ScenarioSpec {
    std::string protocol;
    std::map<NodeId, Bits> inputs;  // by internal id; missing nodes read as "0"
    nlohmann::json params;

    Bits input_of(NodeId u) const {
        auto it = inputs.find(u);
        return it == inputs.end() ? Bits("0") : it->second;
    }
};

inline ScenarioSpec scenario_from_json(const nlohmann::json& j, const Graph& g) {
    ScenarioSpec s;
    if (!j.contains("protocol")) throw Error("scenario file: missing \"protocol\"");
    s.protocol = j.at("protocol").get<std::string>();
    if (j.contains("inputs")) {
        for (const auto& [name, bits] : j.at("inputs").items()) {
            Bits b = bits.get<std::string>();
            require_bits(b, "scenario input");
            s.inputs[g.internal_of(std::stoll(name))] = b;
        }
    }
    s.params = j.value("params", nlohmann::json::object());
    return s;
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& s, const Graph& g) {
    nlohmann::json j;
    j["protocol"] = s.protocol;
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [u, bits] : s.inputs) inputs[std::to_string(g.name_of(u))] = bits;
    j["inputs"] = inputs;
    j["params"] = s.params;
    return j;
}

// ---- builtin protocols -------------------------------------------------------

namespace detail {

// Parse a payload as an unsigned value, tolerating noise-mangled content: a
// protocol running over a corrupting channel must not crash on garbage.
inline std::optional<std::uint64_t> parse_uint(const Bits& payload) {
    if (payload.empty() || payload.size() > 63 || !is_bits(payload)) return std::nullopt;
    return uint_from_bits(payload);
}

}  // namespace detail

// Every node floods the largest value it has seen; stabilizes on max input.
class FloodMax : public Protocol {
   public:
    FloodMax(NodeId self, const Graph& g, const Bits& input)
        : Protocol(self, g), best_(uint_from_bits(input)) {}

    void on_init(ProtoCtx& c) override { c.broadcast(bits_from_uint(best_)); }

    void on_message(ProtoCtx& c, NodeId, const Bits& payload) override {
        auto v = detail::parse_uint(payload);
        if (v && *v > best_) {
            best_ = *v;
            c.broadcast(bits_from_uint(best_));
        }
    }

    std::optional<std::int64_t> snapshot() const override { return std::int64_t(best_); }

   private:
    std::uint64_t best_;
};

// Each node sends its input to every neighbor and outputs the sum over its
// closed neighborhood once all expected values arrived.
class PairwiseSum : public Protocol {
   public:
    PairwiseSum(NodeId self, const Graph& g, const Bits& input)
        : Protocol(self, g), sum_(uint_from_bits(input)), value_(input) {}

    void on_init(ProtoCtx& c) override {
        for (NodeId v : neighbors()) c.send(v, value_);
    }

    void on_message(ProtoCtx& c, NodeId, const Bits& payload) override {
        auto v = detail::parse_uint(payload);
        sum_ += v ? *v : 0;
        if (++got_ == int(neighbors().size())) c.output(std::int64_t(sum_));
    }

   private:
    std::uint64_t sum_;
    Bits value_;
    int got_ = 0;
};

// Two nodes volley an incrementing counter; the node that reaches the round
// budget outputs it and stops replying. Long serial dependency chains.
class PingPong : public Protocol {
   public:
    PingPong(NodeId self, const Graph& g, const nlohmann::json& params)
        : Protocol(self, g),
          a_(g.internal_of(params.at("a").get<long long>())),
          b_(g.internal_of(params.at("b").get<long long>())),
          rounds_(params.at("rounds").get<std::uint64_t>()) {
        if (!g.has_edge(a_, b_)) throw Error("ping-pong: a and b must be adjacent");
        if (rounds_ < 1) throw Error("ping-pong: rounds must be >= 1");
    }

    void on_init(ProtoCtx& c) override {
        if (self_ == a_) c.send(b_, bits_from_uint(1));
    }

    void on_message(ProtoCtx& c, NodeId src, const Bits& payload) override {
        if (self_ != a_ && self_ != b_) return;
        auto v = detail::parse_uint(payload);
        std::uint64_t x = v ? *v : 0;
        last_ = std::int64_t(x);
        if (x >= rounds_) {
            c.output(std::int64_t(x));
        } else {
            c.send(src, bits_from_uint(x + 1));
        }
    }

    std::optional<std::int64_t> snapshot() const override { return last_; }

   private:
    NodeId a_, b_;
    std::uint64_t rounds_;
    std::optional<std::int64_t> last_;
};

// A counter circulates a ring a fixed number of laps; the root outputs the
// final count (= laps * n on a ring). Exercises strict one-at-a-time flow.
class CounterRing : public Protocol {
   public:
    CounterRing(NodeId self, const Graph& g, const nlohmann::json& params)
        : Protocol(self, g),
          root_(g.internal_of(params.at("root").get<long long>())),
          laps_(params.at("laps").get<int>()) {
        for (int u = 0; u < g.n; ++u)
            if (g.degree(u) != 2) throw Error("counter-ring: graph must be a simple cycle");
        if (laps_ < 1) throw Error("counter-ring: laps must be >= 1");
    }

    void on_init(ProtoCtx& c) override {
        if (self_ == root_) c.send(neighbors()[0], bits_from_uint(1));
    }

    void on_message(ProtoCtx& c, NodeId src, const Bits& payload) override {
        auto v = detail::parse_uint(payload);
        std::uint64_t x = v ? *v : 0;
        last_ = std::int64_t(x);
        if (self_ == root_) {
            if (++done_laps_ == laps_) {
                c.output(std::int64_t(x));
                return;
            }
        }
        NodeId fwd = neighbors()[0] == src ? neighbors()[1] : neighbors()[0];
        c.send(fwd, bits_from_uint(x + 1));
    }

    std::optional<std::int64_t> snapshot() const override { return last_; }

   private:
    NodeId root_;
    int laps_;
    int done_laps_ = 0;
    std::optional<std::int64_t> last_;
};

// Sends one fixed payload from `src` to an adjacent `dst`, then stays silent;
// the receiver announces the delivered payload's bit length. The minimal
// traffic generator: per-message transport costs are measured against it.
class OneShot : public Protocol {
   public:
    OneShot(NodeId self, const Graph& g, const nlohmann::json& params)
        : Protocol(self, g),
          src_(g.internal_of(params.at("src").get<long long>())),
          dst_(g.internal_of(params.at("dst").get<long long>())),
          payload_(params.at("payload").get<std::string>()) {
        if (!g.has_edge(src_, dst_)) throw Error("one-shot: src and dst must be adjacent");
        require_bits(payload_, "one-shot payload");
    }

    void on_init(ProtoCtx& c) override {
        if (self_ == src_) c.send(dst_, payload_);
    }

    void on_message(ProtoCtx& c, NodeId, const Bits& payload) override {
        if (self_ == dst_ && !done_) {
            done_ = true;
            c.output(std::int64_t(payload.size()));
        }
    }

   private:
    NodeId src_, dst_;
    Bits payload_;
    bool done_ = false;
};

// The natural-but-doomed approach to computing XOR over a noisy channel: trust
// the received content. Correct on a clean channel, wrong under corruption.
// Kept as a demonstration candidate, not as something to build on.
class NaiveXor : public Protocol {
   public:
    NaiveXor(NodeId self, const Graph& g, const Bits& input, const nlohmann::json& params)
        : Protocol(self, g), bit_(!input.empty() && input[0] == '1') {
        NodeId a = g.internal_of(params.at("a").get<long long>());
        NodeId b = g.internal_of(params.at("b").get<long long>());
        peer_ = self == a ? b : (self == b ? a : kBroadcast);
    }

    void on_init(ProtoCtx& c) override {
        if (peer_ != kBroadcast) c.send(peer_, bit_ ? "1" : "0");
    }

    void on_message(ProtoCtx& c, NodeId, const Bits& payload) override {
        if (peer_ == kBroadcast || answered_) return;
        answered_ = true;
        bool other = !payload.empty() && payload[0] == '1';
        c.output(std::int64_t(bit_ ^ other));
    }

   private:
    bool bit_ = false;
    NodeId peer_ = kBroadcast;
    bool answered_ = false;
};

inline std::unique_ptr<Protocol> make_protocol(const ScenarioSpec& s, NodeId self, const Graph& g) {
    if (s.protocol == "flood-max") return std::make_unique<FloodMax>(self, g, s.input_of(self));
    if (s.protocol == "pairwise-sum") return std::make_unique<PairwiseSum>(self, g, s.input_of(self));
    if (s.protocol == "ping-pong") return std::make_unique<PingPong>(self, g, s.params);
    if (s.protocol == "counter-ring") return std::make_unique<CounterRing>(self, g, s.params);
    if (s.protocol == "one-shot") return std::make_unique<OneShot>(self, g, s.params);
    if (s.protocol == "naive-xor") return std::make_unique<NaiveXor>(self, g, s.input_of(self), s.params);
    throw Error("unknown protocol: " + s.protocol);
}

// ---- direct transport --------------------------------------------------------

// Runs the protocol with messages as plain network pulses (payload only; the
// receiver learns src from the arrival edge). This is the reference execution:
// correct when the channel is clean, and the thing that visibly breaks when it
// is not.
class DirectAdapter : public Automaton {
   public:
    DirectAdapter(std::unique_ptr<Protocol> p, NodeId self, const Graph& g,
                  std::optional<std::int64_t>* reg)
        : proto_(std::move(p)), self_(self), graph_(g), reg_(reg) {}

    void on_init(Context& ctx) override {
        ProtoCtx c{.sends = {}, .new_output = {}, .self = self_};
        proto_->on_init(c);
        flush(ctx, c);
    }

    void on_pulse(Context& ctx, NodeId from, const Bits& delivered) override {
        ctx.annotate("recv", {{"src", from}, {"dst", self_}, {"payload", delivered}});
        ProtoCtx c{.sends = {}, .new_output = {}, .self = self_};
        proto_->on_message(c, from, delivered);
        flush(ctx, c);
    }

    const Protocol& protocol() const { return *proto_; }

   private:
    void flush(Context& ctx, ProtoCtx& c) {
        for (const Envelope& e : c.sends) {
            if (e.dst == kBroadcast) {
                // One unicast per neighbor, in ascending order so replicas of
                // this expansion are deterministic.
                for (NodeId v : graph_.neighbors(self_)) {
                    ctx.annotate("send", {{"src", self_}, {"dst", v}, {"payload", e.payload}});
                    ctx.send(v, e.payload);
                }
            } else {
                if (!graph_.has_edge(self_, e.dst))
                    throw Error("protocol sent to non-neighbor " + std::to_string(e.dst));
                ctx.annotate("send", {{"src", self_}, {"dst", e.dst}, {"payload", e.payload}});
                ctx.send(e.dst, e.payload);
            }
        }
        if (c.new_output) {
            if (reg_ && reg_->has_value()) throw Error("output register written twice");
            if (reg_) *reg_ = c.new_output;
            ctx.annotate("output", {{"value", *c.new_output}});
        }
    }

    std::unique_ptr<Protocol> proto_;
    NodeId self_;
    const Graph& graph_;
    std::optional<std::int64_t>* reg_;
};

struct RunResult {
    Transcript transcript;
    std::map<NodeId, std::optional<std::int64_t>> outputs;  // effective outputs
};

inline RunResult run_direct(const Graph& g, const ScenarioSpec& s, SchedulerCfg sched,
                            AdversaryCfg adv, std::uint64_t budget = 1'000'000) {
    Engine eng(g, sched, adv, budget);
    std::vector<std::optional<std::int64_t>> regs(std::size_t(g.n));
    std::vector<const DirectAdapter*> adapters(std::size_t(g.n));
    for (NodeId u = 0; u < g.n; ++u) {
        auto ad = std::make_unique<DirectAdapter>(make_protocol(s, u, g), u, g, &regs[std::size_t(u)]);
        adapters[std::size_t(u)] = ad.get();
        eng.attach(u, std::move(ad));
    }
    RunResult r;
    r.transcript = eng.run();
    for (NodeId u = 0; u < g.n; ++u) {
        r.outputs[u] = regs[std::size_t(u)] ? regs[std::size_t(u)]
                                            : adapters[std::size_t(u)]->protocol().snapshot();
    }
    return r;
}

}  // namespace fdnet
