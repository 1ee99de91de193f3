#pragma once

// Asynchronous message-passing engine.
//
// The network model: every channel always delivers exactly one pulse per
// pulse sent (nothing is lost, nothing is injected), but the *content* of a
// pulse is rewritten arbitrarily in transit. The engine therefore tracks, for
// every in-flight pulse, both the content that was sent and the content that
// will be delivered; an adversary policy decides the latter. A scheduler
// policy decides delivery order, with no fairness or timing guarantees beyond
// "everything sent is eventually delivered".
//
// A single logical clock stamps sends and deliveries. Transcripts carry every
// pulse plus free-form annotations that higher layers (protocol adapters,
// cycle stations, verifiers) attach; the verifier reconstructs semantic event
// orders from those stamps.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdnet/graph.hpp"

namespace fdnet {

enum class SchedKind { Fifo, Lifo, Random, Replay };

struct SchedulerCfg {
    SchedKind kind = SchedKind::Random;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> script;  // Replay: in-flight index chosen per step
};

inline SchedKind sched_kind_from_string(const std::string& s) {
    if (s == "fifo") return SchedKind::Fifo;
    if (s == "lifo") return SchedKind::Lifo;
    if (s == "random") return SchedKind::Random;
    if (s == "replay") return SchedKind::Replay;
    throw Error("unknown scheduler kind: " + s);
}

enum class AdvKind { Identity, Randomize, Constant, FlipAll };

struct AdversaryCfg {
    AdvKind kind = AdvKind::Randomize;
    std::uint64_t seed = 0;
    char bit = '1';  // Constant: every delivered bit becomes this
};

inline AdvKind adv_kind_from_string(const std::string& s) {
    if (s == "identity") return AdvKind::Identity;
    if (s == "randomize") return AdvKind::Randomize;
    if (s == "constant") return AdvKind::Constant;
    if (s == "flip-all") return AdvKind::FlipAll;
    throw Error("unknown adversary kind: " + s);
}

struct PulseEvent {
    std::uint64_t send_seq = 0;     // clock when sent
    std::uint64_t deliver_seq = 0;  // clock when delivered
    NodeId from = 0;
    NodeId to = 0;
    Bits sent;
    Bits delivered;
};

struct Annotation {
    std::uint64_t at = 0;  // clock when recorded
    NodeId node = 0;
    std::string kind;
    nlohmann::json data;
};

enum class HaltReason { Quiescence, Budget, Fault };

inline const char* halt_reason_name(HaltReason h) {
    switch (h) {
        case HaltReason::Quiescence: return "quiescence";
        case HaltReason::Budget: return "budget";
        case HaltReason::Fault: return "fault";
    }
    return "?";
}

struct Transcript {
    std::vector<PulseEvent> pulses;
    std::vector<Annotation> notes;
    HaltReason halt = HaltReason::Quiescence;
    std::string fault;  // detail when halt == Fault
    std::uint64_t deliveries = 0;
};

class Engine;

// Handler-scope interface an automaton uses to act on the network.
class Context {
   public:
    Context(Engine& eng, NodeId self) : eng_(eng), self_(self) {}

    NodeId self() const { return self_; }
    std::uint64_t now() const;
    void send(NodeId to, const Bits& content);
    void annotate(const std::string& kind, nlohmann::json data);
    void fault(const std::string& why);

   private:
    Engine& eng_;
    NodeId self_;
};

struct Automaton {
    virtual ~Automaton() = default;
    virtual void on_init(Context&) {}
    virtual void on_pulse(Context&, NodeId from, const Bits& delivered) = 0;
};

class Engine {
   public:
    Engine(const Graph& g, SchedulerCfg sched, AdversaryCfg adv, std::uint64_t budget)
        : graph_(g),
          sched_(sched),
          adv_(adv),
          budget_(budget),
          sched_rng_(sched.seed),
          adv_rng_(adv.seed) {
        stations_.resize(std::size_t(g.n));
    }

    void attach(NodeId u, std::unique_ptr<Automaton> a) {
        if (u < 0 || u >= graph_.n) throw Error("attach: node out of range");
        stations_[std::size_t(u)] = std::move(a);
    }

    // Long runs can skip storing per-pulse events (counters and annotations
    // are kept either way) to bound transcript memory.
    void set_record_pulses(bool on) { record_pulses_ = on; }

    const Graph& graph() const { return graph_; }

    Transcript run() {
        for (NodeId u = 0; u < graph_.n; ++u) {
            if (!stations_[std::size_t(u)]) throw Error("run: node without automaton");
            Context ctx(*this, u);
            guarded(u, [&] { stations_[std::size_t(u)]->on_init(ctx); });
            if (faulted_) break;
        }
        while (!faulted_ && !inflight_.empty()) {
            if (out_.deliveries >= budget_) {
                out_.halt = HaltReason::Budget;
                return finish();
            }
            std::size_t idx = pick();
            Pending p = inflight_[idx];
            inflight_.erase(inflight_.begin() + std::ptrdiff_t(idx));

            PulseEvent ev;
            ev.send_seq = p.send_seq;
            ev.from = p.from;
            ev.to = p.to;
            ev.sent = p.content;
            ev.delivered = corrupt(p.content);
            ev.deliver_seq = clock_++;
            if (record_pulses_) out_.pulses.push_back(ev);
            ++out_.deliveries;

            Context ctx(*this, p.to);
            guarded(p.to, [&] { stations_[std::size_t(p.to)]->on_pulse(ctx, p.from, ev.delivered); });
        }
        out_.halt = faulted_ ? HaltReason::Fault : HaltReason::Quiescence;
        return finish();
    }

   private:
    friend class Context;

    struct Pending {
        std::uint64_t send_seq;
        NodeId from, to;
        Bits content;
    };

    template <typename F>
    void guarded(NodeId u, F&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            record_fault("node " + std::to_string(u) + ": " + e.what());
        }
    }

    void record_fault(const std::string& why) {
        if (!faulted_) {
            faulted_ = true;
            out_.fault = why;
        }
    }

    std::size_t pick() {
        switch (sched_.kind) {
            case SchedKind::Fifo: return 0;
            case SchedKind::Lifo: return inflight_.size() - 1;
            case SchedKind::Random: return std::size_t(sched_rng_.below(inflight_.size()));
            case SchedKind::Replay: {
                std::uint32_t want =
                    script_pos_ < sched_.script.size() ? sched_.script[script_pos_++] : 0;
                return std::size_t(want) % inflight_.size();
            }
        }
        return 0;
    }

    Bits corrupt(const Bits& sent) {
        switch (adv_.kind) {
            case AdvKind::Identity: return sent;
            case AdvKind::Randomize: {
                std::size_t len = adv_rng_.below(2 * sent.size() + 3);
                return adv_rng_.bit_string(len);
            }
            case AdvKind::Constant: return Bits(sent.size(), adv_.bit);
            case AdvKind::FlipAll: {
                Bits out = sent;
                for (char& c : out) c = c == '0' ? '1' : '0';
                return out;
            }
        }
        return sent;
    }

    Transcript finish() { return std::move(out_); }

    Graph graph_;
    SchedulerCfg sched_;
    AdversaryCfg adv_;
    std::uint64_t budget_;
    Rng sched_rng_;
    Rng adv_rng_;
    std::size_t script_pos_ = 0;
    std::vector<std::unique_ptr<Automaton>> stations_;
    std::vector<Pending> inflight_;
    std::uint64_t clock_ = 0;
    bool faulted_ = false;
    bool record_pulses_ = true;
    Transcript out_;
};

inline std::uint64_t Context::now() const { return eng_.clock_; }

inline void Context::send(NodeId to, const Bits& content) {
    if (!eng_.graph_.has_edge(self_, to))
        throw Error("send: no edge " + std::to_string(self_) + " -> " + std::to_string(to));
    eng_.inflight_.push_back({eng_.clock_++, self_, to, content});
}

inline void Context::annotate(const std::string& kind, nlohmann::json data) {
    eng_.out_.notes.push_back({eng_.clock_, self_, kind, std::move(data)});
}

inline void Context::fault(const std::string& why) { eng_.record_fault(why); }

}  // namespace fdnet
