#pragma once

// Message encodings.
//
// Three layers live here:
//   1. Envelope <-> wire bits. The wire image is what a protocol message looks
//      like as a flat bit string (addressing header + payload). Two variants:
//      fixed-width headers when every station knows the id universe, and
//      self-delimiting gamma-coded headers when it does not.
//   2. Unary transport value: a wire string w is shipped as the pulse count
//      d = value of the binary string 1·w (the leading 1 keeps leading zeros
//      of w intact).
//   3. Run-length-limited framing: pad(M) breaks every run of L-1 zeros with
//      a stuffed 1, so the frame 1·pad(M)·1·0^L contains the run 0^L exactly
//      once, as its terminator. That makes the end of a bit-serial
//      transmission recognizable without any length header.

#include <optional>

#include "fdnet/bits.hpp"

namespace fdnet {

struct Envelope {
    NodeId src = 0;
    NodeId dst = 0;  // kBroadcast means "all nodes"
    Bits payload;

    bool operator==(const Envelope&) const = default;
};

inline int id_width(int n) {
    int w = 1;
    while ((1 << w) < n) ++w;
    return w;
}

// Fixed-width wire: flag(1) src(w) [dst(w) unless broadcast] payload.
inline Bits wire_pack(const Envelope& e, int n) {
    if (e.src < 0 || e.src >= n) throw Error("wire_pack: src out of range");
    if (e.dst != kBroadcast && (e.dst < 0 || e.dst >= n)) throw Error("wire_pack: dst out of range");
    require_bits(e.payload, "wire_pack payload");
    int w = id_width(n);
    Bits out;
    out.push_back(e.dst == kBroadcast ? '1' : '0');
    out += bits_fixed(std::uint64_t(e.src), w);
    if (e.dst != kBroadcast) out += bits_fixed(std::uint64_t(e.dst), w);
    out += e.payload;
    return out;
}

inline Envelope wire_unpack(const Bits& wire, int n) {
    require_bits(wire, "wire_unpack");
    int w = id_width(n);
    std::size_t need = 1 + std::size_t(w);
    if (wire.size() < need) throw Error("wire_unpack: truncated header");
    bool bcast = wire[0] == '1';
    if (!bcast) need += std::size_t(w);
    if (wire.size() < need) throw Error("wire_unpack: truncated header");
    Envelope e;
    e.src = NodeId(uint_from_bits(wire.substr(1, std::size_t(w))));
    e.dst = bcast ? kBroadcast : NodeId(uint_from_bits(wire.substr(1 + std::size_t(w), std::size_t(w))));
    if (e.src >= n || (!bcast && e.dst >= n)) throw Error("wire_unpack: id out of range");
    e.payload = wire.substr(need);
    return e;
}

// Self-delimiting wire: gamma(src+1) gamma(dst+2) payload. dst is shifted by 2
// so that broadcast (-1) becomes the legal gamma value 1. Used by stations
// that run before the id universe is known.
inline Bits wire_pack_sd(const Envelope& e) {
    if (e.src < 0) throw Error("wire_pack_sd: bad src");
    if (e.dst < kBroadcast) throw Error("wire_pack_sd: bad dst");
    require_bits(e.payload, "wire_pack_sd payload");
    Bits out;
    gamma_append(out, std::uint64_t(e.src) + 1);
    gamma_append(out, std::uint64_t(e.dst + 2));
    out += e.payload;
    return out;
}

inline Envelope wire_unpack_sd(const Bits& wire) {
    require_bits(wire, "wire_unpack_sd");
    std::size_t pos = 0;
    Envelope e;
    e.src = NodeId(gamma_read(wire, pos) - 1);
    e.dst = NodeId(std::int64_t(gamma_read(wire, pos)) - 2);
    e.payload = wire.substr(pos);
    return e;
}

// ---- unary transport -------------------------------------------------------

// Pulse count that ships the wire string w: the value of 1·w in binary.
// Exponential in |w| by design; callers on this path keep messages short.
inline std::uint64_t unary_value(const Bits& wire) {
    require_bits(wire, "unary_value");
    if (wire.size() + 1 > 63) throw Error("unary_value: message too long for a 64-bit pulse count");
    return uint_from_bits("1" + wire);
}

inline Bits unary_wire(std::uint64_t d) {
    if (d == 0) throw Error("unary_wire: count must be positive");
    Bits b = bits_from_uint(d);
    return b.substr(1);  // drop the sentinel 1
}

// ---- run-length-limited framing ---------------------------------------------

// Insert a 1 after every L-1 consecutive zeros, so no run of L zeros survives.
inline Bits pad(const Bits& m, int L) {
    if (L < 2) throw Error("pad: L must be >= 2");
    require_bits(m, "pad");
    Bits out;
    out.reserve(m.size() + m.size() / std::size_t(L - 1) + 1);
    int zeros = 0;
    for (char c : m) {
        out.push_back(c);
        if (c == '0') {
            if (++zeros == L - 1) {
                out.push_back('1');
                zeros = 0;
            }
        } else {
            zeros = 0;
        }
    }
    return out;
}

// Exact inverse of pad: after L-1 consecutive zeros the next character is
// always a stuffed 1 and is dropped. Throws on strings pad cannot produce.
inline Bits unpad(const Bits& p, int L) {
    if (L < 2) throw Error("unpad: L must be >= 2");
    require_bits(p, "unpad");
    Bits out;
    int zeros = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (zeros == L - 1) {
            if (p[i] != '1') throw Error("unpad: run of zeros too long for padded input");
            zeros = 0;
            continue;  // stuffed bit, not part of the message
        }
        out.push_back(p[i]);
        zeros = p[i] == '0' ? zeros + 1 : 0;
    }
    // pad always stuffs immediately on the (L-1)th zero, so its output can
    // never end mid-run; such an ending means the input was truncated.
    if (zeros == L - 1) throw Error("unpad: input ends where a stuffed bit is due");
    return out;
}

inline Bits frame(const Bits& m, int L) {
    Bits z = "1" + pad(m, L);
    z.push_back('1');
    z.append(std::size_t(L), '0');
    return z;
}

inline std::size_t frame_length(const Bits& m, int L) { return pad(m, L).size() + 2 + std::size_t(L); }

// Parse 1·P·1·0^L back into M. Returns nullopt on any structural violation.
inline std::optional<Bits> deframe(const Bits& z, int L) {
    if (L < 2 || !is_bits(z)) return std::nullopt;
    if (z.size() < 2 + std::size_t(L)) return std::nullopt;
    if (z.front() != '1') return std::nullopt;
    for (std::size_t i = z.size() - std::size_t(L); i < z.size(); ++i)
        if (z[i] != '0') return std::nullopt;
    if (z[z.size() - std::size_t(L) - 1] != '1') return std::nullopt;
    Bits padded = z.substr(1, z.size() - std::size_t(L) - 2);
    try {
        return unpad(padded, L);
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace fdnet
