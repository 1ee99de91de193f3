#pragma once

// Bit-string utilities shared across the library.
//
// Payloads, wire images and pulse-count arguments all travel as strings of
// '0'/'1' characters. That is deliberately simple: message lengths in this
// code base are tiny (ids, small integers), and keeping them as text makes
// transcripts and JSON reports directly readable.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace fdnet {

using NodeId = int;

// Destination value meaning "all nodes" in an envelope.
inline constexpr NodeId kBroadcast = -1;

using Bits = std::string;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool is_bits(const Bits& s) {
    for (char c : s)
        if (c != '0' && c != '1') return false;
    return true;
}

inline void require_bits(const Bits& s, const char* what) {
    if (!is_bits(s)) throw Error(std::string(what) + ": not a 0/1 string: \"" + s + "\"");
}

// Minimal-width big-endian binary; 0 encodes as "0".
inline Bits bits_from_uint(std::uint64_t v) {
    if (v == 0) return "0";
    Bits out;
    while (v) {
        out.push_back(char('0' + (v & 1)));
        v >>= 1;
    }
    return Bits(out.rbegin(), out.rend());
}

inline std::uint64_t uint_from_bits(const Bits& s) {
    require_bits(s, "uint_from_bits");
    if (s.empty()) throw Error("uint_from_bits: empty string");
    if (s.size() > 64) throw Error("uint_from_bits: more than 64 bits");
    std::uint64_t v = 0;
    for (char c : s) v = (v << 1) | std::uint64_t(c - '0');
    return v;
}

// Fixed-width big-endian binary, for wire fields whose width both ends know.
inline Bits bits_fixed(std::uint64_t v, int width) {
    if (width <= 0 || width > 64) throw Error("bits_fixed: bad width");
    if (width < 64 && (v >> width) != 0) throw Error("bits_fixed: value does not fit width");
    Bits out(std::size_t(width), '0');
    for (int i = width - 1; i >= 0; --i) {
        out[std::size_t(i)] = char('0' + (v & 1));
        v >>= 1;
    }
    return out;
}

// Elias gamma code for v >= 1: (floor(log2 v)) zeros, then v in binary.
// Self-delimiting, so a reader needs no out-of-band width. Used where the
// universe size is not known to the participants.
inline void gamma_append(Bits& out, std::uint64_t v) {
    if (v == 0) throw Error("gamma_append: value must be >= 1");
    Bits bin = bits_from_uint(v);
    out.append(bin.size() - 1, '0');
    out.append(bin);
}

inline std::uint64_t gamma_read(const Bits& s, std::size_t& pos) {
    std::size_t zeros = 0;
    while (pos + zeros < s.size() && s[pos + zeros] == '0') ++zeros;
    std::size_t need = zeros + (zeros + 1);
    if (pos + need > s.size()) throw Error("gamma_read: truncated code");
    pos += zeros;
    std::uint64_t v = 0;
    for (std::size_t i = 0; i <= zeros; ++i) v = (v << 1) | std::uint64_t(s[pos + i] - '0');
    pos += zeros + 1;
    if (v == 0) throw Error("gamma_read: malformed code");
    return v;
}

// splitmix64. Chosen over <random> engines because its output sequence is
// fixed by the algorithm alone, so seeds reproduce bit-identically on any
// platform and reports can be compared byte-for-byte.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Rejection sampling keeps it exactly uniform.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw Error("Rng::below: n must be positive");
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }

    int below_int(int n) { return int(below(std::uint64_t(n))); }

    bool coin() { return (next() & 1) != 0; }

    char bit() { return coin() ? '1' : '0'; }

    Bits bit_string(std::size_t len) {
        Bits out;
        out.reserve(len);
        for (std::size_t i = 0; i < len; ++i) out.push_back(bit());
        return out;
    }
};

}  // namespace fdnet
