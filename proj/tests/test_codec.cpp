#include <catch2/catch_amalgamated.hpp>

#include "fdnet/codec.hpp"

using namespace fdnet;

namespace {

// Oracle: number of positions where the substring 0^L starts.
int count_zero_runs(const Bits& s, int L) {
    int hits = 0;
    for (std::size_t i = 0; i + std::size_t(L) <= s.size(); ++i) {
        bool all = true;
        for (int k = 0; k < L; ++k)
            if (s[i + std::size_t(k)] != '0') all = false;
        if (all) ++hits;
    }
    return hits;
}

// Enumerate every bit string of a given length, in counting order.
template <typename F>
void for_each_bits(std::size_t len, F&& f) {
    Bits m(len, '0');
    while (true) {
        f(m);
        std::size_t i = len;
        while (i > 0 && m[i - 1] == '1') m[--i] = '0';
        if (i == 0) break;
        m[i - 1] = '1';
    }
}

}  // namespace

TEST_CASE("pad matches hand-computed values", "[codec]") {
    CHECK(pad("0000", 3) == "001001");
    CHECK(pad("00", 2) == "0101");
    CHECK(pad("", 2) == "");
    CHECK(pad("1111", 2) == "1111");
    CHECK(pad("001", 3) == "0011");
    CHECK(unpad("0011", 3) == "001");
    CHECK(frame("", 2) == "1100");
    CHECK(frame("01", 2) == "1011100");
    CHECK(frame_length("01", 2) == 7);
    CHECK_THROWS_AS(pad("0", 1), Error);
    CHECK_THROWS_AS(unpad("000", 3), Error);  // run of 3 zeros cannot come from pad
}

TEST_CASE("pad round-trips over exhaustive small messages", "[codec]") {
    for (int L : {2, 3, 4}) {
        for (std::size_t len = 0; len <= 10; ++len) {
            for_each_bits(len, [&](const Bits& m) {
                Bits p = pad(m, L);
                REQUIRE(unpad(p, L) == m);
                // No run of L zeros survives padding.
                REQUIRE(count_zero_runs(p, L) == 0);
            });
        }
    }
}

TEST_CASE("frame terminator is unique and terminal", "[codec]") {
    for (int L : {2, 3, 4}) {
        for (std::size_t len = 0; len <= 9; ++len) {
            for_each_bits(len, [&](const Bits& m) {
                Bits z = frame(m, L);
                // Exactly one occurrence of 0^L, and it is the suffix.
                REQUIRE(count_zero_runs(z, L) == 1);
                REQUIRE(z.substr(z.size() - std::size_t(L)) == Bits(std::size_t(L), '0'));
                auto back = deframe(z, L);
                REQUIRE(back.has_value());
                REQUIRE(*back == m);
            });
        }
    }
}

TEST_CASE("frame expansion bound holds exactly", "[codec]") {
    // |pad(M)| <= |M| + floor(|M| / (L-1)), hence <= (1 + 1/(L-1)) |M|.
    for (int L : {2, 3, 5}) {
        Rng rng(0x70adULL + std::uint64_t(L));
        for (int trial = 0; trial < 300; ++trial) {
            Bits m = rng.bit_string(rng.below(200));
            Bits p = pad(m, L);
            REQUIRE(p.size() <= m.size() + m.size() / std::size_t(L - 1));
        }
        // The bound is tight for all-zero messages.
        Bits zeros(std::size_t(6 * (L - 1)), '0');
        CHECK(pad(zeros, L).size() == zeros.size() + zeros.size() / std::size_t(L - 1));
    }
}

TEST_CASE("deframe rejects malformed frames", "[codec]") {
    CHECK_FALSE(deframe("0100", 2).has_value());   // no leading 1
    CHECK_FALSE(deframe("1101", 2).has_value());   // no zero-run suffix
    CHECK_FALSE(deframe("1000", 2).has_value());   // missing 1 before terminator
    CHECK_FALSE(deframe("110", 3).has_value());    // too short
    CHECK_FALSE(deframe("1001000", 3).has_value());// interior run of L zeros
}

TEST_CASE("unary transport value", "[codec]") {
    // Wire "01" ships as the value of binary 101 = 5.
    CHECK(unary_value("01") == 5);
    CHECK(unary_value("") == 1);
    CHECK(unary_wire(5) == "01");
    CHECK(unary_wire(1) == "");
    Rng rng(0x11a7ULL);
    for (int trial = 0; trial < 200; ++trial) {
        Bits w = rng.bit_string(rng.below(20));
        REQUIRE(unary_wire(unary_value(w)) == w);
    }
    // Each appended payload bit doubles the count (or doubles plus one).
    Bits w = "1";
    for (int i = 0; i < 10; ++i) {
        std::uint64_t d = unary_value(w);
        CHECK(unary_value(w + "0") == 2 * d);
        CHECK(unary_value(w + "1") == 2 * d + 1);
        w += rng.bit();
    }
    CHECK_THROWS_AS(unary_value(Bits(63, '1')), Error);
    CHECK_THROWS_AS(unary_wire(0), Error);
}

TEST_CASE("fixed-width envelope wire", "[codec]") {
    CHECK(id_width(2) == 1);
    CHECK(id_width(4) == 2);
    CHECK(id_width(5) == 3);

    Envelope e{2, 1, "11"};
    Bits w = wire_pack(e, 4);
    CHECK(w == "0100111");
    CHECK(wire_unpack(w, 4) == e);

    Envelope b{3, kBroadcast, "0"};
    Bits wb = wire_pack(b, 4);
    CHECK(wb == "1110");
    CHECK(wire_unpack(wb, 4) == b);

    Rng rng(0x99ULL);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + rng.below_int(30);
        Envelope r;
        r.src = rng.below_int(n);
        r.dst = rng.coin() ? kBroadcast : rng.below_int(n);
        r.payload = rng.bit_string(rng.below(16));
        REQUIRE(wire_unpack(wire_pack(r, n), n) == r);
    }
    CHECK_THROWS_AS(wire_pack(Envelope{5, 0, ""}, 4), Error);
    CHECK_THROWS_AS(wire_unpack("0", 4), Error);
}

TEST_CASE("self-delimiting envelope wire", "[codec]") {
    Envelope e{7, kBroadcast, "1010"};
    CHECK(wire_unpack_sd(wire_pack_sd(e)) == e);
    Envelope f{0, 12, ""};
    CHECK(wire_unpack_sd(wire_pack_sd(f)) == f);
    Rng rng(0x5dULL);
    for (int trial = 0; trial < 200; ++trial) {
        Envelope r;
        r.src = rng.below_int(1000);
        r.dst = rng.coin() ? kBroadcast : rng.below_int(1000);
        r.payload = rng.bit_string(rng.below(25));
        REQUIRE(wire_unpack_sd(wire_pack_sd(r)) == r);
    }
}
