#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "popos/crypto.hpp"

using namespace popos;
using namespace popos::crypto;

namespace {

Seed seed_from(uint64_t v) {
    Seed s{};
    for (int i = 0; i < 8; ++i) s[i] = static_cast<uint8_t>(v >> (8 * i));
    return s;
}

Bytes random_bytes(std::mt19937_64& rng, size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<uint8_t>(rng());
    return b;
}

}  // namespace

TEST_CASE("hash is deterministic and 32 bytes") {
    const Bytes msg{1, 2, 3};
    CHECK(hash(msg) == hash(msg));
    CHECK(hash(msg).bytes.size() == 32);
}

TEST_CASE("hash known answers pin the function choice") {
    // SHA-256 of the empty string and of "abc".
    CHECK(hash(Bytes{}).hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const Bytes abc{'a', 'b', 'c'};
    CHECK(hash(abc).hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hash(Bytes{}) != hash(Bytes{0x00}));
}

TEST_CASE("no digest collision over 1e5 random inputs") {
    std::mt19937_64 rng(7);
    std::set<std::array<uint8_t, 32>> seen;
    for (int i = 0; i < 100'000; ++i) {
        const auto d = hash(random_bytes(rng, 64));
        CHECK(seen.insert(d.bytes).second);
    }
}

TEST_CASE("keygen is deterministic per seed, distinct across seeds") {
    CHECK(keygen(seed_from(42)).pk == keygen(seed_from(42)).pk);

    std::mt19937_64 rng(11);
    std::set<std::array<uint8_t, 32>> pks;
    for (int i = 0; i < 10'000; ++i) {
        const auto kp = keygen(seed_from(rng()));
        pks.insert(kp.pk.bytes);
    }
    CHECK(pks.size() == 10'000);
}

TEST_CASE("sign/verify roundtrip") {
    const auto kp = keygen(seed_from(1));
    const Bytes msg{'h', 'i'};
    CHECK(verify(kp.pk, msg, sign(kp.sk, msg)));
}

TEST_CASE("ed25519 RFC 8032 test vector 1") {
    Seed seed{};
    const char* hex = "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60";
    for (int i = 0; i < 32; ++i) {
        auto nib = [&](char c) { return c <= '9' ? c - '0' : c - 'a' + 10; };
        seed[i] = static_cast<uint8_t>(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
    }
    const auto kp = keygen(seed);
    CHECK(to_hex(kp.pk.bytes.data(), 32) ==
          "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
    const auto sig = sign(kp.sk, Bytes{});
    CHECK(to_hex(sig.bytes.data(), 64) ==
          "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155"
          "5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b");
}

TEST_CASE("single-bit message flips all reject") {
    const auto kp = keygen(seed_from(3));
    Bytes msg(16, 0xa5);
    const auto sig = sign(kp.sk, msg);
    for (int bit = 0; bit < 64; ++bit) {
        Bytes flipped = msg;
        flipped[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
        CHECK_FALSE(verify(kp.pk, flipped, sig));
    }
}

TEST_CASE("signature under one key rejects under another") {
    const auto kp1 = keygen(seed_from(4));
    const auto kp2 = keygen(seed_from(5));
    const Bytes msg{9, 9, 9};
    CHECK_FALSE(verify(kp2.pk, msg, sign(kp1.sk, msg)));
}

TEST_CASE("malformed signature bytes reject without throwing") {
    const auto kp = keygen(seed_from(6));
    SignatureValue junk;
    junk.bytes.fill(0xff);
    const Bytes msg{1};
    CHECK_FALSE(verify(kp.pk, msg, junk));
    SignatureValue zero;
    CHECK_FALSE(verify(kp.pk, msg, zero));
}

TEST_CASE("forgery surrogate: replaying observed signatures never verifies fresh messages") {
    const auto kp = keygen(seed_from(8));
    std::vector<std::pair<Bytes, SignatureValue>> observed;
    std::mt19937_64 rng(13);
    for (int i = 0; i < 32; ++i) {
        const Bytes m = random_bytes(rng, 24);
        observed.emplace_back(m, sign(kp.sk, m));
    }
    // The adversary holds pk plus all (message, signature) pairs and tries
    // every observed signature against fresh messages.
    for (int i = 0; i < 32; ++i) {
        const Bytes fresh = random_bytes(rng, 24);
        for (const auto& [m, sig] : observed) {
            if (m == fresh) continue;
            CHECK_FALSE(verify(kp.pk, fresh, sig));
        }
    }
}

TEST_CASE("registry destroys keys strictly below the advanced epoch") {
    EpochKeyRegistry reg;
    for (uint64_t e = 0; e < 6; ++e) reg.store(e, 0, keygen(seed_from(e)).sk);
    reg.advance(5);
    CHECK_FALSE(reg.fetch(3, 0).has_value());
    CHECK(reg.fetch(5, 0).has_value());
    CHECK_THROWS_AS(reg.advance(2), std::invalid_argument);
}

TEST_CASE("registry availability shrinks monotonically") {
    EpochKeyRegistry reg;
    std::mt19937_64 rng(21);
    for (uint64_t e = 0; e < 32; ++e)
        for (uint32_t i = 0; i < 3; ++i) reg.store(e, i, keygen(seed_from(rng())).sk);

    size_t last = reg.key_count();
    uint64_t epoch = 0;
    for (int step = 0; step < 10; ++step) {
        epoch += rng() % 5;
        reg.advance(epoch);
        const size_t now = reg.key_count();
        CHECK(now <= last);
        last = now;
        for (uint64_t e = 0; e < epoch && e < 32; ++e)
            for (uint32_t i = 0; i < 3; ++i) CHECK_FALSE(reg.fetch(e, i).has_value());
    }
}

TEST_CASE("storing into a destroyed epoch is rejected") {
    EpochKeyRegistry reg;
    reg.advance(4);
    CHECK_THROWS_AS(reg.store(2, 0, keygen(seed_from(1)).sk), std::invalid_argument);
}
