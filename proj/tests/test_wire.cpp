#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "popos/wire.hpp"

using namespace popos;
using namespace popos::wire;

namespace {

struct Gen {
    std::mt19937_64 rng;

    uint64_t u64() { return rng(); }
    uint32_t u32() { return static_cast<uint32_t>(rng()); }

    crypto::Digest digest() {
        crypto::Digest d;
        for (auto& b : d.bytes) b = static_cast<uint8_t>(rng());
        return d;
    }
    crypto::PublicKey key() {
        crypto::PublicKey k;
        for (auto& b : k.bytes) b = static_cast<uint8_t>(rng());
        return k;
    }
    chainsim::SignatureEntry sig_entry() {
        chainsim::SignatureEntry e;
        e.member = u32() % 64;
        for (auto& b : e.sig.bytes) b = static_cast<uint8_t>(rng());
        return e;
    }
    chainsim::SyncCommittee committee(uint32_t m = 4) {
        chainsim::SyncCommittee c;
        c.epoch = u64() % 1024;
        for (uint32_t i = 0; i < m; ++i) c.members.push_back(key());
        return c;
    }
    chainsim::HandoverProof handover() {
        chainsim::HandoverProof h;
        h.epoch = u64() % 1024;
        for (int i = 0; i < 3; ++i) h.signatures.push_back(sig_entry());
        return h;
    }
    merkle::MerkleProof proof(uint32_t degree = 2, uint32_t levels = 3) {
        merkle::MerkleProof p;
        p.degree = degree;
        p.size = 1 + u64() % 64;
        p.index = u64() % p.size;
        for (uint32_t l = 0; l < levels; ++l) {
            std::vector<crypto::Digest> level;
            for (uint32_t s = 0; s + 1 < degree; ++s) level.push_back(digest());
            p.levels.push_back(level);
        }
        return p;
    }
    Claim claim() {
        Claim c;
        c.state_commitment = digest();
        for (int i = 0; i < 3; ++i) c.peaks.push_back(digest());
        c.latest_committee = committee();
        c.latest_proof = proof();
        for (int i = 0; i < 3; ++i) c.commitment_signatures.push_back(sig_entry());
        return c;
    }

    Message message(size_t kind) {
        switch (kind) {
            case 0: return ClaimRequest{2 + u32() % 64};
            case 1: return ClaimResponse{claim()};
            case 2: return Open{2, u32() % 4, {u32() % 2, u32() % 2}};
            case 3: return Children{{digest(), digest()}};
            case 4:
                return LeafRequest{static_cast<LeafQuery>(u32() % 3), 2, u32() % 4,
                                   {u32() % 2, u32() % 2, u32() % 2}};
            case 5: return LeafReveal{committee()};
            case 6: return PrevLeafReveal{committee(), proof()};
            case 7: return HandoverReveal{handover()};
            case 8: return Verdict{static_cast<VerdictKind>(u32() % 3), u64()};
            case 9: return CommitteeBatchRequest{u64() % 100, 1 + u32() % 10};
            case 10: {
                CommitteeBatchResponse r;
                r.entries.push_back({committee(), handover()});
                r.entries.push_back({committee(), handover()});
                return r;
            }
            case 11: return HashBatchRequest{u64() % 100, 1 + u32() % 10};
            case 12: return HashBatchResponse{{digest(), digest(), digest()}};
            case 13: return BalanceRequest{u64()};
            default: {
                BalanceResponse r;
                r.status = static_cast<BalanceStatus>(u32() % 3);
                r.state_size = u64() % 1000;
                r.entries.push_back({u64(), u64() % 1000, proof()});
                if (u32() % 2) r.sentinel_proof = proof(3, 2);
                return r;
            }
        }
    }
};

}  // namespace

TEST_CASE("every message kind round-trips through its frame") {
    Gen gen{std::mt19937_64(17)};
    for (int round = 0; round < 200; ++round) {
        for (size_t kind = 0; kind < 15; ++kind) {
            const Message msg = gen.message(kind);
            const Bytes f = frame(msg);
            const auto back = decode_frame(f);
            REQUIRE(back.has_value());
            CHECK(tag_of(*back) == tag_of(msg));
            CHECK(frame(*back) == f);  // canonical encoding is stable
        }
    }
}

TEST_CASE("frame layout is length, tag, payload") {
    const Message msg = BalanceRequest{0x1122334455667788ull};
    const Bytes f = frame(msg);
    REQUIRE(f.size() == kFrameHeaderSize + 8);
    // 4-byte big-endian payload length
    CHECK(f[0] == 0);
    CHECK(f[1] == 0);
    CHECK(f[2] == 0);
    CHECK(f[3] == 8);
    CHECK(f[4] == static_cast<uint8_t>(Tag::BalanceRequest));
    CHECK(f[5] == 0x11);
    CHECK(f[12] == 0x88);
}

TEST_CASE("malformed frames are rejected") {
    Gen gen{std::mt19937_64(18)};
    const Bytes f = frame(gen.message(1));

    SUBCASE("truncation at every boundary") {
        for (size_t cut = 0; cut < f.size(); cut += 7) {
            Bytes partial(f.begin(), f.begin() + cut);
            CHECK_FALSE(decode_frame(partial).has_value());
        }
    }
    SUBCASE("trailing garbage") {
        Bytes extended = f;
        extended.push_back(0);
        CHECK_FALSE(decode_frame(extended).has_value());
    }
    SUBCASE("unknown tag") {
        Bytes bad = f;
        bad[4] = 0x77;
        CHECK_FALSE(decode_frame(bad).has_value());
    }
    SUBCASE("length field lies") {
        Bytes bad = f;
        bad[3] = static_cast<uint8_t>(bad[3] + 1);
        CHECK_FALSE(decode_frame(bad).has_value());
    }
}

TEST_CASE("decoder rejects out-of-range enums and degrees") {
    // LeafRequest with kind byte 3
    Bytes payload;
    put_u8(payload, 3);
    put_u32be(payload, 2);
    put_u32be(payload, 0);
    put_u16be(payload, 0);
    CHECK_FALSE(decode_payload(Tag::LeafRequest, payload).has_value());

    Bytes claim_req;
    put_u32be(claim_req, 1);  // degree below 2
    CHECK_FALSE(decode_payload(Tag::ClaimRequest, claim_req).has_value());
}
