#include "popos/wire.hpp"

namespace popos::wire {

namespace {

// Decode-side sanity caps; anything larger is treated as malformed.
constexpr uint32_t kMaxCommitteeSize = 1u << 20;
constexpr uint32_t kMaxListCount = 1u << 22;
constexpr uint32_t kMaxPathLength = 1u << 12;
constexpr uint32_t kMaxProofLevels = 64;
constexpr uint32_t kMaxPeaks = 64;
constexpr uint32_t kMaxDegree = 1u << 16;

void put_digest(Bytes& out, const Digest& d) { put_bytes(out, d.bytes.data(), d.bytes.size()); }

void put_committee(Bytes& out, const chainsim::SyncCommittee& c) {
    put_u64be(out, c.epoch);
    put_u32be(out, static_cast<uint32_t>(c.members.size()));
    for (const auto& pk : c.members) put_bytes(out, pk.bytes.data(), pk.bytes.size());
}

void put_signature_entries(Bytes& out, const std::vector<chainsim::SignatureEntry>& entries) {
    put_u32be(out, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_u32be(out, e.member);
        put_bytes(out, e.sig.bytes.data(), e.sig.bytes.size());
    }
}

void put_handover(Bytes& out, const chainsim::HandoverProof& h) {
    put_u64be(out, h.epoch);
    put_signature_entries(out, h.signatures);
}

void put_proof(Bytes& out, const merkle::MerkleProof& p) {
    put_u64be(out, p.index);
    put_u64be(out, p.size);
    put_u16be(out, static_cast<uint16_t>(p.degree));
    put_u16be(out, static_cast<uint16_t>(p.levels.size()));
    for (const auto& level : p.levels)
        for (const auto& d : level) put_digest(out, d);
}

void put_path(Bytes& out, const std::vector<uint32_t>& path) {
    put_u16be(out, static_cast<uint16_t>(path.size()));
    for (uint32_t c : path) put_u16be(out, static_cast<uint16_t>(c));
}

void put_claim(Bytes& out, const Claim& claim) {
    put_digest(out, claim.state_commitment);
    put_u16be(out, static_cast<uint16_t>(claim.peaks.size()));
    for (const auto& p : claim.peaks) put_digest(out, p);
    put_committee(out, claim.latest_committee);
    put_proof(out, claim.latest_proof);
    put_signature_entries(out, claim.commitment_signatures);
}

bool get_digest(ByteReader& r, Digest& d) { return r.read_into(d.bytes.data(), d.bytes.size()); }

bool get_committee(ByteReader& r, chainsim::SyncCommittee& c) {
    c.epoch = r.u64be();
    const uint32_t m = r.u32be();
    if (!r.ok() || m > kMaxCommitteeSize) return false;
    c.members.resize(m);
    for (auto& pk : c.members)
        if (!r.read_into(pk.bytes.data(), pk.bytes.size())) return false;
    return true;
}

bool get_signature_entries(ByteReader& r, std::vector<chainsim::SignatureEntry>& entries) {
    const uint32_t n = r.u32be();
    if (!r.ok() || n > kMaxListCount) return false;
    entries.resize(n);
    for (auto& e : entries) {
        e.member = r.u32be();
        if (!r.read_into(e.sig.bytes.data(), e.sig.bytes.size())) return false;
    }
    return true;
}

bool get_handover(ByteReader& r, chainsim::HandoverProof& h) {
    h.epoch = r.u64be();
    return r.ok() && get_signature_entries(r, h.signatures);
}

bool get_proof(ByteReader& r, merkle::MerkleProof& p) {
    p.index = r.u64be();
    p.size = r.u64be();
    p.degree = r.u16be();
    const uint16_t levels = r.u16be();
    if (!r.ok() || p.degree < 2 || p.degree > kMaxDegree || levels > kMaxProofLevels) return false;
    p.levels.assign(levels, {});
    for (auto& level : p.levels) {
        level.resize(p.degree - 1);
        for (auto& d : level)
            if (!get_digest(r, d)) return false;
    }
    return true;
}

bool get_path(ByteReader& r, std::vector<uint32_t>& path) {
    const uint16_t n = r.u16be();
    if (!r.ok() || n > kMaxPathLength) return false;
    path.resize(n);
    for (auto& c : path) c = r.u16be();
    return r.ok();
}

bool get_claim(ByteReader& r, Claim& claim) {
    if (!get_digest(r, claim.state_commitment)) return false;
    const uint16_t peaks = r.u16be();
    if (!r.ok() || peaks > kMaxPeaks) return false;
    claim.peaks.resize(peaks);
    for (auto& p : claim.peaks)
        if (!get_digest(r, p)) return false;
    if (!get_committee(r, claim.latest_committee)) return false;
    if (!get_proof(r, claim.latest_proof)) return false;
    return get_signature_entries(r, claim.commitment_signatures);
}

}  // namespace

Tag tag_of(const Message& msg) {
    struct Visitor {
        Tag operator()(const ClaimRequest&) { return Tag::ClaimRequest; }
        Tag operator()(const ClaimResponse&) { return Tag::ClaimResponse; }
        Tag operator()(const Open&) { return Tag::Open; }
        Tag operator()(const Children&) { return Tag::Children; }
        Tag operator()(const LeafRequest&) { return Tag::LeafRequest; }
        Tag operator()(const LeafReveal&) { return Tag::LeafReveal; }
        Tag operator()(const PrevLeafReveal&) { return Tag::PrevLeafReveal; }
        Tag operator()(const HandoverReveal&) { return Tag::HandoverReveal; }
        Tag operator()(const Verdict&) { return Tag::Verdict; }
        Tag operator()(const CommitteeBatchRequest&) { return Tag::CommitteeBatchRequest; }
        Tag operator()(const CommitteeBatchResponse&) { return Tag::CommitteeBatchResponse; }
        Tag operator()(const HashBatchRequest&) { return Tag::HashBatchRequest; }
        Tag operator()(const HashBatchResponse&) { return Tag::HashBatchResponse; }
        Tag operator()(const BalanceRequest&) { return Tag::BalanceRequest; }
        Tag operator()(const BalanceResponse&) { return Tag::BalanceResponse; }
    };
    return std::visit(Visitor{}, msg);
}

Bytes encode_payload(const Message& msg) {
    Bytes out;
    struct Visitor {
        Bytes& out;
        void operator()(const ClaimRequest& m) { put_u32be(out, m.degree); }
        void operator()(const ClaimResponse& m) { put_claim(out, m.claim); }
        void operator()(const Open& m) {
            put_u32be(out, m.degree);
            put_u32be(out, m.tree_index);
            put_path(out, m.path);
        }
        void operator()(const Children& m) {
            put_u16be(out, static_cast<uint16_t>(m.digests.size()));
            for (const auto& d : m.digests) put_digest(out, d);
        }
        void operator()(const LeafRequest& m) {
            put_u8(out, static_cast<uint8_t>(m.kind));
            put_u32be(out, m.degree);
            put_u32be(out, m.tree_index);
            put_path(out, m.path);
        }
        void operator()(const LeafReveal& m) { put_committee(out, m.committee); }
        void operator()(const PrevLeafReveal& m) {
            put_committee(out, m.committee);
            put_proof(out, m.proof);
        }
        void operator()(const HandoverReveal& m) { put_handover(out, m.handover); }
        void operator()(const Verdict& m) {
            put_u8(out, static_cast<uint8_t>(m.kind));
            put_u64be(out, m.leaf_index);
        }
        void operator()(const CommitteeBatchRequest& m) {
            put_u64be(out, m.from);
            put_u32be(out, m.count);
        }
        void operator()(const CommitteeBatchResponse& m) {
            put_u32be(out, static_cast<uint32_t>(m.entries.size()));
            for (const auto& e : m.entries) {
                put_committee(out, e.committee);
                put_handover(out, e.handover);
            }
        }
        void operator()(const HashBatchRequest& m) {
            put_u64be(out, m.from);
            put_u32be(out, m.count);
        }
        void operator()(const HashBatchResponse& m) {
            put_u32be(out, static_cast<uint32_t>(m.digests.size()));
            for (const auto& d : m.digests) put_digest(out, d);
        }
        void operator()(const BalanceRequest& m) { put_u64be(out, m.account); }
        void operator()(const BalanceResponse& m) {
            put_u8(out, static_cast<uint8_t>(m.status));
            put_u64be(out, m.state_size);
            put_u8(out, static_cast<uint8_t>(m.entries.size()));
            for (const auto& e : m.entries) {
                put_u64be(out, e.account);
                put_u64be(out, e.balance);
                put_proof(out, e.proof);
            }
            put_u8(out, m.sentinel_proof ? 1 : 0);
            if (m.sentinel_proof) put_proof(out, *m.sentinel_proof);
        }
    };
    std::visit(Visitor{out}, msg);
    return out;
}

Bytes frame(const Message& msg) {
    const Bytes payload = encode_payload(msg);
    Bytes out;
    out.reserve(kFrameHeaderSize + payload.size());
    put_u32be(out, static_cast<uint32_t>(payload.size()));
    put_u8(out, static_cast<uint8_t>(tag_of(msg)));
    put_bytes(out, payload);
    return out;
}

std::optional<Message> decode_payload(Tag tag, const Bytes& payload) {
    ByteReader r(payload);
    Message msg;
    bool ok = true;
    switch (tag) {
        case Tag::ClaimRequest: {
            ClaimRequest m;
            m.degree = r.u32be();
            ok = r.ok() && m.degree >= 2 && m.degree <= kMaxDegree;
            msg = m;
            break;
        }
        case Tag::ClaimResponse: {
            ClaimResponse m;
            ok = get_claim(r, m.claim);
            msg = std::move(m);
            break;
        }
        case Tag::Open: {
            Open m;
            m.degree = r.u32be();
            m.tree_index = r.u32be();
            ok = r.ok() && m.degree >= 2 && get_path(r, m.path);
            msg = std::move(m);
            break;
        }
        case Tag::Children: {
            Children m;
            const uint16_t n = r.u16be();
            ok = r.ok() && n <= kMaxDegree;
            if (ok) {
                m.digests.resize(n);
                for (auto& d : m.digests) ok = ok && get_digest(r, d);
            }
            msg = std::move(m);
            break;
        }
        case Tag::LeafRequest: {
            LeafRequest m;
            const uint8_t kind = r.u8();
            m.degree = r.u32be();
            m.tree_index = r.u32be();
            ok = r.ok() && kind <= 2 && m.degree >= 2 && get_path(r, m.path);
            m.kind = static_cast<LeafQuery>(kind);
            msg = std::move(m);
            break;
        }
        case Tag::LeafReveal: {
            LeafReveal m;
            ok = get_committee(r, m.committee);
            msg = std::move(m);
            break;
        }
        case Tag::PrevLeafReveal: {
            PrevLeafReveal m;
            ok = get_committee(r, m.committee) && get_proof(r, m.proof);
            msg = std::move(m);
            break;
        }
        case Tag::HandoverReveal: {
            HandoverReveal m;
            ok = get_handover(r, m.handover);
            msg = std::move(m);
            break;
        }
        case Tag::Verdict: {
            Verdict m;
            const uint8_t kind = r.u8();
            m.leaf_index = r.u64be();
            ok = r.ok() && kind <= 2;
            m.kind = static_cast<VerdictKind>(kind);
            msg = m;
            break;
        }
        case Tag::CommitteeBatchRequest: {
            CommitteeBatchRequest m;
            m.from = r.u64be();
            m.count = r.u32be();
            ok = r.ok() && m.count <= kMaxListCount;
            msg = m;
            break;
        }
        case Tag::CommitteeBatchResponse: {
            CommitteeBatchResponse m;
            const uint32_t n = r.u32be();
            ok = r.ok() && n <= kMaxListCount;
            if (ok) {
                m.entries.resize(n);
                for (auto& e : m.entries)
                    ok = ok && get_committee(r, e.committee) && get_handover(r, e.handover);
            }
            msg = std::move(m);
            break;
        }
        case Tag::HashBatchRequest: {
            HashBatchRequest m;
            m.from = r.u64be();
            m.count = r.u32be();
            ok = r.ok() && m.count <= kMaxListCount;
            msg = m;
            break;
        }
        case Tag::HashBatchResponse: {
            HashBatchResponse m;
            const uint32_t n = r.u32be();
            ok = r.ok() && n <= kMaxListCount;
            if (ok) {
                m.digests.resize(n);
                for (auto& d : m.digests) ok = ok && get_digest(r, d);
            }
            msg = std::move(m);
            break;
        }
        case Tag::BalanceRequest: {
            BalanceRequest m;
            m.account = r.u64be();
            ok = r.ok();
            msg = m;
            break;
        }
        case Tag::BalanceResponse: {
            BalanceResponse m;
            const uint8_t status = r.u8();
            m.state_size = r.u64be();
            const uint8_t n = r.u8();
            ok = r.ok() && status <= 2 && n <= 4;
            m.status = static_cast<BalanceStatus>(status);
            if (ok) {
                m.entries.resize(n);
                for (auto& e : m.entries) {
                    e.account = r.u64be();
                    e.balance = r.u64be();
                    ok = ok && r.ok() && get_proof(r, e.proof);
                }
            }
            if (ok) {
                const uint8_t has_sentinel = r.u8();
                ok = r.ok() && has_sentinel <= 1;
                if (ok && has_sentinel) {
                    merkle::MerkleProof p;
                    ok = get_proof(r, p);
                    m.sentinel_proof = std::move(p);
                }
            }
            msg = std::move(m);
            break;
        }
        default:
            return std::nullopt;
    }
    if (!ok || !r.at_end()) return std::nullopt;
    return msg;
}

std::optional<Message> decode_frame(const Bytes& frame_bytes) {
    ByteReader r(frame_bytes);
    const uint32_t len = r.u32be();
    const uint8_t tag = r.u8();
    if (!r.ok() || len > kMaxPayloadSize) return std::nullopt;
    if (r.remaining() != len) return std::nullopt;
    return decode_payload(static_cast<Tag>(tag), r.blob(len));
}

}  // namespace popos::wire
