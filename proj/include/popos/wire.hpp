#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "popos/bytes.hpp"
#include "popos/chainsim.hpp"
#include "popos/crypto.hpp"
#include "popos/merkle.hpp"

namespace popos::wire {

using crypto::Digest;

// Frame layout shared by the simulated and TCP transports:
// 4-byte big-endian payload length, 1-byte tag, payload.
inline constexpr size_t kFrameHeaderSize = 5;
inline constexpr uint32_t kMaxPayloadSize = 1u << 30;

enum class Tag : uint8_t {
    ClaimRequest = 0x01,
    ClaimResponse = 0x02,
    Open = 0x03,
    Children = 0x04,
    LeafRequest = 0x05,
    LeafReveal = 0x06,
    PrevLeafReveal = 0x07,
    HandoverReveal = 0x08,
    Verdict = 0x09,
    // Fetch channels for the linear clients and balance queries.
    CommitteeBatchRequest = 0x0a,
    CommitteeBatchResponse = 0x0b,
    HashBatchRequest = 0x0c,
    HashBatchResponse = 0x0d,
    BalanceRequest = 0x0e,
    BalanceResponse = 0x0f,
};

/// A prover's opening statement: the claimed state commitment, its MMR
/// peaks, the latest committee with an inclusion proof against the last
/// peak, and the committee signatures over the commitment.
struct Claim {
    Digest state_commitment;
    std::vector<Digest> peaks;
    chainsim::SyncCommittee latest_committee;
    merkle::MerkleProof latest_proof;
    std::vector<chainsim::SignatureEntry> commitment_signatures;

    bool operator==(const Claim&) const = default;
};

struct ClaimRequest {
    uint32_t degree = 2;  // tree degree the verifier wants the MMR built with
};

struct ClaimResponse {
    Claim claim;
};

/// Asks for the children of the node addressed root-down by `path` in tree
/// `tree_index` of the degree-`degree` MMR. Stateless per game path.
struct Open {
    uint32_t degree = 2;
    uint32_t tree_index = 0;
    std::vector<uint32_t> path;
};

struct Children {
    std::vector<Digest> digests;
};

enum class LeafQuery : uint8_t {
    Committee = 0,  // committee at the addressed leaf
    Previous = 1,   // committee at the preceding leaf plus inclusion proof
    Handover = 2,   // handover proof for the addressed leaf's epoch
};

struct LeafRequest {
    LeafQuery kind = LeafQuery::Committee;
    uint32_t degree = 2;
    uint32_t tree_index = 0;
    std::vector<uint32_t> path;  // full root-to-leaf path
};

struct LeafReveal {
    chainsim::SyncCommittee committee;
};

/// Committee at leaf j-1 with its inclusion proof: against the same tree's
/// peak, or against the previous tree's peak when j is a tree's first leaf.
struct PrevLeafReveal {
    chainsim::SyncCommittee committee;
    merkle::MerkleProof proof;
};

struct HandoverReveal {
    chainsim::HandoverProof handover;
};

enum class VerdictKind : uint8_t {
    Win = 0,
    Loss = 1,
    BothLose = 2,
};

inline constexpr uint64_t kNoLeafIndex = ~uint64_t{0};

/// One-way game outcome notification, sent for observability.
struct Verdict {
    VerdictKind kind = VerdictKind::Loss;
    uint64_t leaf_index = kNoLeafIndex;
};

struct CommitteeBatchRequest {
    uint64_t from = 0;
    uint32_t count = 0;
};

struct CommitteeEntry {
    chainsim::SyncCommittee committee;
    chainsim::HandoverProof handover;  // empty signature list for epoch 0
};

struct CommitteeBatchResponse {
    std::vector<CommitteeEntry> entries;
};

struct HashBatchRequest {
    uint64_t from = 0;
    uint32_t count = 0;
};

struct HashBatchResponse {
    std::vector<Digest> digests;
};

struct BalanceRequest {
    chainsim::AccountId account = 0;
};

enum class BalanceStatus : uint8_t {
    Present = 0,
    Absent = 1,
    Unsupported = 2,
};

struct BalanceEntry {
    chainsim::AccountId account = 0;
    chainsim::Amount balance = 0;
    merkle::MerkleProof proof;
};

struct BalanceResponse {
    BalanceStatus status = BalanceStatus::Unsupported;
    uint64_t state_size = 0;  // claimed leaf count of the state tree
    std::vector<BalanceEntry> entries;
    // Proof that the slot just past the claimed last leaf is a padding
    // slot; required for upper-boundary absence when the tree is not full.
    std::optional<merkle::MerkleProof> sentinel_proof;
};

using Message =
    std::variant<ClaimRequest, ClaimResponse, Open, Children, LeafRequest, LeafReveal,
                 PrevLeafReveal, HandoverReveal, Verdict, CommitteeBatchRequest,
                 CommitteeBatchResponse, HashBatchRequest, HashBatchResponse, BalanceRequest,
                 BalanceResponse>;

Tag tag_of(const Message& msg);

/// Canonical payload bytes (without the frame header).
Bytes encode_payload(const Message& msg);

/// Full frame: length, tag, payload.
Bytes frame(const Message& msg);

/// Parses one payload for the given tag; nullopt on any malformation.
std::optional<Message> decode_payload(Tag tag, const Bytes& payload);

/// Parses a complete frame; nullopt on any malformation.
std::optional<Message> decode_frame(const Bytes& frame_bytes);

}  // namespace popos::wire
