#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "popos/crypto.hpp"

namespace popos::merkle {

using crypto::Digest;

// Domain separation prefixes. Leaves, internal nodes and the range root live
// in disjoint preimage spaces so a leaf can never masquerade as a node.
inline constexpr uint8_t kLeafPrefix = 0x00;
inline constexpr uint8_t kNodePrefix = 0x01;
inline constexpr uint8_t kRangeRootPrefix = 0x02;

/// Digest of a leaf byte string: H(0x00 || bytes).
Digest leaf_digest(const Bytes& leaf);

/// Digest of an internal node: H(0x01 || child_0 || ... || child_{d-1}).
Digest node_digest(const std::vector<Digest>& children);

/// Fixed filler digest for padding slots; carries no committee data.
const Digest& sentinel_leaf();

/// Root of a subtree of the given depth whose leaves are all sentinel slots.
Digest sentinel_subtree(uint32_t depth, uint32_t degree);

/// Number of levels of a degree-d tree holding `size` real leaves,
/// i.e. ceil(log_d(size)).
uint32_t depth_for(uint64_t size, uint32_t degree);

/// Inclusion proof: per level, the d-1 sibling digests in slot order
/// (the proven node's own slot omitted), leaf level first.
struct MerkleProof {
    uint64_t index = 0;   // leaf position in the tree
    uint64_t size = 0;    // real (unpadded) leaf count
    uint32_t degree = 2;
    std::vector<std::vector<Digest>> levels;

    bool operator==(const MerkleProof&) const = default;
};

/// Digests recomputed while walking a proof from the leaf up, including the
/// starting leaf digest; chain.back() is the recomputed root.
std::vector<Digest> recompute_chain(const MerkleProof& proof, const Digest& leaf);

/// True iff the proof carries the expected shape for (size, index) and its
/// recomputation from `leaf_bytes` ends at `root`. Pure; never throws on
/// malformed proofs.
bool verify_proof(const MerkleProof& proof, const Digest& root, uint64_t size, uint64_t index,
                  const Bytes& leaf_bytes);

/// Degree-d Merkle tree. Leaves beyond the real count are sentinel slots up
/// to the next power of d. Immutable after construction.
class MerkleTree {
public:
    MerkleTree(const std::vector<Bytes>& leaves, uint32_t degree);

    const Digest& root() const { return levels_.back()[0]; }
    uint64_t size() const { return size_; }
    uint32_t degree() const { return degree_; }
    uint32_t depth() const { return static_cast<uint32_t>(levels_.size() - 1); }

    /// The d child digests of the internal node addressed by a root-down
    /// child-index path. Throws if the path walks past the leaf level.
    std::vector<Digest> children(const std::vector<uint32_t>& node_path) const;

    /// Digest at the node addressed by the path (empty path = root).
    const Digest& node_at(const std::vector<uint32_t>& node_path) const;

    const Digest& leaf(uint64_t index) const;

    MerkleProof prove(uint64_t index) const;

    /// Proof for any slot below capacity, including sentinel padding slots.
    MerkleProof prove_slot(uint64_t slot) const;

private:
    uint64_t size_;
    uint32_t degree_;
    // levels_[0] = padded leaf digests, levels_.back() = {root}
    std::vector<std::vector<Digest>> levels_;
};

/// List of trees with strictly decreasing power-of-two sizes covering N
/// leaves; the trees' roots are the peaks.
class MountainRange {
public:
    MountainRange(const std::vector<Bytes>& leaves, uint32_t degree = 2);

    uint64_t leaf_count() const { return leaf_count_; }
    uint32_t degree() const { return degree_; }
    const std::vector<MerkleTree>& trees() const { return trees_; }
    const MerkleTree& tree(size_t i) const { return trees_.at(i); }

    std::vector<Digest> peaks() const;

    /// H(0x02 || peak_1 || ... || peak_n). Trace fingerprint only; the wire
    /// protocol ships the peaks themselves.
    Digest root() const;

    /// First leaf index (global) covered by tree i.
    uint64_t tree_start(size_t i) const { return starts_.at(i); }

private:
    uint64_t leaf_count_;
    uint32_t degree_;
    std::vector<MerkleTree> trees_;
    std::vector<uint64_t> starts_;
};

/// Sizes 2^{q_1} > ... > 2^{q_n} of the constituent trees for N leaves.
std::vector<uint64_t> mmr_decomposition(uint64_t leaf_count);

/// Maps a global leaf index to (tree index, local leaf index) under the
/// decomposition layout. Throws if out of range.
std::pair<size_t, uint64_t> mmr_locate(uint64_t leaf_count, uint64_t global_leaf);

}  // namespace popos::merkle
