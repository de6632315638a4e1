#include "popos/merkle.hpp"

#include <stdexcept>

namespace popos::merkle {

Digest leaf_digest(const Bytes& leaf) {
    Bytes buf;
    buf.reserve(1 + leaf.size());
    put_u8(buf, kLeafPrefix);
    put_bytes(buf, leaf);
    return crypto::hash(buf);
}

Digest node_digest(const std::vector<Digest>& children) {
    Bytes buf;
    buf.reserve(1 + children.size() * crypto::kDigestSize);
    put_u8(buf, kNodePrefix);
    for (const auto& c : children) put_bytes(buf, c.bytes.data(), c.bytes.size());
    return crypto::hash(buf);
}

const Digest& sentinel_leaf() {
    static const Digest d = [] {
        Bytes b{0xff};
        return crypto::hash(b);
    }();
    return d;
}

Digest sentinel_subtree(uint32_t depth, uint32_t degree) {
    Digest cur = sentinel_leaf();
    for (uint32_t lvl = 0; lvl < depth; ++lvl)
        cur = node_digest(std::vector<Digest>(degree, cur));
    return cur;
}

uint32_t depth_for(uint64_t size, uint32_t degree) {
    if (size == 0) throw std::invalid_argument("depth_for: empty tree");
    uint32_t depth = 0;
    uint64_t capacity = 1;
    while (capacity < size) {
        capacity *= degree;
        ++depth;
    }
    return depth;
}

std::vector<Digest> recompute_chain(const MerkleProof& proof, const Digest& leaf) {
    std::vector<Digest> chain;
    chain.reserve(proof.levels.size() + 1);
    chain.push_back(leaf);
    uint64_t pos = proof.index;
    for (const auto& siblings : proof.levels) {
        std::vector<Digest> group;
        group.reserve(proof.degree);
        const uint32_t own = static_cast<uint32_t>(pos % proof.degree);
        size_t si = 0;
        for (uint32_t slot = 0; slot < proof.degree; ++slot) {
            if (slot == own)
                group.push_back(chain.back());
            else
                group.push_back(siblings[si++]);
        }
        chain.push_back(node_digest(group));
        pos /= proof.degree;
    }
    return chain;
}

bool verify_proof(const MerkleProof& proof, const Digest& root, uint64_t size, uint64_t index,
                  const Bytes& leaf_bytes) {
    if (proof.degree < 2) return false;
    if (proof.size != size || proof.index != index) return false;
    if (size == 0 || index >= size) return false;
    if (proof.levels.size() != depth_for(size, proof.degree)) return false;
    for (const auto& level : proof.levels)
        if (level.size() != proof.degree - 1) return false;
    return recompute_chain(proof, leaf_digest(leaf_bytes)).back() == root;
}

MerkleTree::MerkleTree(const std::vector<Bytes>& leaves, uint32_t degree)
    : size_(leaves.size()), degree_(degree) {
    if (degree < 2) throw std::invalid_argument("MerkleTree: degree must be >= 2");
    if (leaves.empty()) throw std::invalid_argument("MerkleTree: empty leaf list");

    const uint32_t depth = depth_for(size_, degree_);
    uint64_t capacity = 1;
    for (uint32_t i = 0; i < depth; ++i) capacity *= degree_;

    std::vector<Digest> level;
    level.reserve(capacity);
    for (const auto& l : leaves) level.push_back(leaf_digest(l));
    level.resize(capacity, sentinel_leaf());
    levels_.push_back(std::move(level));

    while (levels_.back().size() > 1) {
        const auto& below = levels_.back();
        std::vector<Digest> above;
        above.reserve(below.size() / degree_);
        std::vector<Digest> group(degree_);
        for (size_t i = 0; i < below.size(); i += degree_) {
            for (uint32_t c = 0; c < degree_; ++c) group[c] = below[i + c];
            above.push_back(node_digest(group));
        }
        levels_.push_back(std::move(above));
    }
}

const Digest& MerkleTree::node_at(const std::vector<uint32_t>& node_path) const {
    if (node_path.size() >= levels_.size())
        throw std::out_of_range("MerkleTree: path walks past leaf level");
    size_t level = levels_.size() - 1;  // root
    uint64_t pos = 0;
    for (uint32_t child : node_path) {
        if (child >= degree_) throw std::out_of_range("MerkleTree: child index out of range");
        pos = pos * degree_ + child;
        --level;
    }
    return levels_[level][pos];
}

std::vector<Digest> MerkleTree::children(const std::vector<uint32_t>& node_path) const {
    if (node_path.size() + 1 >= levels_.size())
        throw std::out_of_range("MerkleTree: node has no children");
    uint64_t pos = 0;
    for (uint32_t child : node_path) {
        if (child >= degree_) throw std::out_of_range("MerkleTree: child index out of range");
        pos = pos * degree_ + child;
    }
    const auto& below = levels_[levels_.size() - 2 - node_path.size()];
    std::vector<Digest> out(degree_);
    for (uint32_t c = 0; c < degree_; ++c) out[c] = below[pos * degree_ + c];
    return out;
}

const Digest& MerkleTree::leaf(uint64_t index) const {
    if (index >= levels_[0].size()) throw std::out_of_range("MerkleTree: leaf index");
    return levels_[0][index];
}

MerkleProof MerkleTree::prove(uint64_t index) const {
    if (index >= size_) throw std::out_of_range("MerkleTree: prove index out of range");
    return prove_slot(index);
}

MerkleProof MerkleTree::prove_slot(uint64_t slot) const {
    if (slot >= levels_[0].size()) throw std::out_of_range("MerkleTree: slot out of range");
    MerkleProof proof;
    proof.index = slot;
    proof.size = size_;
    proof.degree = degree_;
    uint64_t pos = slot;
    for (size_t lvl = 0; lvl + 1 < levels_.size(); ++lvl) {
        const auto& nodes = levels_[lvl];
        const uint64_t base = pos - pos % degree_;
        std::vector<Digest> siblings;
        siblings.reserve(degree_ - 1);
        for (uint32_t c = 0; c < degree_; ++c)
            if (base + c != pos) siblings.push_back(nodes[base + c]);
        proof.levels.push_back(std::move(siblings));
        pos /= degree_;
    }
    return proof;
}

std::vector<uint64_t> mmr_decomposition(uint64_t leaf_count) {
    if (leaf_count == 0) throw std::invalid_argument("mmr_decomposition: empty range");
    std::vector<uint64_t> sizes;
    for (int bit = 63; bit >= 0; --bit) {
        const uint64_t p = uint64_t{1} << bit;
        if (leaf_count & p) sizes.push_back(p);
    }
    return sizes;
}

std::pair<size_t, uint64_t> mmr_locate(uint64_t leaf_count, uint64_t global_leaf) {
    if (global_leaf >= leaf_count) throw std::out_of_range("mmr_locate: leaf out of range");
    uint64_t start = 0;
    const auto sizes = mmr_decomposition(leaf_count);
    for (size_t i = 0; i < sizes.size(); ++i) {
        if (global_leaf < start + sizes[i]) return {i, global_leaf - start};
        start += sizes[i];
    }
    throw std::logic_error("mmr_locate: unreachable");
}

MountainRange::MountainRange(const std::vector<Bytes>& leaves, uint32_t degree)
    : leaf_count_(leaves.size()), degree_(degree) {
    if (leaves.empty()) throw std::invalid_argument("MountainRange: empty leaf list");
    uint64_t start = 0;
    for (uint64_t size : mmr_decomposition(leaf_count_)) {
        std::vector<Bytes> part(leaves.begin() + start, leaves.begin() + start + size);
        trees_.emplace_back(part, degree_);
        starts_.push_back(start);
        start += size;
    }
}

std::vector<Digest> MountainRange::peaks() const {
    std::vector<Digest> out;
    out.reserve(trees_.size());
    for (const auto& t : trees_) out.push_back(t.root());
    return out;
}

Digest MountainRange::root() const {
    Bytes buf;
    put_u8(buf, kRangeRootPrefix);
    for (const auto& t : trees_) put_bytes(buf, t.root().bytes.data(), crypto::kDigestSize);
    return crypto::hash(buf);
}

}  // namespace popos::merkle
