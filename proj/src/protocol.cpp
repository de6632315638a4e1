#include "popos/protocol.hpp"

#include <algorithm>
#include <stdexcept>

namespace popos::protocol {

namespace {

uint64_t path_to_index(const std::vector<uint32_t>& path, uint32_t degree) {
    uint64_t idx = 0;
    for (uint32_t c : path) idx = idx * degree + c;
    return idx;
}

Bytes commitment_message(const Digest& st) {
    return Bytes(st.bytes.begin(), st.bytes.end());
}

}  // namespace

VerifierContext VerifierContext::for_trace(const chainsim::ExecutionTrace& trace,
                                           uint32_t degree) {
    VerifierContext ctx;
    ctx.horizon = trace.horizon;
    ctx.committee_size = trace.committee_size;
    ctx.genesis = trace.committee(0);
    ctx.degree = degree;
    return ctx;
}

// ---------------------------------------------------------------------------
// ProverSession
// ---------------------------------------------------------------------------

ProverSession::ProverSession(std::shared_ptr<const chainsim::ExecutionTrace> trace,
                             uint32_t degree)
    : trace_(std::move(trace)) {
    range(degree);
}

std::shared_ptr<ProverSession> prover_init(std::shared_ptr<const chainsim::ExecutionTrace> trace,
                                           uint32_t degree) {
    return std::make_shared<ProverSession>(std::move(trace), degree);
}

const merkle::MountainRange& ProverSession::range(uint32_t degree) const {
    std::lock_guard lock(mu_);
    auto it = ranges_.find(degree);
    if (it == ranges_.end()) {
        auto built = std::make_shared<const merkle::MountainRange>(trace_->leaf_encodings(),
                                                                   degree);
        it = ranges_.emplace(degree, std::move(built)).first;
    }
    return *it->second;
}

std::optional<wire::Message> ProverSession::handle(const wire::Message& request) {
    if (const auto* m = std::get_if<wire::ClaimRequest>(&request)) {
        if (m->degree < 2) return std::nullopt;
        return wire::ClaimResponse{build_claim(*trace_, range(m->degree))};
    }
    if (const auto* m = std::get_if<wire::Open>(&request)) return handle_open(*m);
    if (const auto* m = std::get_if<wire::LeafRequest>(&request)) return handle_leaf(*m);
    if (std::get_if<wire::Verdict>(&request)) return std::nullopt;  // one-way
    if (const auto* m = std::get_if<wire::CommitteeBatchRequest>(&request))
        return handle_committee_batch(*m);
    if (const auto* m = std::get_if<wire::HashBatchRequest>(&request))
        return handle_hash_batch(*m);
    if (const auto* m = std::get_if<wire::BalanceRequest>(&request)) return handle_balance(*m);
    return std::nullopt;
}

std::optional<wire::Message> ProverSession::handle_open(const wire::Open& msg) const {
    const auto& mmr = range(msg.degree);
    if (msg.tree_index >= mmr.trees().size()) return wire::Children{};
    try {
        return wire::Children{mmr.tree(msg.tree_index).children(msg.path)};
    } catch (const std::exception&) {
        return wire::Children{};
    }
}

std::optional<wire::Message> ProverSession::handle_leaf(const wire::LeafRequest& msg) const {
    const auto& mmr = range(msg.degree);
    if (msg.tree_index >= mmr.trees().size()) return std::nullopt;
    const auto& tree = mmr.tree(msg.tree_index);
    if (msg.path.size() != tree.depth()) return std::nullopt;
    const uint64_t local = path_to_index(msg.path, msg.degree);
    if (local >= tree.size()) return std::nullopt;  // padding slot holds no committee
    const uint64_t global = mmr.tree_start(msg.tree_index) + local;

    switch (msg.kind) {
        case wire::LeafQuery::Committee:
            return wire::LeafReveal{trace_->committee(global)};
        case wire::LeafQuery::Previous: {
            if (global == 0) return std::nullopt;  // genesis has no predecessor
            if (local == 0) {
                auto [committee, proof] = cross_tree_prev_leaf(*trace_, mmr, msg.tree_index);
                return wire::PrevLeafReveal{std::move(committee), std::move(proof)};
            }
            return wire::PrevLeafReveal{trace_->committee(global - 1), tree.prove(local - 1)};
        }
        case wire::LeafQuery::Handover: {
            if (global == 0) return std::nullopt;
            return wire::HandoverReveal{trace_->epochs.at(global).handover};
        }
    }
    return std::nullopt;
}

std::optional<wire::Message> ProverSession::handle_committee_batch(
    const wire::CommitteeBatchRequest& msg) const {
    wire::CommitteeBatchResponse resp;
    const uint64_t end = std::min<uint64_t>(trace_->horizon, msg.from + msg.count);
    for (uint64_t e = msg.from; e < end; ++e)
        resp.entries.push_back({trace_->committee(e), trace_->epochs.at(e).handover});
    return resp;
}

std::optional<wire::Message> ProverSession::handle_hash_batch(
    const wire::HashBatchRequest& msg) const {
    wire::HashBatchResponse resp;
    const uint64_t end = std::min<uint64_t>(trace_->horizon, msg.from + msg.count);
    for (uint64_t e = msg.from; e < end; ++e)
        resp.digests.push_back(merkle::leaf_digest(chainsim::leaf_encoding(trace_->committee(e))));
    return resp;
}

std::optional<wire::Message> ProverSession::handle_balance(const wire::BalanceRequest& msg) const {
    const chainsim::AccountState& st = trace_->final_state;
    if (st.empty()) return wire::BalanceResponse{};  // state layer unavailable

    std::shared_ptr<const merkle::MerkleTree> tree;
    {
        std::lock_guard lock(mu_);
        if (!state_tree_)
            state_tree_ = std::make_shared<const merkle::MerkleTree>(chainsim::state_tree(st));
        tree = state_tree_;
    }

    wire::BalanceResponse resp;
    resp.state_size = st.size();
    auto entry_at = [&](uint64_t rank) {
        auto it = st.begin();
        std::advance(it, static_cast<ptrdiff_t>(rank));
        return wire::BalanceEntry{it->first, it->second, tree->prove(rank)};
    };

    if (const auto rank = chainsim::account_rank(st, msg.account)) {
        resp.status = wire::BalanceStatus::Present;
        resp.entries.push_back(entry_at(*rank));
        return resp;
    }

    resp.status = wire::BalanceStatus::Absent;
    const uint64_t above = static_cast<uint64_t>(
        std::distance(st.begin(), st.upper_bound(msg.account)));
    if (above == 0) {
        resp.entries.push_back(entry_at(0));
    } else if (above == st.size()) {
        resp.entries.push_back(entry_at(st.size() - 1));
        uint64_t capacity = 1;
        for (uint32_t i = 0; i < tree->depth(); ++i) capacity *= tree->degree();
        // If the tree is not full, show that the slot after the last leaf
        // is a padding slot, so no account can hide beyond it.
        if (st.size() < capacity) resp.sentinel_proof = tree->prove_slot(st.size());
    } else {
        resp.entries.push_back(entry_at(above - 1));
        resp.entries.push_back(entry_at(above));
    }
    return resp;
}

// ---------------------------------------------------------------------------
// Claims
// ---------------------------------------------------------------------------

Claim build_claim(const chainsim::ExecutionTrace& trace, const merkle::MountainRange& range) {
    Claim claim;
    const auto& last = trace.epochs.back();
    claim.state_commitment = last.state_commitment;
    claim.peaks = range.peaks();
    claim.latest_committee = last.committee;
    const auto& last_tree = range.trees().back();
    claim.latest_proof = last_tree.prove(last_tree.size() - 1);
    claim.commitment_signatures = last.commitment_signatures;
    return claim;
}

bool check_claim(const Claim& claim, const VerifierContext& ctx) {
    const auto sizes = merkle::mmr_decomposition(ctx.horizon);
    if (claim.peaks.size() != sizes.size()) return false;
    if (claim.latest_committee.epoch != ctx.horizon - 1) return false;
    if (claim.latest_committee.members.size() != ctx.committee_size) return false;
    if (claim.latest_proof.degree != ctx.degree) return false;
    const uint64_t last_size = sizes.back();
    if (!merkle::verify_proof(claim.latest_proof, claim.peaks.back(), last_size, last_size - 1,
                              chainsim::leaf_encoding(claim.latest_committee)))
        return false;
    const uint32_t valid = chainsim::count_valid_signatures(
        claim.latest_committee, commitment_message(claim.state_commitment),
        claim.commitment_signatures);
    return valid >= chainsim::majority_threshold(ctx.committee_size);
}

std::optional<size_t> peaks_first_disagreement(const std::vector<Digest>& a,
                                               const std::vector<Digest>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("peaks_first_disagreement: length mismatch");
    for (size_t i = 0; i < a.size(); ++i)
        if (!(a[i] == b[i])) return i;
    return std::nullopt;
}

std::pair<chainsim::SyncCommittee, merkle::MerkleProof> cross_tree_prev_leaf(
    const chainsim::ExecutionTrace& trace, const merkle::MountainRange& range,
    size_t tree_index) {
    if (tree_index == 0 || tree_index >= range.trees().size())
        throw std::invalid_argument("cross_tree_prev_leaf: no previous tree");
    const auto& prev_tree = range.tree(tree_index - 1);
    const uint64_t prev_global = range.tree_start(tree_index) - 1;
    return {trace.committee(prev_global), prev_tree.prove(prev_tree.size() - 1)};
}

// ---------------------------------------------------------------------------
// Bisection game
// ---------------------------------------------------------------------------

namespace {

struct Side {
    Side(transport::Channel& ch, const Claim& cl, const char* n)
        : channel(ch), claim(cl), name(n) {}

    transport::Channel& channel;
    const Claim& claim;
    const char* name;
    bool alive = true;
    std::string reason;
    Digest current;
    std::optional<chainsim::SyncCommittee> leaf_committee;
    std::optional<chainsim::SyncCommittee> prev_committee;
};

void eliminate(Side& side, const std::string& why) {
    if (!side.alive) return;
    side.alive = false;
    side.reason = std::string(side.name) + ": " + why;
}

/// Requests from one side and checks the response holds the expected
/// message alternative; eliminates on timeout or type mismatch.
template <typename Expected>
std::optional<Expected> ask(Side& side, const wire::Message& msg) {
    auto resp = side.channel.request(msg);
    if (!resp) {
        eliminate(side, "timeout");
        return std::nullopt;
    }
    if (auto* m = std::get_if<Expected>(&*resp)) return std::move(*m);
    eliminate(side, "unexpected message");
    return std::nullopt;
}

std::string join_reasons(const Side& a, const Side& b) {
    std::string s;
    if (!a.alive) s += a.reason;
    if (!b.alive) {
        if (!s.empty()) s += "; ";
        s += b.reason;
    }
    return s;
}

}  // namespace

GameOutcome bisection_game(const VerifierContext& ctx, transport::Channel& prover_a,
                           transport::Channel& prover_b, const Claim& claim_a,
                           const Claim& claim_b, size_t tree_index) {
    const auto sizes = merkle::mmr_decomposition(ctx.horizon);
    if (tree_index >= sizes.size())
        throw std::invalid_argument("bisection_game: tree index out of range");
    if (claim_a.peaks.at(tree_index) == claim_b.peaks.at(tree_index))
        throw std::invalid_argument("bisection_game: peaks agree at tree index");
    // Earlier peaks must agree: the cross-tree previous-leaf check anchors
    // against them.
    for (size_t i = 0; i < tree_index; ++i)
        if (!(claim_a.peaks[i] == claim_b.peaks[i]))
            throw std::invalid_argument("bisection_game: not the first differing tree");

    const uint32_t d = ctx.degree;
    const uint64_t size = sizes[tree_index];
    const uint32_t depth = merkle::depth_for(size, d);
    uint64_t tree_start = 0;
    for (size_t i = 0; i < tree_index; ++i) tree_start += sizes[i];
    uint64_t span = 1;
    for (uint32_t i = 0; i < depth; ++i) span *= d;  // capacity of current node

    Side a{prover_a, claim_a, "prover A"};
    Side b{prover_b, claim_b, "prover B"};
    a.current = claim_a.peaks[tree_index];
    b.current = claim_b.peaks[tree_index];

    GameOutcome outcome;
    std::vector<uint32_t> path;
    uint64_t base_local = 0;
    std::optional<Digest> anchor;
    uint32_t anchor_levels = 0;

    auto finish = [&]() -> GameOutcome {
        if (a.alive && !b.alive)
            outcome.result = GameResult::WinA;
        else if (!a.alive && b.alive)
            outcome.result = GameResult::WinB;
        else
            outcome.result = GameResult::BothLose;
        if (outcome.note.empty()) outcome.note = join_reasons(a, b);
        const uint64_t idx = outcome.leaf_index.value_or(wire::kNoLeafIndex);
        prover_a.send_oneway(wire::Verdict{
            a.alive && !b.alive ? wire::VerdictKind::Win
                                : (b.alive ? wire::VerdictKind::Loss : wire::VerdictKind::BothLose),
            idx});
        prover_b.send_oneway(wire::Verdict{
            b.alive && !a.alive ? wire::VerdictKind::Win
                                : (a.alive ? wire::VerdictKind::Loss : wire::VerdictKind::BothLose),
            idx});
        return outcome;
    };

    // Descent: at each level both provers open the current node; descend
    // into the first disagreeing child.
    for (uint32_t step = 0; step < depth; ++step) {
        span /= d;
        const wire::Open open{d, static_cast<uint32_t>(tree_index), path};
        outcome.open_rounds += 1;

        auto children_a = ask<wire::Children>(a, open);
        auto children_b = ask<wire::Children>(b, open);

        auto check_children = [&](Side& side, const std::optional<wire::Children>& ch) {
            if (!side.alive || !ch) return;
            if (ch->digests.size() != d) {
                eliminate(side, "malformed children");
                return;
            }
            if (!(merkle::node_digest(ch->digests) == side.current))
                eliminate(side, "children do not hash to parent");
        };
        check_children(a, children_a);
        check_children(b, children_b);
        if (!a.alive || !b.alive) return finish();

        size_t diff = d;
        for (size_t c = 0; c < d; ++c) {
            if (!(children_a->digests[c] == children_b->digests[c])) {
                diff = c;
                break;
            }
        }
        if (diff == d) {
            // Equal child lists cannot hash to two different parents.
            eliminate(a, "children agree under differing parents");
            eliminate(b, "children agree under differing parents");
            return finish();
        }

        if (base_local + diff * span >= size) {
            // The disagreeing child covers padding slots only; the honest
            // value there is forced, so whoever deviates claimed data in a
            // sentinel region.
            const Digest expected = merkle::sentinel_subtree(depth - step - 1, d);
            if (!(children_a->digests[diff] == expected))
                eliminate(a, "claimed data in padding region");
            if (!(children_b->digests[diff] == expected))
                eliminate(b, "claimed data in padding region");
            return finish();
        }

        if (diff > 0) {
            anchor = children_a->digests[diff - 1];  // agreed left sibling
            anchor_levels = depth - step - 1;
        }
        a.current = children_a->digests[diff];
        b.current = children_b->digests[diff];
        path.push_back(static_cast<uint32_t>(diff));
        base_local += diff * span;
    }

    // Leaf phase.
    const uint64_t local_j = base_local;
    if (local_j >= size) {
        if (!(a.current == merkle::sentinel_leaf())) eliminate(a, "claimed data in padding slot");
        if (!(b.current == merkle::sentinel_leaf())) eliminate(b, "claimed data in padding slot");
        return finish();
    }
    const uint64_t j = tree_start + local_j;
    outcome.leaf_index = j;

    const wire::LeafRequest leaf_req{wire::LeafQuery::Committee, d,
                                     static_cast<uint32_t>(tree_index), path};
    auto reveal_a = ask<wire::LeafReveal>(a, leaf_req);
    auto reveal_b = ask<wire::LeafReveal>(b, leaf_req);
    auto check_leaf = [&](Side& side, std::optional<wire::LeafReveal>& reveal) {
        if (!side.alive || !reveal) return;
        const auto& committee = reveal->committee;
        if (committee.epoch != j || committee.members.size() != ctx.committee_size) {
            eliminate(side, "leaf committee malformed");
            return;
        }
        if (!(merkle::leaf_digest(chainsim::leaf_encoding(committee)) == side.current)) {
            eliminate(side, "leaf does not match committed digest");
            return;
        }
        side.leaf_committee = committee;
    };
    check_leaf(a, reveal_a);
    check_leaf(b, reveal_b);
    if (!a.alive && !b.alive) return finish();

    if (j == 0) {
        // Genesis case: the verifier holds S^0 itself.
        if (a.alive && !(a.leaf_committee->members == ctx.genesis.members))
            eliminate(a, "genesis committee mismatch");
        if (b.alive && !(b.leaf_committee->members == ctx.genesis.members))
            eliminate(b, "genesis committee mismatch");
        return finish();
    }

    const wire::LeafRequest prev_req{wire::LeafQuery::Previous, d,
                                     static_cast<uint32_t>(tree_index), path};
    auto prev_a = a.alive ? ask<wire::PrevLeafReveal>(a, prev_req)
                          : std::optional<wire::PrevLeafReveal>{};
    auto prev_b = b.alive ? ask<wire::PrevLeafReveal>(b, prev_req)
                          : std::optional<wire::PrevLeafReveal>{};
    auto check_prev = [&](Side& side, std::optional<wire::PrevLeafReveal>& prev) {
        if (!side.alive || !prev) return;
        const auto& committee = prev->committee;
        if (committee.epoch != j - 1 || committee.members.size() != ctx.committee_size) {
            eliminate(side, "previous committee malformed");
            return;
        }
        const Bytes prev_bytes = chainsim::leaf_encoding(committee);
        if (local_j == 0) {
            // Cross-tree: the previous peak is agreed, verify against it.
            const uint64_t prev_size = sizes[tree_index - 1];
            if (!merkle::verify_proof(prev->proof, claim_a.peaks[tree_index - 1], prev_size,
                                      prev_size - 1, prev_bytes)) {
                eliminate(side, "previous-leaf proof invalid against previous peak");
                return;
            }
        } else {
            if (!merkle::verify_proof(prev->proof, side.claim.peaks[tree_index], size,
                                      local_j - 1, prev_bytes)) {
                eliminate(side, "previous-leaf proof invalid");
                return;
            }
            // The proof must pass through the deepest agreed left sibling
            // seen during descent; that node pins leaf j-1 for both trees.
            const auto chain =
                merkle::recompute_chain(prev->proof, merkle::leaf_digest(prev_bytes));
            if (!anchor || !(chain.at(anchor_levels) == *anchor)) {
                eliminate(side, "previous leaf not under agreed subtree");
                return;
            }
        }
        side.prev_committee = committee;
    };
    check_prev(a, prev_a);
    check_prev(b, prev_b);
    if (a.alive && b.alive && !(a.prev_committee->members == b.prev_committee->members)) {
        eliminate(a, "previous committees differ despite agreed digest");
        eliminate(b, "previous committees differ despite agreed digest");
        return finish();
    }
    if (!a.alive && !b.alive) return finish();
    outcome.prev_committee = a.alive ? a.prev_committee : b.prev_committee;

    const wire::LeafRequest handover_req{wire::LeafQuery::Handover, d,
                                         static_cast<uint32_t>(tree_index), path};
    auto handover_a = a.alive ? ask<wire::HandoverReveal>(a, handover_req)
                              : std::optional<wire::HandoverReveal>{};
    auto handover_b = b.alive ? ask<wire::HandoverReveal>(b, handover_req)
                              : std::optional<wire::HandoverReveal>{};
    auto check_handover = [&](Side& side, std::optional<wire::HandoverReveal>& reveal) {
        if (!side.alive || !reveal) return;
        if (!chainsim::verify_handover(*outcome.prev_committee, j, *side.leaf_committee,
                                       reveal->handover))
            eliminate(side, "handover proof invalid");
    };
    check_handover(a, handover_a);
    check_handover(b, handover_b);

    if (a.alive && b.alive) {
        // Over m/2 members of the agreed previous committee signed two
        // different successor committees; both provers are adversarial.
        outcome.note = "equivocation: both handover proofs valid";
        a.alive = false;
        b.alive = false;
    }
    return finish();
}

// ---------------------------------------------------------------------------
// Tournament
// ---------------------------------------------------------------------------

std::vector<std::optional<Claim>> collect_claims(const VerifierContext& ctx,
                                                 const std::vector<transport::Channel*>& provers) {
    std::vector<std::optional<Claim>> claims(provers.size());
    for (size_t i = 0; i < provers.size(); ++i) {
        auto resp = provers[i]->request(wire::ClaimRequest{ctx.degree});
        if (!resp) continue;
        auto* m = std::get_if<wire::ClaimResponse>(&*resp);
        if (!m) continue;
        if (check_claim(m->claim, ctx)) claims[i] = std::move(m->claim);
    }
    return claims;
}

TournamentResult tournament_on(const VerifierContext& ctx,
                               const std::vector<transport::Channel*>& provers,
                               const std::vector<std::optional<Claim>>& claims) {
    TournamentResult result;
    std::vector<size_t> alive;
    for (size_t i = 0; i < claims.size(); ++i)
        if (claims[i]) alive.push_back(i);

    while (!alive.empty()) {
        const size_t front = alive[0];
        const Claim& front_claim = *claims[front];

        size_t challenger = alive.size();
        for (size_t k = 1; k < alive.size(); ++k) {
            if (!(claims[alive[k]]->state_commitment == front_claim.state_commitment)) {
                challenger = k;
                break;
            }
        }
        if (challenger == alive.size()) {
            result.commitment = front_claim.state_commitment;
            result.survivors = alive;
            return result;
        }

        const size_t other = alive[challenger];
        const auto tree = peaks_first_disagreement(front_claim.peaks, claims[other]->peaks);
        bool drop_front = false;
        bool drop_other = false;
        if (!tree) {
            // Same trees, conflicting signed commitments: the claimed latest
            // committee equivocated, so neither claim can stand.
            drop_front = drop_other = true;
        } else {
            GameOutcome game = bisection_game(ctx, *provers[front], *provers[other], front_claim,
                                              *claims[other], *tree);
            result.games_played += 1;
            drop_front = game.result != GameResult::WinA;
            drop_other = game.result != GameResult::WinB;
            result.games.push_back(std::move(game));
        }
        std::erase_if(alive, [&](size_t i) {
            return (drop_front && i == front) || (drop_other && i == other);
        });
    }
    return result;  // eclipsed: nobody left standing
}

TournamentResult tournament(const VerifierContext& ctx,
                            const std::vector<transport::Channel*>& provers) {
    return tournament_on(ctx, provers, collect_claims(ctx, provers));
}

bool verify_outcome_state_security(const Digest& result, const chainsim::ExecutionTrace& honest) {
    chainsim::AccountState st = honest.genesis_state;
    for (const auto& txs : honest.epoch_txs) chainsim::apply_all(st, txs);
    return chainsim::commit(st) == result;
}

}  // namespace popos::protocol
