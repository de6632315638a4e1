#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "popos/chainsim.hpp"
#include "popos/merkle.hpp"
#include "popos/transport.hpp"
#include "popos/wire.hpp"

namespace popos::protocol {

using crypto::Digest;
using wire::Claim;

/// Everything the verifier knows before talking to anyone: the horizon from
/// its local clock, the genesis committee, and its protocol parameters.
struct VerifierContext {
    uint64_t horizon = 1;  // N
    uint32_t committee_size = 8;
    chainsim::SyncCommittee genesis;
    uint32_t degree = 2;

    static VerifierContext for_trace(const chainsim::ExecutionTrace& trace, uint32_t degree = 2);
};

/// Honest prover endpoint over one immutable trace. Handles every request
/// kind statelessly per game path; safe for concurrent sessions. Mountain
/// ranges are built once per requested degree and cached.
class ProverSession : public transport::Endpoint {
public:
    ProverSession(std::shared_ptr<const chainsim::ExecutionTrace> trace, uint32_t degree);

    std::optional<wire::Message> handle(const wire::Message& request) override;

    const chainsim::ExecutionTrace& trace() const { return *trace_; }
    const merkle::MountainRange& range(uint32_t degree) const;

private:
    std::optional<wire::Message> handle_open(const wire::Open& msg) const;
    std::optional<wire::Message> handle_leaf(const wire::LeafRequest& msg) const;
    std::optional<wire::Message> handle_committee_batch(
        const wire::CommitteeBatchRequest& msg) const;
    std::optional<wire::Message> handle_hash_batch(const wire::HashBatchRequest& msg) const;
    std::optional<wire::Message> handle_balance(const wire::BalanceRequest& msg) const;

    std::shared_ptr<const chainsim::ExecutionTrace> trace_;
    mutable std::mutex mu_;
    mutable std::map<uint32_t, std::shared_ptr<const merkle::MountainRange>> ranges_;
    mutable std::shared_ptr<const merkle::MerkleTree> state_tree_;
};

std::shared_ptr<ProverSession> prover_init(std::shared_ptr<const chainsim::ExecutionTrace> trace,
                                           uint32_t degree = 2);

/// The claim a prover makes for a trace under a given degree.
Claim build_claim(const chainsim::ExecutionTrace& trace, const merkle::MountainRange& range);

/// Prologue filter: peak count matches the decomposition of N, the latest
/// committee occupies the last leaf of the last tree, and more than m/2
/// unique committee members signed the state commitment.
bool check_claim(const Claim& claim, const VerifierContext& ctx);

/// Smallest index where the two peak lists differ, nullopt when identical.
/// Throws on length mismatch (pre-filtered by check_claim).
std::optional<size_t> peaks_first_disagreement(const std::vector<Digest>& a,
                                               const std::vector<Digest>& b);

/// Committee at the last leaf of tree_index-1 with its inclusion proof
/// against that tree's peak; serves a disagreement at the first leaf of
/// tree_index.
std::pair<chainsim::SyncCommittee, merkle::MerkleProof> cross_tree_prev_leaf(
    const chainsim::ExecutionTrace& trace, const merkle::MountainRange& range, size_t tree_index);

enum class GameResult : uint8_t {
    WinA = 0,
    WinB = 1,
    BothLose = 2,
};

struct GameOutcome {
    GameResult result = GameResult::BothLose;
    std::optional<uint64_t> leaf_index;  // first-disagreement epoch, when pinpointed
    std::optional<chainsim::SyncCommittee> prev_committee;  // validated previous leaf
    uint32_t open_rounds = 0;
    std::string note;
};

/// Plays one bisection game over the tree where the claims' peaks first
/// differ. The verifier validates both sides identically; failing any check
/// (or silence) loses, and two valid handover proofs lose both provers.
GameOutcome bisection_game(const VerifierContext& ctx, transport::Channel& prover_a,
                           transport::Channel& prover_b, const Claim& claim_a,
                           const Claim& claim_b, size_t tree_index);

struct TournamentResult {
    std::optional<Digest> commitment;  // nullopt: every prover eliminated
    size_t games_played = 0;
    std::vector<size_t> survivors;
    std::vector<GameOutcome> games;
};

/// One claim per channel; nullopt for unresponsive provers or claims that
/// fail check_claim.
std::vector<std::optional<Claim>> collect_claims(const VerifierContext& ctx,
                                                 const std::vector<transport::Channel*>& provers);

/// Elimination loop over already-collected claims.
TournamentResult tournament_on(const VerifierContext& ctx,
                               const std::vector<transport::Channel*>& provers,
                               const std::vector<std::optional<Claim>>& claims);

/// Claims plus elimination loop; returns the surviving commitment.
TournamentResult tournament(const VerifierContext& ctx,
                            const std::vector<transport::Channel*>& provers);

/// Recomputes the honest epoch-start commitment from genesis by replaying
/// the trace's ledger and compares it to the tournament result.
bool verify_outcome_state_security(const Digest& result, const chainsim::ExecutionTrace& honest);

}  // namespace popos::protocol
