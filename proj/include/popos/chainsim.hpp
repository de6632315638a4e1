#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "popos/crypto.hpp"
#include "popos/merkle.hpp"

namespace popos::chainsim {

using crypto::Digest;
using crypto::PublicKey;
using crypto::SignatureValue;

// ---------------------------------------------------------------------------
// Committees and handovers
// ---------------------------------------------------------------------------

struct SyncCommittee {
    uint64_t epoch = 0;
    std::vector<PublicKey> members;

    bool operator==(const SyncCommittee&) const = default;
};

/// Canonical leaf bytes of a committee: 8-byte big-endian epoch followed by
/// the member keys in order. Doubles as the handover signing message for
/// the tuple (epoch, committee).
Bytes leaf_encoding(const SyncCommittee& committee);

struct SignatureEntry {
    uint32_t member = 0;
    SignatureValue sig;

    bool operator==(const SignatureEntry&) const = default;
};

/// Signatures by members of the previous committee inaugurating epoch
/// `epoch`'s committee.
struct HandoverProof {
    uint64_t epoch = 0;
    std::vector<SignatureEntry> signatures;

    bool operator==(const HandoverProof&) const = default;
};

/// Majority threshold "more than m/2" as a concrete count: floor(m/2)+1.
inline uint32_t majority_threshold(uint32_t committee_size) {
    return committee_size / 2 + 1;
}

/// True iff `proof` carries at least floor(m/2)+1 unique valid member
/// signatures from `prev` over the tuple (epoch, next).
bool verify_handover(const SyncCommittee& prev, uint64_t epoch, const SyncCommittee& next,
                     const HandoverProof& proof);

/// Counts unique valid signatures by `committee` members over `message`.
uint32_t count_valid_signatures(const SyncCommittee& committee, const Bytes& message,
                                const std::vector<SignatureEntry>& signatures);

// ---------------------------------------------------------------------------
// Account state and transitions
// ---------------------------------------------------------------------------

using AccountId = uint64_t;
using Amount = uint64_t;

struct Transaction {
    AccountId from = 0;
    AccountId to = 0;
    Amount amount = 0;

    bool operator==(const Transaction&) const = default;
};

/// Balance sheet. Ordered map so iteration yields the canonical sorted
/// leaf order of the state commitment.
using AccountState = std::map<AccountId, Amount>;

/// Leaf bytes of one (account, balance) pair: 8B BE id, 8B BE balance.
Bytes account_leaf(AccountId id, Amount balance);

/// Applies one transfer. Returns false (state untouched) when the sender
/// balance is insufficient. Zero-amount transfers leave the state unchanged.
bool apply_tx(AccountState& st, const Transaction& tx);

struct ApplyResult {
    bool ok = true;
    size_t failed_index = 0;
};

/// Left fold of apply_tx. On failure stops at the offending transaction and
/// reports its index; the successful prefix remains applied.
ApplyResult apply_all(AccountState& st, const std::vector<Transaction>& txs);

/// Merkle root over the sorted (account, balance) leaves, degree 2.
Digest commit(const AccountState& st);

/// Degree-2 tree over the sorted account leaves (for proof serving).
merkle::MerkleTree state_tree(const AccountState& st);

/// Index of an account in the sorted leaf order, if present.
std::optional<uint64_t> account_rank(const AccountState& st, AccountId id);

/// Inclusion proofs needed to advance a state commitment by one transfer:
/// the sender leaf under the old root and the receiver leaf under the
/// intermediate root obtained after the debit.
struct AuxProof {
    Amount sender_balance = 0;
    merkle::MerkleProof sender_proof;
    Amount receiver_balance = 0;
    merkle::MerkleProof receiver_proof;
};

/// Builds the auxiliary proofs for tx against st. Requires both accounts to
/// exist as leaves (zero balances allowed); returns nullopt otherwise.
std::optional<AuxProof> gen_aux(const AccountState& st, const Transaction& tx);

/// Succinct transition: recomputes the commitment after `tx` from the old
/// commitment plus auxiliary proofs, without the full state. Returns
/// nullopt on any invalid proof or insufficient proven balance.
std::optional<Digest> succinct_apply(const Digest& commitment, const Transaction& tx,
                                     const AuxProof& aux);

// ---------------------------------------------------------------------------
// Execution traces
// ---------------------------------------------------------------------------

struct EpochRecord {
    SyncCommittee committee;
    HandoverProof handover;  // empty signature list at epoch 0
    Digest state_commitment;
    std::vector<SignatureEntry> commitment_signatures;

    bool operator==(const EpochRecord&) const = default;
};

/// A prover's entire knowledge of one simulated execution.
struct ExecutionTrace {
    uint64_t horizon = 0;        // N
    uint32_t committee_size = 0; // m
    std::vector<EpochRecord> epochs;
    bool honest = true;
    std::optional<uint64_t> splice_point;

    // Simulation-side material; not part of the normative trace file.
    AccountState genesis_state;
    std::vector<std::vector<Transaction>> epoch_txs;
    AccountState final_state;

    const SyncCommittee& committee(uint64_t epoch) const { return epochs.at(epoch).committee; }

    /// Leaf bytes of every epoch's committee in order.
    std::vector<Bytes> leaf_encodings() const;
};

struct TraceParams {
    uint64_t horizon = 1;            // N >= 1
    uint32_t committee_size = 8;     // m
    uint32_t signers_per_epoch = 5;  // > m/2, <= m
    uint64_t seed = 0;
    uint32_t accounts = 32;
    uint32_t txs_per_epoch = 4;
    // Rotates which members sign; distinct offsets give per-prover
    // successions over identical committees.
    uint32_t signer_offset = 0;
};

/// Deterministic well-formed trace from a seed. Committee member keys die
/// epoch by epoch through an EpochKeyRegistry as generation advances.
ExecutionTrace gen_trace(const TraceParams& params);

/// Honest prefix up to `at_epoch`, alt suffix from there on, handover at the
/// boundary left as-is (and therefore invalid against the honest prefix).
ExecutionTrace splice(const ExecutionTrace& honest, const ExecutionTrace& alt, uint64_t at_epoch);

/// Prefix of a trace covering `horizon` epochs (final state replayed).
ExecutionTrace truncate(const ExecutionTrace& trace, uint64_t horizon);

/// Two traces sharing committees up to at_epoch-1 whose common previous
/// committee signed both epoch-at_epoch committees; state workloads diverge
/// too, so the claims differ. Both traces pass validate_trace.
std::pair<ExecutionTrace, ExecutionTrace> equivocating_committee_trace(const TraceParams& params,
                                                                       uint64_t at_epoch);

/// Full revalidation: committee sizes, genesis match (when given), every
/// handover proof, every commitment signature set above threshold.
bool validate_trace(const ExecutionTrace& trace,
                    const SyncCommittee* expected_genesis = nullptr,
                    std::string* why = nullptr);

// ---------------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------------

/// Binary trace file: magic "POPS", version 0x01, N (8B BE), m (4B BE),
/// key size (2B BE), then per-epoch records. Commitment layer only; the
/// account-state simulation side is not serialized.
void write_trace(const ExecutionTrace& trace, const std::string& path);
ExecutionTrace read_trace(const std::string& path);

}  // namespace popos::chainsim
