#include "popos/chainsim.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

namespace popos::chainsim {

namespace {

constexpr char kMagic[4] = {'P', 'O', 'P', 'S'};
constexpr uint8_t kVersion = 0x01;
constexpr uint8_t kEmptyStatePrefix = 0x04;

std::string describe(const char* what, uint64_t epoch) {
    return std::string(what) + " at epoch " + std::to_string(epoch);
}

bool fail(std::string* why, std::string reason) {
    if (why) *why = std::move(reason);
    return false;
}

crypto::Seed derive_seed(uint64_t trace_seed, const char* label, uint64_t branch, uint64_t epoch,
                         uint32_t index) {
    Bytes buf;
    put_bytes(buf, reinterpret_cast<const uint8_t*>(label), std::char_traits<char>::length(label));
    put_u64be(buf, trace_seed);
    put_u64be(buf, branch);
    put_u64be(buf, epoch);
    put_u32be(buf, index);
    crypto::Seed seed;
    const Digest d = crypto::hash(buf);
    std::copy(d.bytes.begin(), d.bytes.end(), seed.begin());
    return seed;
}

uint64_t derive_rng_seed(uint64_t trace_seed, const char* label, uint64_t branch) {
    const crypto::Seed s = derive_seed(trace_seed, label, branch, 0, 0);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | s[i];
    return v;
}

std::vector<crypto::KeyPair> derive_committee_keys(uint64_t trace_seed, uint64_t branch,
                                                   uint64_t epoch, uint32_t m) {
    std::vector<crypto::KeyPair> keys;
    keys.reserve(m);
    for (uint32_t i = 0; i < m; ++i)
        keys.push_back(crypto::keygen(derive_seed(trace_seed, "popos.member", branch, epoch, i)));
    return keys;
}

AccountState derive_genesis_state(uint64_t trace_seed, uint32_t accounts) {
    std::mt19937_64 rng(derive_rng_seed(trace_seed, "popos.genesis", 0));
    AccountState st;
    for (uint32_t a = 1; a <= accounts; ++a) st[a] = 500 + rng() % 1000;
    return st;
}

std::vector<Transaction> derive_epoch_txs(std::mt19937_64& rng, const AccountState& st,
                                          uint32_t count) {
    std::vector<Transaction> txs;
    txs.reserve(count);
    if (st.empty()) return txs;
    std::vector<AccountId> ids;
    ids.reserve(st.size());
    for (const auto& [id, bal] : st) ids.push_back(id);
    AccountState work = st;
    for (uint32_t t = 0; t < count; ++t) {
        const AccountId from = ids[rng() % ids.size()];
        const AccountId to = ids[rng() % ids.size()];
        const Amount bal = work[from];
        const Amount amount = bal == 0 ? 0 : rng() % (bal + 1);
        Transaction tx{from, to, amount};
        apply_tx(work, tx);
        txs.push_back(tx);
    }
    return txs;
}

// Signing always goes through the registry so that an advanced-past epoch
// can no longer produce signatures.
std::vector<SignatureEntry> sign_by_epoch(const crypto::EpochKeyRegistry& registry, uint64_t epoch,
                                          uint32_t m, const Bytes& message, uint32_t signers,
                                          uint32_t offset) {
    std::vector<SignatureEntry> out;
    out.reserve(signers);
    for (uint32_t t = 0; t < signers; ++t) {
        const uint32_t idx = (offset + t) % m;
        const auto sk = registry.fetch(epoch, idx);
        if (!sk) throw std::logic_error("sign_by_epoch: signing key already destroyed");
        out.push_back({idx, crypto::sign(*sk, message)});
    }
    std::sort(out.begin(), out.end(),
              [](const SignatureEntry& a, const SignatureEntry& b) { return a.member < b.member; });
    return out;
}

SyncCommittee register_committee(crypto::EpochKeyRegistry& registry, uint64_t epoch,
                                 const std::vector<crypto::KeyPair>& keys) {
    SyncCommittee c;
    c.epoch = epoch;
    c.members.reserve(keys.size());
    for (uint32_t i = 0; i < keys.size(); ++i) {
        registry.store(epoch, i, keys[i].sk);
        c.members.push_back(keys[i].pk);
    }
    return c;
}

void check_params(const TraceParams& p) {
    if (p.horizon < 1) throw std::invalid_argument("gen_trace: horizon must be >= 1");
    if (p.committee_size < 1) throw std::invalid_argument("gen_trace: committee size must be >= 1");
    if (p.signers_per_epoch <= p.committee_size / 2)
        throw std::invalid_argument("gen_trace: signers_per_epoch must exceed m/2");
    if (p.signers_per_epoch > p.committee_size)
        throw std::invalid_argument("gen_trace: signers_per_epoch exceeds committee size");
}

// Committees may switch derivation branch at a given epoch; used by the
// equivocation fixture. branch_at(epoch) must be stable per trace.
template <typename BranchAt>
ExecutionTrace generate(const TraceParams& p, BranchAt branch_at, uint64_t tx_branch) {
    const uint32_t m = p.committee_size;
    ExecutionTrace trace;
    trace.horizon = p.horizon;
    trace.committee_size = m;
    trace.epochs.resize(p.horizon);
    trace.genesis_state = derive_genesis_state(p.seed, p.accounts);
    trace.epoch_txs.resize(p.horizon);

    crypto::EpochKeyRegistry registry;
    trace.epochs[0].committee =
        register_committee(registry, 0, derive_committee_keys(p.seed, branch_at(0), 0, m));

    std::mt19937_64 tx_rng(derive_rng_seed(p.seed, "popos.txs", tx_branch));
    AccountState st = trace.genesis_state;

    for (uint64_t e = 0; e < p.horizon; ++e) {
        EpochRecord& rec = trace.epochs[e];

        if (e > 0) {
            const auto txs = derive_epoch_txs(tx_rng, st, p.txs_per_epoch);
            apply_all(st, txs);
            trace.epoch_txs[e] = txs;
        }
        rec.state_commitment = commit(st);

        const Bytes st_msg(rec.state_commitment.bytes.begin(), rec.state_commitment.bytes.end());
        rec.commitment_signatures =
            sign_by_epoch(registry, e, m, st_msg, p.signers_per_epoch, p.signer_offset);

        if (e + 1 < p.horizon) {
            trace.epochs[e + 1].committee = register_committee(
                registry, e + 1, derive_committee_keys(p.seed, branch_at(e + 1), e + 1, m));
            const Bytes msg = leaf_encoding(trace.epochs[e + 1].committee);
            trace.epochs[e + 1].handover.epoch = e + 1;
            trace.epochs[e + 1].handover.signatures =
                sign_by_epoch(registry, e, m, msg, p.signers_per_epoch, p.signer_offset);
        }
        registry.advance(e + 1);
    }
    trace.final_state = std::move(st);
    return trace;
}

}  // namespace

Bytes leaf_encoding(const SyncCommittee& committee) {
    Bytes buf;
    buf.reserve(8 + committee.members.size() * crypto::kPublicKeySize);
    put_u64be(buf, committee.epoch);
    for (const auto& pk : committee.members) put_bytes(buf, pk.bytes.data(), pk.bytes.size());
    return buf;
}

uint32_t count_valid_signatures(const SyncCommittee& committee, const Bytes& message,
                                const std::vector<SignatureEntry>& signatures) {
    std::set<uint32_t> seen;
    for (const auto& entry : signatures) {
        if (entry.member >= committee.members.size()) continue;
        if (seen.count(entry.member)) continue;
        if (crypto::verify(committee.members[entry.member], message, entry.sig))
            seen.insert(entry.member);
    }
    return static_cast<uint32_t>(seen.size());
}

bool verify_handover(const SyncCommittee& prev, uint64_t epoch, const SyncCommittee& next,
                     const HandoverProof& proof) {
    if (proof.epoch != epoch || next.epoch != epoch) return false;
    SyncCommittee target = next;
    target.epoch = epoch;
    const Bytes message = leaf_encoding(target);
    const uint32_t m = static_cast<uint32_t>(prev.members.size());
    return count_valid_signatures(prev, message, proof.signatures) >= majority_threshold(m);
}

Bytes account_leaf(AccountId id, Amount balance) {
    Bytes buf;
    buf.reserve(16);
    put_u64be(buf, id);
    put_u64be(buf, balance);
    return buf;
}

bool apply_tx(AccountState& st, const Transaction& tx) {
    if (tx.amount == 0) return true;
    auto it = st.find(tx.from);
    if (it == st.end() || it->second < tx.amount) return false;
    it->second -= tx.amount;
    st[tx.to] += tx.amount;
    return true;
}

ApplyResult apply_all(AccountState& st, const std::vector<Transaction>& txs) {
    for (size_t i = 0; i < txs.size(); ++i)
        if (!apply_tx(st, txs[i])) return {false, i};
    return {};
}

merkle::MerkleTree state_tree(const AccountState& st) {
    std::vector<Bytes> leaves;
    leaves.reserve(st.size());
    for (const auto& [id, bal] : st) leaves.push_back(account_leaf(id, bal));
    return merkle::MerkleTree(leaves, 2);
}

Digest commit(const AccountState& st) {
    if (st.empty()) return crypto::hash(Bytes{kEmptyStatePrefix});
    return state_tree(st).root();
}

std::optional<uint64_t> account_rank(const AccountState& st, AccountId id) {
    auto it = st.find(id);
    if (it == st.end()) return std::nullopt;
    return static_cast<uint64_t>(std::distance(st.begin(), it));
}

std::optional<AuxProof> gen_aux(const AccountState& st, const Transaction& tx) {
    AuxProof aux;
    if (tx.amount == 0) return aux;
    const auto from_rank = account_rank(st, tx.from);
    const auto to_rank = account_rank(st, tx.to);
    if (!from_rank || !to_rank) return std::nullopt;

    const merkle::MerkleTree before = state_tree(st);
    aux.sender_balance = st.at(tx.from);
    aux.sender_proof = before.prove(*from_rank);

    AccountState mid = st;
    if (mid[tx.from] >= tx.amount) mid[tx.from] -= tx.amount;
    const merkle::MerkleTree after_debit = state_tree(mid);
    aux.receiver_balance = mid.at(tx.to);
    aux.receiver_proof = after_debit.prove(*to_rank);
    return aux;
}

std::optional<Digest> succinct_apply(const Digest& commitment, const Transaction& tx,
                                     const AuxProof& aux) {
    if (tx.amount == 0) return commitment;

    const Bytes sender_leaf = account_leaf(tx.from, aux.sender_balance);
    if (!merkle::verify_proof(aux.sender_proof, commitment, aux.sender_proof.size,
                              aux.sender_proof.index, sender_leaf))
        return std::nullopt;
    if (aux.sender_balance < tx.amount) return std::nullopt;

    if (tx.to == tx.from) return commitment;  // debit and credit cancel

    const Bytes debited = account_leaf(tx.from, aux.sender_balance - tx.amount);
    const Digest mid =
        merkle::recompute_chain(aux.sender_proof, merkle::leaf_digest(debited)).back();

    const Bytes receiver_leaf = account_leaf(tx.to, aux.receiver_balance);
    if (!merkle::verify_proof(aux.receiver_proof, mid, aux.receiver_proof.size,
                              aux.receiver_proof.index, receiver_leaf))
        return std::nullopt;
    if (aux.receiver_balance + tx.amount < aux.receiver_balance) return std::nullopt;  // overflow

    const Bytes credited = account_leaf(tx.to, aux.receiver_balance + tx.amount);
    return merkle::recompute_chain(aux.receiver_proof, merkle::leaf_digest(credited)).back();
}

std::vector<Bytes> ExecutionTrace::leaf_encodings() const {
    std::vector<Bytes> out;
    out.reserve(epochs.size());
    for (const auto& rec : epochs) out.push_back(leaf_encoding(rec.committee));
    return out;
}

ExecutionTrace gen_trace(const TraceParams& params) {
    check_params(params);
    return generate(params, [](uint64_t) { return uint64_t{0}; }, 0);
}

ExecutionTrace splice(const ExecutionTrace& honest, const ExecutionTrace& alt, uint64_t at_epoch) {
    if (honest.horizon != alt.horizon || honest.committee_size != alt.committee_size)
        throw std::invalid_argument("splice: traces must share horizon and committee size");
    if (at_epoch == 0 || at_epoch >= honest.horizon)
        throw std::invalid_argument("splice: at_epoch out of range");

    ExecutionTrace out;
    out.horizon = honest.horizon;
    out.committee_size = honest.committee_size;
    out.honest = false;
    out.splice_point = at_epoch;
    out.epochs.reserve(out.horizon);
    out.epoch_txs.reserve(out.horizon);
    for (uint64_t e = 0; e < out.horizon; ++e) {
        const ExecutionTrace& src = e < at_epoch ? honest : alt;
        out.epochs.push_back(src.epochs[e]);
        out.epoch_txs.push_back(e < src.epoch_txs.size() ? src.epoch_txs[e]
                                                         : std::vector<Transaction>{});
    }
    out.genesis_state = honest.genesis_state;
    // No consistent full state exists behind a spliced commitment sequence.
    out.final_state.clear();
    return out;
}

ExecutionTrace truncate(const ExecutionTrace& trace, uint64_t horizon) {
    if (horizon < 1 || horizon > trace.horizon)
        throw std::invalid_argument("truncate: horizon out of range");
    ExecutionTrace out;
    out.horizon = horizon;
    out.committee_size = trace.committee_size;
    out.honest = trace.honest;
    out.splice_point = trace.splice_point && *trace.splice_point < horizon
                           ? trace.splice_point
                           : std::nullopt;
    out.epochs.assign(trace.epochs.begin(), trace.epochs.begin() + horizon);
    out.genesis_state = trace.genesis_state;
    if (trace.epoch_txs.size() >= horizon) {
        out.epoch_txs.assign(trace.epoch_txs.begin(), trace.epoch_txs.begin() + horizon);
        AccountState st = out.genesis_state;
        for (const auto& txs : out.epoch_txs) apply_all(st, txs);
        out.final_state = std::move(st);
    } else {
        out.epoch_txs.resize(horizon);
    }
    return out;
}

std::pair<ExecutionTrace, ExecutionTrace> equivocating_committee_trace(const TraceParams& params,
                                                                       uint64_t at_epoch) {
    check_params(params);
    if (at_epoch < 1 || at_epoch >= params.horizon)
        throw std::invalid_argument("equivocating_committee_trace: at_epoch out of range");

    auto branch_a = [at_epoch](uint64_t epoch) { return epoch < at_epoch ? 0 : 1; };
    auto branch_b = [at_epoch](uint64_t epoch) { return epoch < at_epoch ? 0 : 2; };
    ExecutionTrace a = generate(params, branch_a, 1);
    ExecutionTrace b = generate(params, branch_b, 2);
    a.honest = false;
    b.honest = false;
    a.splice_point = at_epoch;
    b.splice_point = at_epoch;
    return {std::move(a), std::move(b)};
}

bool validate_trace(const ExecutionTrace& trace, const SyncCommittee* expected_genesis,
                    std::string* why) {
    if (trace.horizon == 0 || trace.epochs.size() != trace.horizon)
        return fail(why, "horizon/epoch count mismatch");
    const uint32_t m = trace.committee_size;
    const uint32_t threshold = majority_threshold(m);

    for (uint64_t e = 0; e < trace.horizon; ++e) {
        const EpochRecord& rec = trace.epochs[e];
        if (rec.committee.epoch != e) return fail(why, describe("committee epoch mismatch", e));
        if (rec.committee.members.size() != m)
            return fail(why, describe("committee size mismatch", e));
        const Bytes st_msg(rec.state_commitment.bytes.begin(), rec.state_commitment.bytes.end());
        if (count_valid_signatures(rec.committee, st_msg, rec.commitment_signatures) < threshold)
            return fail(why, describe("commitment signatures below threshold", e));
        if (e > 0 && !verify_handover(trace.epochs[e - 1].committee, e, rec.committee,
                                      rec.handover))
            return fail(why, describe("handover invalid", e));
    }
    if (expected_genesis && !(trace.epochs[0].committee == *expected_genesis))
        return fail(why, "genesis committee mismatch");
    return true;
}

void write_trace(const ExecutionTrace& trace, const std::string& path) {
    Bytes buf;
    put_bytes(buf, reinterpret_cast<const uint8_t*>(kMagic), 4);
    put_u8(buf, kVersion);
    put_u64be(buf, trace.horizon);
    put_u32be(buf, trace.committee_size);
    put_u16be(buf, crypto::kPublicKeySize);
    auto put_entries = [&buf](const std::vector<SignatureEntry>& entries) {
        put_u32be(buf, static_cast<uint32_t>(entries.size()));
        for (const auto& entry : entries) {
            put_u32be(buf, entry.member);
            put_bytes(buf, entry.sig.bytes.data(), entry.sig.bytes.size());
        }
    };
    for (const auto& rec : trace.epochs) {
        for (const auto& pk : rec.committee.members)
            put_bytes(buf, pk.bytes.data(), pk.bytes.size());
        put_entries(rec.handover.signatures);
        put_bytes(buf, rec.state_commitment.bytes.data(), rec.state_commitment.bytes.size());
        put_entries(rec.commitment_signatures);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_trace: cannot open " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write_trace: write failed on " + path);
}

ExecutionTrace read_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_trace: cannot open " + path);
    Bytes buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    ByteReader r(buf);
    char magic[4];
    if (!r.read_into(reinterpret_cast<uint8_t*>(magic), 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("read_trace: bad magic");
    if (r.u8() != kVersion) throw std::runtime_error("read_trace: unsupported version");

    ExecutionTrace trace;
    trace.horizon = r.u64be();
    trace.committee_size = r.u32be();
    const uint16_t key_size = r.u16be();
    if (key_size != crypto::kPublicKeySize)
        throw std::runtime_error("read_trace: unsupported key size");
    if (!r.ok()) throw std::runtime_error("read_trace: truncated header");

    auto read_entries = [&r]() {
        std::vector<SignatureEntry> entries(r.u32be());
        for (auto& entry : entries) {
            entry.member = r.u32be();
            r.read_into(entry.sig.bytes.data(), entry.sig.bytes.size());
        }
        return entries;
    };
    trace.epochs.resize(trace.horizon);
    trace.epoch_txs.resize(trace.horizon);
    for (uint64_t e = 0; e < trace.horizon; ++e) {
        EpochRecord& rec = trace.epochs[e];
        rec.committee.epoch = e;
        rec.committee.members.resize(trace.committee_size);
        for (auto& pk : rec.committee.members) r.read_into(pk.bytes.data(), pk.bytes.size());
        rec.handover.epoch = e;
        rec.handover.signatures = read_entries();
        r.read_into(rec.state_commitment.bytes.data(), rec.state_commitment.bytes.size());
        rec.commitment_signatures = read_entries();
        if (!r.ok()) throw std::runtime_error("read_trace: truncated epoch record");
    }
    if (!r.at_end()) throw std::runtime_error("read_trace: trailing bytes");
    return trace;
}

}  // namespace popos::chainsim
