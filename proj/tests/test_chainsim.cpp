#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "popos/chainsim.hpp"

using namespace popos;
using namespace popos::chainsim;

namespace {

TraceParams small_params(uint64_t horizon = 8, uint64_t seed = 1) {
    TraceParams p;
    p.horizon = horizon;
    p.committee_size = 6;
    p.signers_per_epoch = 4;
    p.seed = seed;
    p.accounts = 12;
    p.txs_per_epoch = 3;
    return p;
}

// Linear scan over committee leaf encodings; the independent pinpointing
// oracle used throughout the protocol tests as well.
std::optional<uint64_t> first_divergence(const ExecutionTrace& a, const ExecutionTrace& b) {
    for (uint64_t e = 0; e < std::min(a.horizon, b.horizon); ++e)
        if (leaf_encoding(a.committee(e)) != leaf_encoding(b.committee(e))) return e;
    return std::nullopt;
}

}  // namespace

TEST_CASE("apply_tx transfers value and conserves supply") {
    AccountState st{{1, 5}, {2, 0}};
    CHECK(apply_tx(st, {1, 2, 5}));
    CHECK(st[1] == 0);
    CHECK(st[2] == 5);

    SUBCASE("zero amount leaves state unchanged") {
        const AccountState before = st;
        CHECK(apply_tx(st, {1, 2, 0}));
        CHECK(st == before);
    }
    SUBCASE("insufficient balance is rejected, state untouched") {
        const AccountState before = st;
        CHECK_FALSE(apply_tx(st, {1, 2, 6}));
        CHECK(st == before);
    }
}

TEST_CASE("apply_all folds and reports the offending index") {
    AccountState st{{1, 10}, {2, 0}};

    SUBCASE("empty sequence is the identity") {
        const AccountState before = st;
        CHECK(apply_all(st, {}).ok);
        CHECK(st == before);
    }
    SUBCASE("composition equals sequential application") {
        AccountState lhs = st;
        AccountState rhs = st;
        const std::vector<Transaction> a{{1, 2, 3}, {2, 1, 1}};
        const std::vector<Transaction> b{{1, 2, 4}};
        std::vector<Transaction> ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        CHECK(apply_all(lhs, ab).ok);
        CHECK(apply_all(rhs, a).ok);
        CHECK(apply_all(rhs, b).ok);
        CHECK(lhs == rhs);
    }
    SUBCASE("failure index is reported") {
        const auto res = apply_all(st, {{1, 2, 3}, {1, 2, 100}, {1, 2, 1}});
        CHECK_FALSE(res.ok);
        CHECK(res.failed_index == 1);
    }
}

TEST_CASE("random workload matches the per-account tally oracle") {
    std::mt19937_64 rng(3);
    AccountState st;
    for (uint64_t a = 1; a <= 10; ++a) st[a] = 100 + rng() % 100;
    const AccountState genesis = st;

    std::map<AccountId, int64_t> delta;
    uint64_t supply = 0;
    for (const auto& [id, bal] : genesis) supply += bal;

    for (int i = 0; i < 100; ++i) {
        const AccountId from = 1 + rng() % 10;
        const AccountId to = 1 + rng() % 10;
        const Amount amount = st[from] == 0 ? 0 : rng() % (st[from] + 1);
        REQUIRE(apply_tx(st, {from, to, amount}));
        delta[from] -= static_cast<int64_t>(amount);
        delta[to] += static_cast<int64_t>(amount);
    }
    uint64_t total = 0;
    for (const auto& [id, bal] : st) {
        CHECK(static_cast<int64_t>(bal) ==
              static_cast<int64_t>(genesis.at(id)) + delta[id]);
        total += bal;
    }
    CHECK(total == supply);
}

TEST_CASE("succinct transition commutes with the full transition") {
    std::mt19937_64 rng(4);
    for (int round = 0; round < 200; ++round) {
        AccountState st;
        const uint32_t accounts = 2 + rng() % 12;
        for (uint64_t a = 1; a <= accounts; ++a) st[a * 3] = rng() % 50;
        const AccountId from = 3 * (1 + rng() % accounts);
        const AccountId to = 3 * (1 + rng() % accounts);
        const Amount amount = rng() % 40;
        const Transaction tx{from, to, amount};

        const auto aux = gen_aux(st, tx);
        REQUIRE(aux.has_value());
        const auto via_commitment = succinct_apply(commit(st), tx, *aux);

        AccountState full = st;
        if (apply_tx(full, tx)) {
            REQUIRE(via_commitment.has_value());
            CHECK(*via_commitment == commit(full));
        } else {
            CHECK_FALSE(via_commitment.has_value());
        }
    }
}

TEST_CASE("succinct transition rejects bad auxiliary data") {
    AccountState st{{1, 10}, {2, 5}, {3, 7}};
    const Transaction tx{1, 2, 4};
    const auto aux = gen_aux(st, tx);
    REQUIRE(aux.has_value());

    SUBCASE("proof for the wrong account fails") {
        auto bad = *aux;
        bad.sender_proof = state_tree(st).prove(2);  // account 3's slot
        CHECK_FALSE(succinct_apply(commit(st), tx, bad).has_value());
    }
    SUBCASE("insufficient proven balance fails") {
        CHECK_FALSE(succinct_apply(commit(st), {1, 2, 11}, *gen_aux(st, {1, 2, 11})).has_value());
    }
    SUBCASE("absent account yields no aux proof") {
        CHECK_FALSE(gen_aux(st, {9, 2, 1}).has_value());
    }
    SUBCASE("aux proofs verify standalone") {
        CHECK(merkle::verify_proof(aux->sender_proof, commit(st), st.size(), 0,
                                   account_leaf(1, 10)));
    }
    SUBCASE("perturbed aux proof fails") {
        auto bad = *aux;
        bad.sender_proof.levels[0][0].bytes[0] ^= 1;
        CHECK_FALSE(succinct_apply(commit(st), tx, bad).has_value());
    }
}

TEST_CASE("gen_trace produces a well-formed deterministic trace") {
    const auto trace = gen_trace(small_params());
    std::string why;
    CHECK(validate_trace(trace, nullptr, &why));
    INFO(why);

    SUBCASE("every handover verifies") {
        for (uint64_t j = 1; j < trace.horizon; ++j)
            CHECK(verify_handover(trace.committee(j - 1), j, trace.committee(j),
                                  trace.epochs[j].handover));
    }
    SUBCASE("same seed gives byte-identical traces") {
        const auto again = gen_trace(small_params());
        CHECK(again.epochs == trace.epochs);
    }
    SUBCASE("horizon 1 has only genesis and an empty succession") {
        const auto tiny = gen_trace(small_params(1));
        CHECK(tiny.epochs.size() == 1);
        CHECK(tiny.epochs[0].handover.signatures.empty());
        CHECK(tiny.epochs[0].state_commitment == commit(tiny.genesis_state));
    }
    SUBCASE("threshold violations are rejected") {
        auto p = small_params();
        p.signers_per_epoch = 3;  // exactly m/2
        CHECK_THROWS_AS(gen_trace(p), std::invalid_argument);
        p.signers_per_epoch = 7;  // above m
        CHECK_THROWS_AS(gen_trace(p), std::invalid_argument);
    }
}

TEST_CASE("verify_handover enforces threshold and uniqueness") {
    const auto trace = gen_trace(small_params());
    const auto& prev = trace.committee(2);
    const auto& next = trace.committee(3);
    auto proof = trace.epochs[3].handover;
    REQUIRE(verify_handover(prev, 3, next, proof));

    SUBCASE("dropping to floor(m/2) signatures fails") {
        proof.signatures.resize(3);  // m=6, floor(m/2)=3
        CHECK_FALSE(verify_handover(prev, 3, next, proof));
    }
    SUBCASE("duplicated signer cannot pad the count") {
        proof.signatures.resize(3);
        proof.signatures.push_back(proof.signatures[0]);
        CHECK_FALSE(verify_handover(prev, 3, next, proof));
    }
    SUBCASE("signature over a different committee fails") {
        CHECK_FALSE(verify_handover(prev, 3, trace.committee(4), proof));
    }
}

TEST_CASE("splice keeps the honest prefix and breaks the boundary handover") {
    const auto honest = gen_trace(small_params(8, 1));
    const auto alt = gen_trace(small_params(8, 2));

    for (uint64_t j = 1; j < 8; ++j) {
        const auto spliced = splice(honest, alt, j);
        CHECK(first_divergence(honest, spliced) == j);
        CHECK_FALSE(verify_handover(honest.committee(j - 1), j, spliced.committee(j),
                                    spliced.epochs[j].handover));
        CHECK_FALSE(validate_trace(spliced));
        CHECK_FALSE(spliced.honest);
    }

    SUBCASE("self-splice is indistinguishable from the honest trace") {
        const auto degenerate = splice(honest, honest, 3);
        CHECK(degenerate.epochs == honest.epochs);
        CHECK_FALSE(first_divergence(honest, degenerate).has_value());
        CHECK(validate_trace(degenerate));
        CHECK_FALSE(degenerate.honest);  // flagged as constructed
    }
    SUBCASE("splice point bounds are enforced") {
        CHECK_THROWS_AS(splice(honest, alt, 0), std::invalid_argument);
        CHECK_THROWS_AS(splice(honest, alt, 8), std::invalid_argument);
    }
}

TEST_CASE("truncate keeps a well-formed prefix and replays state") {
    const auto trace = gen_trace(small_params(12, 5));
    const auto prefix = truncate(trace, 7);
    CHECK(prefix.horizon == 7);
    CHECK(validate_trace(prefix));
    AccountState st = trace.genesis_state;
    for (uint64_t e = 0; e < 7; ++e) apply_all(st, trace.epoch_txs[e]);
    CHECK(prefix.final_state == st);
    CHECK(prefix.epochs.back().state_commitment == commit(st));
}

TEST_CASE("equivocating fixture double-signs the divergence epoch") {
    const auto params = small_params(8, 9);
    const auto [a, b] = equivocating_committee_trace(params, 4);

    CHECK(first_divergence(a, b) == 4);
    CHECK(a.committee(3) == b.committee(3));
    // Both handover proofs at the divergence verify against the shared
    // previous committee.
    CHECK(verify_handover(a.committee(3), 4, a.committee(4), a.epochs[4].handover));
    CHECK(verify_handover(b.committee(3), 4, b.committee(4), b.epochs[4].handover));
    CHECK(a.committee(4) != b.committee(4));
    CHECK(validate_trace(a));
    CHECK(validate_trace(b));
    CHECK(a.epochs.back().state_commitment != b.epochs.back().state_commitment);
}

TEST_CASE("genesis mismatch is caught by revalidation") {
    const auto honest = gen_trace(small_params(4, 1));
    const auto other = gen_trace(small_params(4, 2));
    const auto genesis = honest.committee(0);
    CHECK(validate_trace(honest, &genesis));
    CHECK_FALSE(validate_trace(other, &genesis));
}

TEST_CASE("supply is conserved across the generated workload") {
    const auto trace = gen_trace(small_params(16, 3));
    uint64_t genesis_supply = 0;
    for (const auto& [id, bal] : trace.genesis_state) genesis_supply += bal;
    uint64_t final_supply = 0;
    for (const auto& [id, bal] : trace.final_state) final_supply += bal;
    CHECK(genesis_supply == final_supply);
}

TEST_CASE("trace files round-trip bit-exactly") {
    const auto trace = gen_trace(small_params(6, 7));
    const std::string path = "test_trace_roundtrip.bin";
    write_trace(trace, path);
    const auto loaded = read_trace(path);

    CHECK(loaded.horizon == trace.horizon);
    CHECK(loaded.committee_size == trace.committee_size);
    CHECK(loaded.epochs == trace.epochs);
    CHECK(validate_trace(loaded));

    // Writing the loaded trace again reproduces the same bytes.
    const std::string path2 = "test_trace_roundtrip2.bin";
    write_trace(loaded, path2);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("trace reader rejects malformed files") {
    const std::string path = "test_trace_bad.bin";
    std::ofstream(path, std::ios::binary) << "JUNKJUNKJUNK";
    CHECK_THROWS(read_trace(path));
    std::remove(path.c_str());
}

TEST_CASE("per-prover successions differ by signer subset but share committees") {
    auto p = small_params(6, 11);
    const auto base = gen_trace(p);
    p.signer_offset = 2;
    const auto rotated = gen_trace(p);
    CHECK(first_divergence(base, rotated) == std::nullopt);
    CHECK(base.epochs[3].handover.signatures != rotated.epochs[3].handover.signatures);
    CHECK(validate_trace(rotated));
}
