#pragma once

#include <optional>
#include <string>
#include <vector>

#include "popos/chainsim.hpp"
#include "popos/protocol.hpp"
#include "popos/transport.hpp"

namespace popos::clients {

enum class Flavor {
    TLC,  // naive linear: full committees plus handover proofs
    OLC,  // optimistic: hash scan plus reveal at the first disagreement
    SLC,  // superlight: claims plus bisection tournament
};

const char* flavor_name(Flavor flavor);

struct ClientConfig {
    Flavor flavor = Flavor::SLC;
    uint64_t horizon = 1;         // N, known to the verifier
    uint32_t committee_size = 8;  // m
    chainsim::SyncCommittee genesis;
    uint32_t batch = 200;   // b, TLC/OLC fetch granularity
    uint32_t degree = 100;  // d, SLC tree degree
};

struct SyncReport {
    bool ok = false;
    std::string error;
    std::optional<crypto::Digest> commitment;

    uint64_t bytes_down = 0;
    uint64_t bytes_up = 0;
    uint64_t interaction_rounds = 0;
    uint64_t signature_verifications = 0;
    uint64_t elapsed_us = 0;

    // Prologue traffic (claims; plus reveals for OLC). The remainder of
    // bytes_down is the part that scales with the horizon.
    uint64_t fixed_bytes_down = 0;
    size_t games_played = 0;
    std::optional<uint64_t> first_failure_epoch;

    ClientConfig config;

    static std::string csv_header();
    std::string csv_row() const;
};

/// Downloads committees and handover proofs in batches from one prover,
/// verifying the chain from genesis; fails over to the next prover on any
/// invalid data.
SyncReport tlc_sync(const ClientConfig& cfg, const std::vector<transport::Channel*>& provers,
                    transport::Meter& meter);

/// Fetches per-epoch committee hashes from every claiming prover, resolves
/// conflicts at the first point of disagreement via reveal-and-handover.
SyncReport olc_sync(const ClientConfig& cfg, const std::vector<transport::Channel*>& provers,
                    transport::Meter& meter);

/// Claims plus bisection tournament.
SyncReport slc_sync(const ClientConfig& cfg, const std::vector<transport::Channel*>& provers,
                    transport::Meter& meter);

SyncReport run_client(const ClientConfig& cfg, const std::vector<transport::Channel*>& provers,
                      transport::Meter& meter);

struct BalanceResult {
    bool ok = false;       // response verified against the commitment
    bool present = false;  // account exists as a leaf
    chainsim::Amount balance = 0;
    std::string error;
};

/// Asks one prover for an account balance under an accepted commitment and
/// verifies the inclusion (or sorted-neighbor absence) proofs.
BalanceResult query_balance(const crypto::Digest& commitment, chainsim::AccountId account,
                            transport::Channel& prover);

}  // namespace popos::clients
