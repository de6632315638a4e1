#include "popos/clients.hpp"

#include <algorithm>
#include <sstream>

namespace popos::clients {

namespace {

using chainsim::SyncCommittee;
using crypto::Digest;
using transport::Channel;
using transport::Meter;

Bytes commitment_message(const Digest& st) {
    return Bytes(st.bytes.begin(), st.bytes.end());
}

Digest committee_hash(const SyncCommittee& committee) {
    return merkle::leaf_digest(chainsim::leaf_encoding(committee));
}

struct RunScope {
    Meter& meter;
    uint64_t bytes_down0, bytes_up0, requests0, clock0, verifies0;

    explicit RunScope(Meter& m)
        : meter(m),
          bytes_down0(m.bytes_down),
          bytes_up0(m.bytes_up),
          requests0(m.requests),
          clock0(m.clock_us),
          verifies0(crypto::verify_call_count()) {}

    void fill(SyncReport& report) const {
        report.bytes_down = meter.bytes_down - bytes_down0;
        report.bytes_up = meter.bytes_up - bytes_up0;
        report.interaction_rounds = meter.requests - requests0;
        report.elapsed_us = meter.clock_us - clock0;
        report.signature_verifications = crypto::verify_call_count() - verifies0;
    }
};

std::optional<wire::Claim> fetch_claim(Channel& ch, uint32_t degree) {
    auto resp = ch.request(wire::ClaimRequest{degree});
    if (!resp) return std::nullopt;
    auto* m = std::get_if<wire::ClaimResponse>(&*resp);
    if (!m) return std::nullopt;
    return std::move(m->claim);
}

}  // namespace

const char* flavor_name(Flavor flavor) {
    switch (flavor) {
        case Flavor::TLC: return "tlc";
        case Flavor::OLC: return "olc";
        case Flavor::SLC: return "slc";
    }
    return "?";
}

std::string SyncReport::csv_header() {
    return "flavor,N,m,param,bytes_down,bytes_up,rounds,sig_verifs,elapsed_ms,result_hex";
}

std::string SyncReport::csv_row() const {
    const uint64_t param =
        config.flavor == Flavor::SLC ? config.degree : config.batch;
    std::ostringstream os;
    os << flavor_name(config.flavor) << ',' << config.horizon << ',' << config.committee_size
       << ',' << param << ',' << bytes_down << ',' << bytes_up << ',' << interaction_rounds << ','
       << signature_verifications << ',' << elapsed_us / 1000 << ','
       << (commitment ? commitment->hex() : std::string("-"));
    return os.str();
}

// ---------------------------------------------------------------------------
// TLC
// ---------------------------------------------------------------------------

SyncReport tlc_sync(const ClientConfig& cfg, const std::vector<Channel*>& provers, Meter& meter) {
    SyncReport report;
    report.config = cfg;
    RunScope scope(meter);
    const uint32_t m = cfg.committee_size;
    const uint32_t threshold = chainsim::majority_threshold(m);
    const uint32_t batch = std::max<uint32_t>(1, cfg.batch);

    for (Channel* ch : provers) {
        std::string fail;
        SyncCommittee latest = cfg.genesis;

        for (uint64_t next = 1; next < cfg.horizon && fail.empty();) {
            const uint32_t want =
                static_cast<uint32_t>(std::min<uint64_t>(batch, cfg.horizon - next));
            auto resp = ch->request(wire::CommitteeBatchRequest{next, want});
            auto* entries = resp ? std::get_if<wire::CommitteeBatchResponse>(&*resp) : nullptr;
            if (!entries || entries->entries.size() != want) {
                fail = "committee batch missing";
                break;
            }
            for (const auto& entry : entries->entries) {
                if (entry.committee.epoch != next || entry.committee.members.size() != m) {
                    fail = "committee malformed";
                    break;
                }
                if (!chainsim::verify_handover(latest, next, entry.committee, entry.handover)) {
                    fail = "handover invalid";
                    if (!report.first_failure_epoch) report.first_failure_epoch = next;
                    break;
                }
                latest = entry.committee;
                ++next;
            }
        }
        if (!fail.empty()) continue;

        const auto claim = fetch_claim(*ch, 2);
        if (!claim) continue;
        if (!(claim->latest_committee.members == latest.members)) continue;
        if (chainsim::count_valid_signatures(latest,
                                             commitment_message(claim->state_commitment),
                                             claim->commitment_signatures) < threshold)
            continue;

        report.ok = true;
        report.commitment = claim->state_commitment;
        break;
    }
    if (!report.ok) report.error = "all provers exhausted";
    scope.fill(report);
    return report;
}

// ---------------------------------------------------------------------------
// OLC
// ---------------------------------------------------------------------------

namespace {

struct OlcProver {
    size_t index;  // into the channel list
    Channel* channel;
    wire::Claim claim;
    std::vector<Digest> hashes;  // fetched prefix of the leaf-digest list
    bool alive = true;
};

/// Extends a prover's hash list to `upto` entries; eliminates on bad data.
/// Fetch traffic is accounted into scan_bytes.
bool olc_ensure(OlcProver& p, uint64_t upto, uint32_t batch, uint64_t horizon, Meter& meter,
                uint64_t& scan_bytes) {
    upto = std::min(upto, horizon);
    while (p.alive && p.hashes.size() < upto) {
        const uint64_t from = p.hashes.size();
        const uint32_t want = static_cast<uint32_t>(std::min<uint64_t>(batch, horizon - from));
        const uint64_t down0 = meter.bytes_down;
        const uint64_t up0 = meter.bytes_up;
        auto resp = p.channel->request(wire::HashBatchRequest{from, want});
        scan_bytes += meter.bytes_down - down0 + meter.bytes_up - up0;
        auto* hashes = resp ? std::get_if<wire::HashBatchResponse>(&*resp) : nullptr;
        if (!hashes || hashes->digests.empty() || hashes->digests.size() > want) {
            p.alive = false;
            return false;
        }
        p.hashes.insert(p.hashes.end(), hashes->digests.begin(), hashes->digests.end());
    }
    return p.alive;
}

/// First index where the two fetched lists differ, scanning batchwise.
std::optional<uint64_t> olc_scan(OlcProver& a, OlcProver& b, uint32_t batch, uint64_t horizon,
                                 Meter& meter, uint64_t& scan_bytes) {
    uint64_t k = 0;
    while (k < horizon) {
        const uint64_t upto = std::min<uint64_t>(horizon, k + batch);
        if (!olc_ensure(a, upto, batch, horizon, meter, scan_bytes)) return std::nullopt;
        if (!olc_ensure(b, upto, batch, horizon, meter, scan_bytes)) return std::nullopt;
        for (; k < upto; ++k)
            if (!(a.hashes[k] == b.hashes[k])) return k;
    }
    return std::nullopt;
}

/// Reveal-and-handover resolution at disagreement index j. Returns false for
/// a prover that failed a check.
std::pair<bool, bool> olc_resolve(OlcProver& a, OlcProver& b, uint64_t j, const ClientConfig& cfg) {
    auto reveal = [&](OlcProver& p) -> bool {
        const uint32_t m = cfg.committee_size;
        if (j == 0) {
            auto resp = p.channel->request(wire::CommitteeBatchRequest{0, 1});
            auto* batch = resp ? std::get_if<wire::CommitteeBatchResponse>(&*resp) : nullptr;
            if (!batch || batch->entries.size() != 1) return false;
            const auto& c = batch->entries[0].committee;
            if (c.epoch != 0 || c.members.size() != m) return false;
            if (!(committee_hash(c) == p.hashes[0])) return false;
            return c.members == cfg.genesis.members;
        }
        auto resp = p.channel->request(wire::CommitteeBatchRequest{j - 1, 2});
        auto* batch = resp ? std::get_if<wire::CommitteeBatchResponse>(&*resp) : nullptr;
        if (!batch || batch->entries.size() != 2) return false;
        const auto& prev = batch->entries[0].committee;
        const auto& cur = batch->entries[1].committee;
        if (prev.epoch != j - 1 || prev.members.size() != m) return false;
        if (cur.epoch != j || cur.members.size() != m) return false;
        // The previous hash is in the agreed prefix; the current one must
        // match this prover's own claimed list.
        if (!(committee_hash(prev) == a.hashes[j - 1])) return false;
        if (!(committee_hash(cur) == p.hashes[j])) return false;
        return chainsim::verify_handover(prev, j, cur, batch->entries[1].handover);
    };
    const bool ok_a = reveal(a);
    const bool ok_b = reveal(b);
    if (ok_a && ok_b) return {false, false};  // equivocating committee: both fall
    return {ok_a, ok_b};
}

}  // namespace

SyncReport olc_sync(const ClientConfig& cfg, const std::vector<Channel*>& provers, Meter& meter) {
    SyncReport report;
    report.config = cfg;
    RunScope scope(meter);
    const uint32_t threshold = chainsim::majority_threshold(cfg.committee_size);
    const uint32_t batch = std::max<uint32_t>(1, cfg.batch);
    uint64_t scan_bytes = 0;

    std::vector<OlcProver> pool;
    for (size_t i = 0; i < provers.size(); ++i) {
        auto claim = fetch_claim(*provers[i], 2);
        if (!claim) continue;
        if (claim->latest_committee.epoch != cfg.horizon - 1 ||
            claim->latest_committee.members.size() != cfg.committee_size)
            continue;
        if (chainsim::count_valid_signatures(claim->latest_committee,
                                             commitment_message(claim->state_commitment),
                                             claim->commitment_signatures) < threshold)
            continue;
        pool.push_back({i, provers[i], std::move(*claim), {}, true});
    }

    auto alive_count = [&pool] {
        return std::count_if(pool.begin(), pool.end(), [](const auto& p) { return p.alive; });
    };

    bool done = false;
    while (!done && alive_count() > 0) {
        OlcProver* front = nullptr;
        for (auto& p : pool)
            if (p.alive) {
                front = &p;
                break;
            }
        // The front-runner's full list is needed for the final binding check.
        if (!olc_ensure(*front, cfg.horizon, batch, cfg.horizon, meter, scan_bytes)) continue;
        if (!(committee_hash(front->claim.latest_committee) == front->hashes[cfg.horizon - 1])) {
            front->alive = false;
            continue;
        }

        bool restarted = false;
        for (auto& other : pool) {
            if (!other.alive || &other == front) continue;
            const auto j = olc_scan(*front, other, batch, cfg.horizon, meter, scan_bytes);
            if (!other.alive) continue;
            if (!j) {
                if (!(other.claim.state_commitment == front->claim.state_commitment)) {
                    // Same committee lists, conflicting signed commitments.
                    front->alive = false;
                    other.alive = false;
                    restarted = true;
                    break;
                }
                continue;
            }
            if (!report.first_failure_epoch) report.first_failure_epoch = *j;
            const auto [front_ok, other_ok] = olc_resolve(*front, other, *j, cfg);
            if (!other_ok) other.alive = false;
            if (!front_ok) {
                front->alive = false;
                restarted = true;
                break;
            }
        }
        if (restarted) continue;

        report.ok = true;
        report.commitment = front->claim.state_commitment;
        done = true;
    }

    if (!report.ok) report.error = "all claims mutually eliminated";
    scope.fill(report);
    report.fixed_bytes_down = report.bytes_down - std::min(report.bytes_down, scan_bytes);
    return report;
}

// ---------------------------------------------------------------------------
// SLC
// ---------------------------------------------------------------------------

SyncReport slc_sync(const ClientConfig& cfg, const std::vector<Channel*>& provers, Meter& meter) {
    SyncReport report;
    report.config = cfg;
    RunScope scope(meter);

    protocol::VerifierContext ctx;
    ctx.horizon = cfg.horizon;
    ctx.committee_size = cfg.committee_size;
    ctx.genesis = cfg.genesis;
    ctx.degree = cfg.degree;

    const uint64_t down0 = meter.bytes_down;
    const auto claims = protocol::collect_claims(ctx, provers);
    report.fixed_bytes_down = meter.bytes_down - down0;

    const auto result = protocol::tournament_on(ctx, provers, claims);
    report.games_played = result.games_played;
    if (result.commitment) {
        report.ok = true;
        report.commitment = result.commitment;
    } else {
        report.error = "no prover survived the tournament";
    }
    scope.fill(report);
    return report;
}

SyncReport run_client(const ClientConfig& cfg, const std::vector<Channel*>& provers,
                      Meter& meter) {
    switch (cfg.flavor) {
        case Flavor::TLC: return tlc_sync(cfg, provers, meter);
        case Flavor::OLC: return olc_sync(cfg, provers, meter);
        case Flavor::SLC: return slc_sync(cfg, provers, meter);
    }
    SyncReport report;
    report.error = "unknown flavor";
    return report;
}

// ---------------------------------------------------------------------------
// Balance queries
// ---------------------------------------------------------------------------

namespace {

bool entry_valid(const wire::BalanceEntry& entry, const Digest& commitment, uint64_t state_size) {
    if (entry.proof.size != state_size) return false;
    return merkle::verify_proof(entry.proof, commitment, state_size, entry.proof.index,
                                chainsim::account_leaf(entry.account, entry.balance));
}

}  // namespace

BalanceResult query_balance(const Digest& commitment, chainsim::AccountId account,
                            Channel& prover) {
    BalanceResult out;
    auto resp = prover.request(wire::BalanceRequest{account});
    auto* m = resp ? std::get_if<wire::BalanceResponse>(&*resp) : nullptr;
    if (!m) {
        out.error = "no balance response";
        return out;
    }
    if (m->status == wire::BalanceStatus::Unsupported) {
        out.error = "prover does not serve state queries";
        return out;
    }

    if (m->status == wire::BalanceStatus::Present) {
        if (m->entries.size() != 1 || m->entries[0].account != account ||
            !entry_valid(m->entries[0], commitment, m->state_size)) {
            out.error = "inclusion proof rejected";
            return out;
        }
        out.ok = true;
        out.present = true;
        out.balance = m->entries[0].balance;
        return out;
    }

    // Absence: the sorted neighbors pin the gap where the account would be.
    if (m->state_size == 0) {
        if (commitment == chainsim::commit({})) {
            out.ok = true;
            return out;
        }
        out.error = "empty-state claim rejected";
        return out;
    }
    for (const auto& entry : m->entries) {
        if (entry.account == account || !entry_valid(entry, commitment, m->state_size)) {
            out.error = "absence proof rejected";
            return out;
        }
    }
    if (m->entries.size() == 2) {
        const auto& lo = m->entries[0];
        const auto& hi = m->entries[1];
        if (lo.proof.index + 1 == hi.proof.index && lo.account < account &&
            account < hi.account) {
            out.ok = true;
            return out;
        }
        out.error = "absence proof rejected";
        return out;
    }
    if (m->entries.size() == 1) {
        const auto& e = m->entries[0];
        if (e.proof.index == 0 && e.account > account) {
            out.ok = true;  // below the first account
            return out;
        }
        if (e.proof.index == m->state_size - 1 && e.account < account) {
            // Above the last account; if the tree is not full the next slot
            // must be provably a padding slot.
            uint64_t capacity = 1;
            for (size_t i = 0; i < e.proof.levels.size(); ++i) capacity *= e.proof.degree;
            if (m->state_size == capacity) {
                out.ok = true;
                return out;
            }
            const auto& sp = m->sentinel_proof;
            if (sp && sp->degree == e.proof.degree && sp->size == m->state_size &&
                sp->levels.size() == e.proof.levels.size() && sp->index == m->state_size &&
                merkle::recompute_chain(*sp, merkle::sentinel_leaf()).back() == commitment) {
                out.ok = true;
                return out;
            }
        }
        out.error = "absence proof rejected";
        return out;
    }
    out.error = "absence proof rejected";
    return out;
}

}  // namespace popos::clients
