#pragma once

// Fixture helpers shared by the protocol, client and acceptance suites.

#include <memory>
#include <vector>

#include "popos/adversary.hpp"
#include "popos/chainsim.hpp"
#include "popos/clients.hpp"
#include "popos/protocol.hpp"
#include "popos/transport.hpp"

namespace popos::testsupport {

inline chainsim::TraceParams trace_params(uint64_t horizon, uint32_t committee, uint64_t seed) {
    chainsim::TraceParams p;
    p.horizon = horizon;
    p.committee_size = committee;
    p.signers_per_epoch = chainsim::majority_threshold(committee);
    p.seed = seed;
    p.accounts = 12;
    p.txs_per_epoch = 3;
    return p;
}

inline std::shared_ptr<const chainsim::ExecutionTrace> shared_trace(chainsim::ExecutionTrace t) {
    return std::make_shared<const chainsim::ExecutionTrace>(std::move(t));
}

/// In-process prover pool over one meter; channels are simulated links.
struct SimPool {
    transport::Meter meter;
    transport::LinkConfig link;
    std::vector<std::shared_ptr<transport::Endpoint>> endpoints;
    std::vector<std::unique_ptr<transport::SimChannel>> channels;
    std::vector<transport::Channel*> handles;
    std::vector<std::unique_ptr<transport::Transcript>> transcripts;

    transport::SimChannel& add(std::shared_ptr<transport::Endpoint> endpoint,
                               bool record = false) {
        endpoints.push_back(std::move(endpoint));
        transport::Transcript* t = nullptr;
        if (record) {
            transcripts.push_back(std::make_unique<transport::Transcript>());
            t = transcripts.back().get();
        } else {
            transcripts.push_back(nullptr);
        }
        channels.push_back(
            std::make_unique<transport::SimChannel>(*endpoints.back(), link, meter, t));
        handles.push_back(channels.back().get());
        return *channels.back();
    }
};

}  // namespace popos::testsupport
