#include "popos/adversary.hpp"

#include "popos/merkle.hpp"

namespace popos::adversary {

std::shared_ptr<transport::Endpoint> silent_after(std::shared_ptr<transport::Endpoint> inner,
                                                  uint64_t responses) {
    auto counter = std::make_shared<std::atomic<uint64_t>>(0);
    return std::make_shared<FaultEndpoint>(
        std::move(inner),
        [counter, responses](const wire::Message&, std::optional<wire::Message> response)
            -> std::optional<wire::Message> {
            if (counter->fetch_add(1) >= responses) return std::nullopt;
            return response;
        });
}

std::shared_ptr<transport::Endpoint> malformed_children_at(
    std::shared_ptr<transport::Endpoint> inner, size_t depth) {
    return std::make_shared<FaultEndpoint>(
        std::move(inner),
        [depth](const wire::Message& request,
                std::optional<wire::Message> response) -> std::optional<wire::Message> {
            const auto* open = std::get_if<wire::Open>(&request);
            if (!open || open->path.size() != depth || !response) return response;
            if (auto* children = std::get_if<wire::Children>(&*response);
                children && !children->digests.empty())
                children->digests[0].bytes[0] ^= 0x01;
            return response;
        });
}

std::shared_ptr<transport::Endpoint> extra_descent(std::shared_ptr<transport::Endpoint> inner) {
    return std::make_shared<FaultEndpoint>(
        std::move(inner),
        [](const wire::Message& request,
           std::optional<wire::Message> response) -> std::optional<wire::Message> {
            const auto* leaf = std::get_if<wire::LeafRequest>(&request);
            if (!leaf || leaf->kind != wire::LeafQuery::Committee) return response;
            return wire::Children{
                std::vector<crypto::Digest>(leaf->degree, merkle::sentinel_leaf())};
        });
}

}  // namespace popos::adversary
