#pragma once

#include <atomic>
#include <functional>
#include <memory>

#include "popos/transport.hpp"

namespace popos::adversary {

/// Endpoint wrapper whose mutator may rewrite or swallow responses.
class FaultEndpoint : public transport::Endpoint {
public:
    using Mutator = std::function<std::optional<wire::Message>(const wire::Message& request,
                                                               std::optional<wire::Message>)>;

    FaultEndpoint(std::shared_ptr<transport::Endpoint> inner, Mutator mutator)
        : inner_(std::move(inner)), mutator_(std::move(mutator)) {}

    std::optional<wire::Message> handle(const wire::Message& request) override {
        return mutator_(request, inner_->handle(request));
    }

private:
    std::shared_ptr<transport::Endpoint> inner_;
    Mutator mutator_;
};

/// Stops answering after `responses` handled requests.
std::shared_ptr<transport::Endpoint> silent_after(std::shared_ptr<transport::Endpoint> inner,
                                                  uint64_t responses);

/// Corrupts the first digest of the Children response at the given
/// descent depth (path length).
std::shared_ptr<transport::Endpoint> malformed_children_at(
    std::shared_ptr<transport::Endpoint> inner, size_t depth);

/// Answers leaf-phase committee requests with another Children message,
/// trying to stretch the game past the verifier's step budget.
std::shared_ptr<transport::Endpoint> extra_descent(std::shared_ptr<transport::Endpoint> inner);

}  // namespace popos::adversary
