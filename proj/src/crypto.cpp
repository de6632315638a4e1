#include "popos/crypto.hpp"

#include <sodium.h>

#include <mutex>
#include <stdexcept>

namespace popos::crypto {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

thread_local uint64_t g_verify_calls = 0;

}  // namespace

Digest hash(const uint8_t* data, size_t size) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data, size);
    return d;
}

Digest hash(const Bytes& data) { return hash(data.data(), data.size()); }

KeyPair keygen(const Seed& seed) {
    ensure_sodium();
    static_assert(kSeedSize == crypto_sign_SEEDBYTES);
    static_assert(kPublicKeySize == crypto_sign_PUBLICKEYBYTES);
    static_assert(kSecretKeySize == crypto_sign_SECRETKEYBYTES);
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pk.bytes.data(), kp.sk.bytes.data(), seed.data());
    return kp;
}

SignatureValue sign(const SecretKey& sk, const uint8_t* msg, size_t size) {
    ensure_sodium();
    SignatureValue sig;
    crypto_sign_detached(sig.bytes.data(), nullptr, msg, size, sk.bytes.data());
    return sig;
}

SignatureValue sign(const SecretKey& sk, const Bytes& msg) {
    return sign(sk, msg.data(), msg.size());
}

bool verify(const PublicKey& pk, const uint8_t* msg, size_t size, const SignatureValue& sig) {
    ensure_sodium();
    ++g_verify_calls;
    return crypto_sign_verify_detached(sig.bytes.data(), msg, size, pk.bytes.data()) == 0;
}

bool verify(const PublicKey& pk, const Bytes& msg, const SignatureValue& sig) {
    return verify(pk, msg.data(), msg.size(), sig);
}

uint64_t verify_call_count() { return g_verify_calls; }

void EpochKeyRegistry::store(uint64_t epoch, uint32_t member, const SecretKey& sk) {
    if (epoch < current_epoch_)
        throw std::invalid_argument("EpochKeyRegistry: cannot store key for destroyed epoch");
    keys_[{epoch, member}] = sk;
}

std::optional<SecretKey> EpochKeyRegistry::fetch(uint64_t epoch, uint32_t member) const {
    auto it = keys_.find({epoch, member});
    if (it == keys_.end()) return std::nullopt;
    return it->second;
}

void EpochKeyRegistry::advance(uint64_t to_epoch) {
    if (to_epoch < current_epoch_)
        throw std::invalid_argument("EpochKeyRegistry: rewind rejected");
    // erase everything strictly below the new epoch
    keys_.erase(keys_.begin(), keys_.lower_bound({to_epoch, 0}));
    current_epoch_ = to_epoch;
}

}  // namespace popos::crypto
