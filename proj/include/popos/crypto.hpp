#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "popos/bytes.hpp"

namespace popos::crypto {

inline constexpr size_t kDigestSize = 32;
inline constexpr size_t kPublicKeySize = 32;
inline constexpr size_t kSecretKeySize = 64;
inline constexpr size_t kSignatureSize = 64;
inline constexpr size_t kSeedSize = 32;

/// 32-byte hash output. Equality is byte equality.
struct Digest {
    std::array<uint8_t, kDigestSize> bytes{};

    bool operator==(const Digest&) const = default;
    auto operator<=>(const Digest&) const = default;

    std::string hex() const { return to_hex(bytes.data(), bytes.size()); }
};

struct PublicKey {
    std::array<uint8_t, kPublicKeySize> bytes{};
    bool operator==(const PublicKey&) const = default;
    auto operator<=>(const PublicKey&) const = default;
};

struct SecretKey {
    std::array<uint8_t, kSecretKeySize> bytes{};
    bool operator==(const SecretKey&) const = default;
};

struct SignatureValue {
    std::array<uint8_t, kSignatureSize> bytes{};
    bool operator==(const SignatureValue&) const = default;
};

struct KeyPair {
    PublicKey pk;
    SecretKey sk;
};

using Seed = std::array<uint8_t, kSeedSize>;

/// SHA-256 of the input bytes.
Digest hash(const uint8_t* data, size_t size);
Digest hash(const Bytes& data);

/// Ed25519 keypair derived deterministically from a 32-byte seed.
KeyPair keygen(const Seed& seed);

/// Detached Ed25519 signature over the exact message bytes.
SignatureValue sign(const SecretKey& sk, const uint8_t* msg, size_t size);
SignatureValue sign(const SecretKey& sk, const Bytes& msg);

/// Accepts exactly signatures produced under the matching secret key on the
/// identical message bytes. Malformed input yields reject, never a throw.
bool verify(const PublicKey& pk, const uint8_t* msg, size_t size, const SignatureValue& sig);
bool verify(const PublicKey& pk, const Bytes& msg, const SignatureValue& sig);

/// Number of verify() calls made on this thread since process start.
/// Clients snapshot it around a sync run to report verification counts.
uint64_t verify_call_count();

/// Secret-key store simulating key evolution: advancing past an epoch
/// destroys every secret key of that epoch and earlier, so no later
/// handover signature can be produced with them.
class EpochKeyRegistry {
public:
    void store(uint64_t epoch, uint32_t member, const SecretKey& sk);

    /// nullopt once the key's epoch has been advanced past (or never stored).
    std::optional<SecretKey> fetch(uint64_t epoch, uint32_t member) const;

    /// Destroys all keys with epoch < to_epoch. Throws on rewind.
    void advance(uint64_t to_epoch);

    uint64_t current_epoch() const { return current_epoch_; }
    size_t key_count() const { return keys_.size(); }

private:
    std::map<std::pair<uint64_t, uint32_t>, SecretKey> keys_;
    uint64_t current_epoch_ = 0;
};

}  // namespace popos::crypto
