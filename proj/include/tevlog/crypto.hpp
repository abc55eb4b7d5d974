#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <openssl/evp.h>
#include <openssl/rand.h>

#include "tevlog/bytes.hpp"

namespace tevlog {

/// SHA-256 output. Ordered so it can key std::map.
struct Digest {
    static constexpr std::size_t size = 32;
    std::array<std::uint8_t, size> bytes{};

    friend auto operator<=>(const Digest&, const Digest&) = default;

    ByteView view() const noexcept { return bytes; }
    std::string hex() const { return to_hex(bytes); }

    static Digest from_view(ByteView data) {
        if (data.size() != size) throw Error("digest must be exactly 32 bytes");
        Digest d;
        std::copy(data.begin(), data.end(), d.bytes.begin());
        return d;
    }

    static Digest from_hex(std::string_view hex) { return from_view(tevlog::from_hex(hex)); }
};

struct DigestHash {
    std::size_t operator()(const Digest& d) const noexcept {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof h; ++i) h = (h << 8) | d.bytes[i];
        return h;
    }
};

inline Digest hash(ByteView data) {
    Digest out;
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != Digest::size) {
        throw Error("SHA-256 computation failed");
    }
    return out;
}

inline Digest hash(std::string_view text) {
    return hash(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace detail {

struct PkeyDeleter {
    void operator()(EVP_PKEY* k) const noexcept { EVP_PKEY_free(k); }
};
struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* c) const noexcept { EVP_MD_CTX_free(c); }
};

using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

}  // namespace detail

struct Signature {
    Bytes bytes;
    Bytes signer;

    friend bool operator==(const Signature&, const Signature&) = default;
};

/// Ed25519 key pair. The private half is the 32-byte seed; the OpenSSL key
/// object is shared between copies and never mutated.
class KeyPair {
public:
    static constexpr std::size_t seed_size = 32;
    static constexpr std::size_t public_key_size = 32;

    static KeyPair from_seed(ByteView seed) {
        if (seed.size() != seed_size) throw Error("Ed25519 private key must be 32 bytes");
        EVP_PKEY* raw = EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size());
        if (raw == nullptr) throw Error("malformed Ed25519 private key");
        KeyPair kp;
        kp.pkey_ = std::shared_ptr<EVP_PKEY>(raw, detail::PkeyDeleter{});
        kp.private_key_.assign(seed.begin(), seed.end());
        kp.public_key_.resize(public_key_size);
        std::size_t len = public_key_size;
        if (EVP_PKEY_get_raw_public_key(raw, kp.public_key_.data(), &len) != 1 || len != public_key_size) {
            throw Error("could not derive Ed25519 public key");
        }
        return kp;
    }

    static KeyPair generate() {
        Bytes seed(seed_size);
        if (RAND_bytes(seed.data(), static_cast<int>(seed.size())) != 1) throw Error("RNG failure");
        return from_seed(seed);
    }

    /// Deterministic key for fixtures and simulations.
    static KeyPair from_label(std::string_view label) { return from_seed(hash(label).bytes); }

    const Bytes& public_key() const noexcept { return public_key_; }
    const Bytes& private_key() const noexcept { return private_key_; }
    EVP_PKEY* native() const noexcept { return pkey_.get(); }

private:
    KeyPair() = default;

    std::shared_ptr<EVP_PKEY> pkey_;
    Bytes public_key_;
    Bytes private_key_;
};

inline Signature sign(const KeyPair& key, ByteView message) {
    if (key.native() == nullptr) throw Error("malformed key pair");
    detail::MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.native()) != 1) {
        throw Error("signing context initialisation failed");
    }
    std::size_t len = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &len, message.data(), message.size()) != 1) {
        throw Error("signing failed");
    }
    Signature sig;
    sig.bytes.resize(len);
    if (EVP_DigestSign(ctx.get(), sig.bytes.data(), &len, message.data(), message.size()) != 1) {
        throw Error("signing failed");
    }
    sig.bytes.resize(len);
    sig.signer = key.public_key();
    return sig;
}

/// Never throws: adversarial or malformed inputs simply fail verification.
inline bool verify_signature(const Signature& sig, ByteView public_key, ByteView message) noexcept {
    if (public_key.size() != KeyPair::public_key_size || sig.bytes.size() != 64) return false;
    if (!std::equal(sig.signer.begin(), sig.signer.end(), public_key.begin(), public_key.end())) return false;
    detail::PkeyPtr pkey(
        EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.data(), public_key.size()));
    if (!pkey) return false;
    detail::MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1) return false;
    return EVP_DigestVerify(ctx.get(), sig.bytes.data(), sig.bytes.size(), message.data(), message.size()) == 1;
}

}  // namespace tevlog
