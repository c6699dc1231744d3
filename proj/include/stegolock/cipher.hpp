#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "stegolock/bytes.hpp"

namespace stegolock::cipher {

inline constexpr std::size_t kBlockSize = 16;
inline constexpr std::size_t kMicSize = 4;
inline constexpr std::size_t kSignatureSize = 8;
inline constexpr std::size_t kMaxPlaintext = 65535;
// counter(8) || length(2) || ciphertext || mic(4)
inline constexpr std::size_t kEnvelopeWireOverhead = 8 + 2 + kMicSize;

using Block = std::array<std::uint8_t, kBlockSize>;

class SecretKey128 {
public:
    SecretKey128() = default;
    explicit SecretKey128(const Block& bytes) : bytes_(bytes) {}

    // Throws InvalidInput unless exactly 16 octets.
    static SecretKey128 from_bytes(ByteView bytes);
    static SecretKey128 from_hex(std::string_view hex);
    static SecretKey128 random(std::mt19937_64& rng);

    const Block& bytes() const { return bytes_; }
    std::string hex() const { return to_hex(bytes_); }
    bool is_zero() const;

    friend bool operator==(const SecretKey128&, const SecretKey128&) = default;

private:
    Block bytes_{};
};

/// Expanded AES-128 key schedule. Immutable after construction.
class Aes128 {
public:
    explicit Aes128(const SecretKey128& key);

    Block encrypt(const Block& in) const;
    Block decrypt(const Block& in) const;

private:
    std::array<std::uint8_t, 176> round_keys_{};
};

Block aes128_encrypt_block(const SecretKey128& key, ByteView block);
Block aes128_decrypt_block(const SecretKey128& key, ByteView block);

struct CipherEnvelope {
    std::uint64_t counter = 0;
    Bytes ciphertext;
    std::array<std::uint8_t, kMicSize> mic{};

    friend bool operator==(const CipherEnvelope&, const CipherEnvelope&) = default;
};

Bytes serialize(const CipherEnvelope& env);
// Throws MalformedEnvelope on truncation, trailing bytes or a zero length field.
CipherEnvelope deserialize_envelope(ByteView wire);

/// CCM with M=4, L=2, nonce = 0^5 || be64(counter), no associated data.
/// Throws CapacityError for empty or >65535-octet plaintext.
CipherEnvelope ccm_seal(const SecretKey128& key, std::uint64_t counter, ByteView plaintext);

/// Throws AuthenticationFailure on MIC mismatch, MalformedEnvelope on bad shape.
Bytes ccm_open(const SecretKey128& key, const CipherEnvelope& env);

struct SignedMessage {
    std::uint64_t counter = 0;
    Bytes payload;
    std::array<std::uint8_t, kSignatureSize> signature{};

    friend bool operator==(const SignedMessage&, const SignedMessage&) = default;
};

enum class VerifyResult { Accept, Forgery, Replay };

std::string_view to_string(VerifyResult r);

SignedMessage sign_counter(const SecretKey128& key, std::uint64_t counter, ByteView payload);
VerifyResult verify_counter(const SecretKey128& key, const SignedMessage& msg,
                            std::uint64_t last_seen_counter);

namespace detail {

// General CCM (RFC 3610) used by the fixed-parameter wrappers above.
Bytes ccm_encrypt(const Aes128& aes, ByteView nonce, ByteView aad, ByteView plaintext,
                  std::size_t mic_len);
Bytes ccm_tag(const Aes128& aes, ByteView nonce, ByteView aad, ByteView plaintext,
              std::size_t mic_len);
Bytes ccm_ctr(const Aes128& aes, ByteView nonce, ByteView data, std::uint32_t first_counter);

std::array<std::uint8_t, 13> counter_nonce(std::uint64_t counter);

}  // namespace detail

}  // namespace stegolock::cipher
