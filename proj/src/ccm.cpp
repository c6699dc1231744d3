#include <algorithm>
#include <limits>

#include "stegolock/cipher.hpp"
#include "stegolock/errors.hpp"

namespace stegolock::cipher {

namespace detail {

namespace {

void xor_into(Block& x, const std::uint8_t* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] ^= data[i];
}

void cbc_absorb(const Aes128& aes, Block& x, ByteView data) {
    for (std::size_t off = 0; off < data.size(); off += kBlockSize) {
        xor_into(x, data.data() + off, std::min(kBlockSize, data.size() - off));
        x = aes.encrypt(x);
    }
}

std::size_t length_field_size(ByteView nonce) {
    if (nonce.size() < 7 || nonce.size() > 13) throw InvalidInput("CCM nonce must be 7..13 octets");
    return 15 - nonce.size();
}

}  // namespace

Bytes ccm_tag(const Aes128& aes, ByteView nonce, ByteView aad, ByteView plaintext,
              std::size_t mic_len) {
    if (mic_len < 4 || mic_len > 16 || mic_len % 2 != 0) throw InvalidInput("invalid CCM MIC length");
    const std::size_t L = length_field_size(nonce);
    if (L < 8 && plaintext.size() >> (8 * L) != 0) throw CapacityError("message too long for CCM L");

    Block b0{};
    b0[0] = static_cast<std::uint8_t>((aad.empty() ? 0 : 0x40) | (((mic_len - 2) / 2) << 3) | (L - 1));
    std::copy(nonce.begin(), nonce.end(), b0.begin() + 1);
    std::uint64_t len = plaintext.size();
    for (std::size_t i = 0; i < L; ++i) {
        b0[15 - i] = static_cast<std::uint8_t>(len);
        len >>= 8;
    }
    Block x = aes.encrypt(b0);

    if (!aad.empty()) {
        if (aad.size() >= 0xff00) throw InvalidInput("associated data too long");
        Bytes encoded(2 + aad.size());
        store_be16(encoded.data(), static_cast<std::uint16_t>(aad.size()));
        std::copy(aad.begin(), aad.end(), encoded.begin() + 2);
        cbc_absorb(aes, x, encoded);
    }
    cbc_absorb(aes, x, plaintext);
    return Bytes(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mic_len));
}

Bytes ccm_ctr(const Aes128& aes, ByteView nonce, ByteView data, std::uint32_t first_counter) {
    const std::size_t L = length_field_size(nonce);
    Block a{};
    a[0] = static_cast<std::uint8_t>(L - 1);
    std::copy(nonce.begin(), nonce.end(), a.begin() + 1);
    Bytes out(data.begin(), data.end());
    std::uint64_t ctr = first_counter;
    for (std::size_t off = 0; off < out.size(); off += kBlockSize, ++ctr) {
        std::uint64_t c = ctr;
        for (std::size_t i = 0; i < L; ++i) {
            a[15 - i] = static_cast<std::uint8_t>(c);
            c >>= 8;
        }
        const Block s = aes.encrypt(a);
        const std::size_t n = std::min(kBlockSize, out.size() - off);
        for (std::size_t i = 0; i < n; ++i) out[off + i] ^= s[i];
    }
    return out;
}

Bytes ccm_encrypt(const Aes128& aes, ByteView nonce, ByteView aad, ByteView plaintext,
                  std::size_t mic_len) {
    Bytes out = ccm_ctr(aes, nonce, plaintext, 1);
    const Bytes tag = ccm_tag(aes, nonce, aad, plaintext, mic_len);
    const Bytes enc_tag = ccm_ctr(aes, nonce, tag, 0);
    out.insert(out.end(), enc_tag.begin(), enc_tag.end());
    return out;
}

std::array<std::uint8_t, 13> counter_nonce(std::uint64_t counter) {
    std::array<std::uint8_t, 13> nonce{};
    store_be64(nonce.data() + 5, counter);
    return nonce;
}

}  // namespace detail

Bytes serialize(const CipherEnvelope& env) {
    if (env.ciphertext.empty() || env.ciphertext.size() > kMaxPlaintext)
        throw MalformedEnvelope("envelope ciphertext length out of range");
    Bytes out(kEnvelopeWireOverhead + env.ciphertext.size());
    store_be64(out.data(), env.counter);
    store_be16(out.data() + 8, static_cast<std::uint16_t>(env.ciphertext.size()));
    std::copy(env.ciphertext.begin(), env.ciphertext.end(), out.begin() + 10);
    std::copy(env.mic.begin(), env.mic.end(), out.end() - kMicSize);
    return out;
}

CipherEnvelope deserialize_envelope(ByteView wire) {
    if (wire.size() < kEnvelopeWireOverhead) throw MalformedEnvelope("envelope truncated");
    const std::size_t len = load_be16(wire.data() + 8);
    if (len == 0) throw MalformedEnvelope("envelope declares empty ciphertext");
    if (wire.size() != kEnvelopeWireOverhead + len)
        throw MalformedEnvelope("envelope length field " + std::to_string(len) +
                                " does not match " + std::to_string(wire.size()) + " octets");
    CipherEnvelope env;
    env.counter = load_be64(wire.data());
    env.ciphertext.assign(wire.begin() + 10, wire.begin() + 10 + static_cast<std::ptrdiff_t>(len));
    std::copy(wire.end() - kMicSize, wire.end(), env.mic.begin());
    return env;
}

CipherEnvelope ccm_seal(const SecretKey128& key, std::uint64_t counter, ByteView plaintext) {
    if (plaintext.empty()) throw CapacityError("CCM plaintext must be non-empty");
    if (plaintext.size() > kMaxPlaintext)
        throw CapacityError("CCM plaintext of " + std::to_string(plaintext.size()) +
                            " octets exceeds 65535");
    const Aes128 aes(key);
    const auto nonce = detail::counter_nonce(counter);
    const Bytes sealed = detail::ccm_encrypt(aes, nonce, {}, plaintext, kMicSize);

    CipherEnvelope env;
    env.counter = counter;
    env.ciphertext.assign(sealed.begin(), sealed.end() - kMicSize);
    std::copy(sealed.end() - kMicSize, sealed.end(), env.mic.begin());
    return env;
}

Bytes ccm_open(const SecretKey128& key, const CipherEnvelope& env) {
    if (env.ciphertext.empty() || env.ciphertext.size() > kMaxPlaintext)
        throw MalformedEnvelope("envelope ciphertext length out of range");
    const Aes128 aes(key);
    const auto nonce = detail::counter_nonce(env.counter);
    Bytes plaintext = detail::ccm_ctr(aes, nonce, env.ciphertext, 1);
    const Bytes expected = detail::ccm_ctr(aes, nonce, detail::ccm_tag(aes, nonce, {}, plaintext, kMicSize), 0);
    if (!constant_time_equal(expected, env.mic)) {
        std::fill(plaintext.begin(), plaintext.end(), 0);
        throw AuthenticationFailure();
    }
    return plaintext;
}

}  // namespace stegolock::cipher
