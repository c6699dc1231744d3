#include <algorithm>

#include "stegolock/cipher.hpp"

namespace stegolock::cipher {

namespace {

// CBC-MAC over be64(counter) || be32(len) || payload, zero padded to a block multiple.
std::array<std::uint8_t, kSignatureSize> cbc_mac(const SecretKey128& key, std::uint64_t counter,
                                                 ByteView payload) {
    Bytes msg(12 + payload.size());
    store_be64(msg.data(), counter);
    store_be32(msg.data() + 8, static_cast<std::uint32_t>(payload.size()));
    std::copy(payload.begin(), payload.end(), msg.begin() + 12);
    msg.resize((msg.size() + kBlockSize - 1) / kBlockSize * kBlockSize, 0);

    const Aes128 aes(key);
    Block x{};
    for (std::size_t off = 0; off < msg.size(); off += kBlockSize) {
        for (std::size_t i = 0; i < kBlockSize; ++i) x[i] ^= msg[off + i];
        x = aes.encrypt(x);
    }
    std::array<std::uint8_t, kSignatureSize> sig{};
    std::copy_n(x.begin(), kSignatureSize, sig.begin());
    return sig;
}

}  // namespace

std::string_view to_string(VerifyResult r) {
    switch (r) {
        case VerifyResult::Accept: return "accept";
        case VerifyResult::Forgery: return "forgery";
        case VerifyResult::Replay: return "replay";
    }
    return "unknown";
}

SignedMessage sign_counter(const SecretKey128& key, std::uint64_t counter, ByteView payload) {
    SignedMessage msg;
    msg.counter = counter;
    msg.payload.assign(payload.begin(), payload.end());
    msg.signature = cbc_mac(key, counter, payload);
    return msg;
}

VerifyResult verify_counter(const SecretKey128& key, const SignedMessage& msg,
                            std::uint64_t last_seen_counter) {
    const auto expected = cbc_mac(key, msg.counter, msg.payload);
    if (!constant_time_equal(expected, msg.signature)) return VerifyResult::Forgery;
    if (msg.counter <= last_seen_counter) return VerifyResult::Replay;
    return VerifyResult::Accept;
}

}  // namespace stegolock::cipher
