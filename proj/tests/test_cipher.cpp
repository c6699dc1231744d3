#include <openssl/evp.h>

#include <random>

#include "doctest.h"
#include "stegolock/cipher.hpp"
#include "stegolock/errors.hpp"

using namespace stegolock;
using namespace stegolock::cipher;

namespace {

// Independent oracle: OpenSSL AES-128-ECB on one block.
Block openssl_ecb(const SecretKey128& key, const Block& in) {
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.bytes().data(), nullptr);
    EVP_CIPHER_CTX_set_padding(ctx, 0);
    Block out{};
    int len = 0;
    EVP_EncryptUpdate(ctx, out.data(), &len, in.data(), 16);
    EVP_CIPHER_CTX_free(ctx);
    return out;
}

// Independent oracle: OpenSSL AES-128-CCM, returns ciphertext || tag.
Bytes openssl_ccm(const SecretKey128& key, ByteView nonce, ByteView aad, ByteView pt, int tag_len) {
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    EVP_EncryptInit_ex(ctx, EVP_aes_128_ccm(), nullptr, nullptr, nullptr);
    EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_CCM_SET_IVLEN, static_cast<int>(nonce.size()), nullptr);
    EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_CCM_SET_TAG, tag_len, nullptr);
    EVP_EncryptInit_ex(ctx, nullptr, nullptr, key.bytes().data(), nonce.data());
    int len = 0;
    EVP_EncryptUpdate(ctx, nullptr, &len, nullptr, static_cast<int>(pt.size()));
    if (!aad.empty()) EVP_EncryptUpdate(ctx, nullptr, &len, aad.data(), static_cast<int>(aad.size()));
    Bytes out(pt.size() + static_cast<std::size_t>(tag_len));
    EVP_EncryptUpdate(ctx, out.data(), &len, pt.data(), static_cast<int>(pt.size()));
    EVP_EncryptFinal_ex(ctx, out.data() + len, &len);
    EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_CCM_GET_TAG, tag_len, out.data() + pt.size());
    EVP_CIPHER_CTX_free(ctx);
    return out;
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
}

Block random_block(std::mt19937_64& rng) {
    Block b{};
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
}

}  // namespace

TEST_CASE("AES-128 FIPS-197 known answer") {
    const auto key = SecretKey128::from_hex("000102030405060708090a0b0c0d0e0f");
    const Bytes pt = from_hex("00112233445566778899aabbccddeeff");
    const Block ct = aes128_encrypt_block(key, pt);
    CHECK(to_hex(ct) == "69c4e0d86a7b0430d8cdb78070b4c55a");
    CHECK(to_hex(aes128_decrypt_block(key, ct)) == "00112233445566778899aabbccddeeff");
}

TEST_CASE("AES-128 agrees with OpenSSL on random keys and blocks") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const auto key = SecretKey128::random(rng);
        const Block in = random_block(rng);
        CHECK(aes128_encrypt_block(key, in) == openssl_ecb(key, in));
    }
}

TEST_CASE("AES-128 decrypt/encrypt round trips both ways") {
    std::mt19937_64 rng(11);
    const auto key = SecretKey128::random(rng);
    const Aes128 aes(key);
    for (int i = 0; i < 1000; ++i) {
        const Block x = random_block(rng);
        REQUIRE(aes.decrypt(aes.encrypt(x)) == x);
        REQUIRE(aes.encrypt(aes.decrypt(x)) == x);
    }
    Block a{}, b{};
    b[15] = 1;
    CHECK(aes.encrypt(a) != aes.encrypt(b));
}

TEST_CASE("AES block and key length validation") {
    const SecretKey128 key;
    CHECK_THROWS_AS(aes128_encrypt_block(key, Bytes(15)), InvalidInput);
    CHECK_THROWS_AS(aes128_decrypt_block(key, Bytes(17)), InvalidInput);
    CHECK_THROWS_AS(SecretKey128::from_bytes(Bytes(8)), InvalidInput);
    CHECK_THROWS_AS(SecretKey128::from_hex("zz"), InvalidInput);
}

TEST_CASE("general CCM matches OpenSSL, including RFC 3610 style AAD") {
    const auto key = SecretKey128::from_hex("c0c1c2c3c4c5c6c7c8c9cacbcccdcecf");
    const Bytes nonce = from_hex("00000003020100a0a1a2a3a4a5");
    const Bytes aad = from_hex("0001020304050607");
    const Bytes pt = from_hex("08090a0b0c0d0e0f101112131415161718191a1b1c1d1e");
    const Aes128 aes(key);
    CHECK(detail::ccm_encrypt(aes, nonce, aad, pt, 8) == openssl_ccm(key, nonce, aad, pt, 8));

    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto k = SecretKey128::random(rng);
        const Bytes p = random_bytes(rng, 1 + rng() % 300);
        const auto n = detail::counter_nonce(rng());
        CHECK(detail::ccm_encrypt(Aes128(k), n, {}, p, 4) == openssl_ccm(k, n, {}, p, 4));
    }
}

TEST_CASE("ccm_seal uses the counter nonce with a 4-octet MIC") {
    std::mt19937_64 rng(5);
    const auto key = SecretKey128::random(rng);
    const Bytes pt = random_bytes(rng, 37);
    const auto env = ccm_seal(key, 0x0102030405060708ull, pt);
    const auto nonce = from_hex("00000000000102030405060708");
    const Bytes expected = openssl_ccm(key, nonce, {}, pt, 4);
    Bytes got = env.ciphertext;
    got.insert(got.end(), env.mic.begin(), env.mic.end());
    CHECK(got == expected);
    CHECK(env.ciphertext.size() == pt.size());
}

TEST_CASE("seal/open round trip over lengths 1..4096 and many keys") {
    std::mt19937_64 rng(17);
    for (std::size_t len = 1; len <= 4096; ++len) {
        const auto key = SecretKey128::random(rng);
        const Bytes pt = random_bytes(rng, len);
        const auto env = ccm_seal(key, len, pt);
        REQUIRE(env.ciphertext.size() == len);
        REQUIRE(ccm_open(key, env) == pt);
    }
    for (int i = 0; i < 1000; ++i) {
        const auto key = SecretKey128::random(rng);
        const Bytes pt = random_bytes(rng, 1 + rng() % 64);
        REQUIRE(ccm_open(key, ccm_seal(key, static_cast<std::uint64_t>(i), pt)) == pt);
    }
}

TEST_CASE("ccm_seal preconditions and nonce separation") {
    const auto key = SecretKey128::from_hex("000102030405060708090a0b0c0d0e0f");
    CHECK_THROWS_AS(ccm_seal(key, 1, Bytes{}), CapacityError);
    CHECK_THROWS_AS(ccm_seal(key, 1, Bytes(65536)), CapacityError);
    CHECK_NOTHROW(ccm_seal(key, 1, Bytes(65535)));
    const Bytes pt(32, 0x42);
    CHECK(ccm_seal(key, 9, pt).ciphertext != ccm_seal(key, 10, pt).ciphertext);
    CHECK(ccm_seal(key, 9, pt) == ccm_seal(key, 9, pt));
}

TEST_CASE("fixed counter: plaintext to ciphertext is injective") {
    std::mt19937_64 rng(19);
    const auto key = SecretKey128::random(rng);
    const Bytes a = random_bytes(rng, 20);
    for (std::size_t i = 0; i < a.size() * 8; ++i) {
        Bytes b = a;
        b[i / 8] ^= static_cast<std::uint8_t>(1u << (i % 8));
        REQUIRE(ccm_seal(key, 3, a).ciphertext != ccm_seal(key, 3, b).ciphertext);
    }
}

TEST_CASE("ccm_open rejects tampering and wrong keys") {
    std::mt19937_64 rng(23);
    const auto key = SecretKey128::random(rng);
    const Bytes pt = random_bytes(rng, 48);
    const auto env = ccm_seal(key, 77, pt);
    const std::size_t bits = (env.ciphertext.size() + kMicSize) * 8;
    int rejected = 0;
    for (int t = 0; t < 10000; ++t) {
        auto bad = env;
        const std::size_t bit = rng() % bits;
        if (bit < env.ciphertext.size() * 8)
            bad.ciphertext[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        else
            bad.mic[(bit / 8) - env.ciphertext.size()] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        try {
            (void)ccm_open(key, bad);
        } catch (const AuthenticationFailure&) {
            ++rejected;
        }
    }
    CHECK(rejected == 10000);

    auto other = SecretKey128::random(rng);
    CHECK_THROWS_AS(ccm_open(other, env), AuthenticationFailure);
    auto wrong_counter = env;
    wrong_counter.counter += 1;
    CHECK_THROWS_AS(ccm_open(key, wrong_counter), AuthenticationFailure);
    CHECK_THROWS_AS(ccm_open(key, CipherEnvelope{}), MalformedEnvelope);
}

TEST_CASE("envelope wire layout") {
    CipherEnvelope env{0x0102030405060708ull, {0xaa, 0xbb, 0xcc}, {1, 2, 3, 4}};
    const Bytes wire = serialize(env);
    CHECK(to_hex(wire) == "01020304050607080003aabbcc01020304");
    CHECK(wire.size() == env.ciphertext.size() + kEnvelopeWireOverhead);
    CHECK(deserialize_envelope(wire) == env);

    // In-memory overhead: counter + MIC.
    CHECK(sizeof(env.counter) + env.mic.size() == 12);

    CHECK_THROWS_AS(deserialize_envelope(Bytes(13)), MalformedEnvelope);
    Bytes truncated = wire;
    truncated.pop_back();
    CHECK_THROWS_AS(deserialize_envelope(truncated), MalformedEnvelope);
    Bytes extra = wire;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_envelope(extra), MalformedEnvelope);
    CHECK_THROWS_AS(deserialize_envelope(from_hex("0000000000000001000001020304")), MalformedEnvelope);
}

TEST_CASE("counter signatures: accept, replay, forgery") {
    std::mt19937_64 rng(29);
    const auto key = SecretKey128::random(rng);
    const Bytes payload = random_bytes(rng, 33);
    const auto msg = sign_counter(key, 5, payload);
    CHECK(msg == sign_counter(key, 5, payload));
    CHECK(verify_counter(key, msg, 4) == VerifyResult::Accept);
    CHECK(verify_counter(key, msg, 5) == VerifyResult::Replay);
    CHECK(verify_counter(key, msg, 9) == VerifyResult::Replay);
    CHECK(verify_counter(SecretKey128::random(rng), msg, 0) == VerifyResult::Forgery);

    int forged = 0;
    for (int t = 0; t < 10000; ++t) {
        auto bad = msg;
        switch (rng() % 4) {
            case 0: bad.payload[rng() % bad.payload.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255); break;
            case 1: bad.payload.push_back(static_cast<std::uint8_t>(rng())); break;
            case 2: bad.payload.pop_back(); break;
            default: bad.counter ^= 1ull << (rng() % 64); break;
        }
        if (verify_counter(key, bad, 0) == VerifyResult::Forgery) ++forged;
    }
    CHECK(forged == 10000);

    // Trailing zero octets are not absorbed by the padding.
    auto padded = msg;
    padded.payload.push_back(0);
    CHECK(verify_counter(key, padded, 0) == VerifyResult::Forgery);
}

TEST_CASE("constant_time_equal") {
    CHECK(constant_time_equal(Bytes{1, 2, 3}, Bytes{1, 2, 3}));
    CHECK_FALSE(constant_time_equal(Bytes{1, 2, 3}, Bytes{1, 2, 4}));
    CHECK_FALSE(constant_time_equal(Bytes{1, 2}, Bytes{1, 2, 3}));
    CHECK(constant_time_equal(Bytes{}, Bytes{}));
}
