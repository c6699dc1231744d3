#include <algorithm>

#include "stegolock/cipher.hpp"
#include "stegolock/errors.hpp"

namespace stegolock::cipher {

namespace {

constexpr std::uint8_t xtime(std::uint8_t x) {
    return static_cast<std::uint8_t>((x << 1) ^ ((x & 0x80) ? 0x1b : 0x00));
}

constexpr std::uint8_t gmul(std::uint8_t a, std::uint8_t b) {
    std::uint8_t p = 0;
    while (b) {
        if (b & 1) p ^= a;
        a = xtime(a);
        b >>= 1;
    }
    return p;
}

constexpr std::uint8_t rotl8(std::uint8_t x, int s) {
    return static_cast<std::uint8_t>((x << s) | (x >> (8 - s)));
}

// S-box from the GF(2^8) inverse followed by the affine map.
constexpr std::array<std::uint8_t, 256> make_sbox() {
    std::array<std::uint8_t, 256> box{};
    for (int x = 0; x < 256; ++x) {
        std::uint8_t inv = 0;
        if (x != 0) {
            for (int y = 1; y < 256; ++y) {
                if (gmul(static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y)) == 1) {
                    inv = static_cast<std::uint8_t>(y);
                    break;
                }
            }
        }
        box[x] = static_cast<std::uint8_t>(inv ^ rotl8(inv, 1) ^ rotl8(inv, 2) ^ rotl8(inv, 3) ^
                                           rotl8(inv, 4) ^ 0x63);
    }
    return box;
}

constexpr std::array<std::uint8_t, 256> make_inv_sbox(const std::array<std::uint8_t, 256>& s) {
    std::array<std::uint8_t, 256> inv{};
    for (int i = 0; i < 256; ++i) inv[s[i]] = static_cast<std::uint8_t>(i);
    return inv;
}

constexpr auto kSbox = make_sbox();
constexpr auto kInvSbox = make_inv_sbox(kSbox);

static_assert(kSbox[0x00] == 0x63 && kSbox[0x53] == 0xed);

void add_round_key(Block& s, const std::uint8_t* rk) {
    for (std::size_t i = 0; i < kBlockSize; ++i) s[i] ^= rk[i];
}

void sub_bytes(Block& s) {
    for (auto& b : s) b = kSbox[b];
}

void inv_sub_bytes(Block& s) {
    for (auto& b : s) b = kInvSbox[b];
}

// State is column-major: s[4*c + r].
void shift_rows(Block& s) {
    Block t = s;
    for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 4; ++r) s[4 * c + r] = t[4 * ((c + r) % 4) + r];
}

void inv_shift_rows(Block& s) {
    Block t = s;
    for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 4; ++r) s[4 * ((c + r) % 4) + r] = t[4 * c + r];
}

void mix_columns(Block& s) {
    for (int c = 0; c < 4; ++c) {
        std::uint8_t* col = &s[4 * c];
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        col[0] = static_cast<std::uint8_t>(xtime(a0) ^ (xtime(a1) ^ a1) ^ a2 ^ a3);
        col[1] = static_cast<std::uint8_t>(a0 ^ xtime(a1) ^ (xtime(a2) ^ a2) ^ a3);
        col[2] = static_cast<std::uint8_t>(a0 ^ a1 ^ xtime(a2) ^ (xtime(a3) ^ a3));
        col[3] = static_cast<std::uint8_t>((xtime(a0) ^ a0) ^ a1 ^ a2 ^ xtime(a3));
    }
}

void inv_mix_columns(Block& s) {
    for (int c = 0; c < 4; ++c) {
        std::uint8_t* col = &s[4 * c];
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        col[0] = gmul(a0, 14) ^ gmul(a1, 11) ^ gmul(a2, 13) ^ gmul(a3, 9);
        col[1] = gmul(a0, 9) ^ gmul(a1, 14) ^ gmul(a2, 11) ^ gmul(a3, 13);
        col[2] = gmul(a0, 13) ^ gmul(a1, 9) ^ gmul(a2, 14) ^ gmul(a3, 11);
        col[3] = gmul(a0, 11) ^ gmul(a1, 13) ^ gmul(a2, 9) ^ gmul(a3, 14);
    }
}

Block to_block(ByteView block) {
    if (block.size() != kBlockSize)
        throw InvalidInput("AES block must be 16 octets, got " + std::to_string(block.size()));
    Block b{};
    std::copy(block.begin(), block.end(), b.begin());
    return b;
}

}  // namespace

SecretKey128 SecretKey128::from_bytes(ByteView bytes) {
    if (bytes.size() != kBlockSize)
        throw InvalidInput("key must be 16 octets, got " + std::to_string(bytes.size()));
    Block b{};
    std::copy(bytes.begin(), bytes.end(), b.begin());
    return SecretKey128(b);
}

SecretKey128 SecretKey128::from_hex(std::string_view hex) {
    return from_bytes(stegolock::from_hex(hex));
}

SecretKey128 SecretKey128::random(std::mt19937_64& rng) {
    Block b{};
    for (std::size_t i = 0; i < b.size(); i += 8) {
        const std::uint64_t word = rng();
        for (std::size_t j = 0; j < 8; ++j) b[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
    }
    return SecretKey128(b);
}

bool SecretKey128::is_zero() const {
    return std::all_of(bytes_.begin(), bytes_.end(), [](auto b) { return b == 0; });
}

Aes128::Aes128(const SecretKey128& key) {
    std::copy(key.bytes().begin(), key.bytes().end(), round_keys_.begin());
    std::uint8_t rcon = 0x01;
    for (std::size_t i = 16; i < round_keys_.size(); i += 4) {
        std::array<std::uint8_t, 4> t{round_keys_[i - 4], round_keys_[i - 3], round_keys_[i - 2],
                                      round_keys_[i - 1]};
        if (i % 16 == 0) {
            t = {static_cast<std::uint8_t>(kSbox[t[1]] ^ rcon), kSbox[t[2]], kSbox[t[3]],
                 kSbox[t[0]]};
            rcon = xtime(rcon);
        }
        for (std::size_t j = 0; j < 4; ++j) round_keys_[i + j] = round_keys_[i - 16 + j] ^ t[j];
    }
}

Block Aes128::encrypt(const Block& in) const {
    Block s = in;
    add_round_key(s, &round_keys_[0]);
    for (int round = 1; round < 10; ++round) {
        sub_bytes(s);
        shift_rows(s);
        mix_columns(s);
        add_round_key(s, &round_keys_[16 * round]);
    }
    sub_bytes(s);
    shift_rows(s);
    add_round_key(s, &round_keys_[160]);
    return s;
}

Block Aes128::decrypt(const Block& in) const {
    Block s = in;
    add_round_key(s, &round_keys_[160]);
    for (int round = 9; round > 0; --round) {
        inv_shift_rows(s);
        inv_sub_bytes(s);
        add_round_key(s, &round_keys_[16 * round]);
        inv_mix_columns(s);
    }
    inv_shift_rows(s);
    inv_sub_bytes(s);
    add_round_key(s, &round_keys_[0]);
    return s;
}

Block aes128_encrypt_block(const SecretKey128& key, ByteView block) {
    return Aes128(key).encrypt(to_block(block));
}

Block aes128_decrypt_block(const SecretKey128& key, ByteView block) {
    return Aes128(key).decrypt(to_block(block));
}

}  // namespace stegolock::cipher
