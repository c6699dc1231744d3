#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stegolock/cipher.hpp"
#include "stegolock/lockproto.hpp"
#include "stegolock/pairing.hpp"
#include "stegolock/transport.hpp"

namespace stegolock::adversary {

using cipher::Block;
using cipher::SecretKey128;
using lock::ProtocolMode;
using transport::Frame;

enum class AttackScenario { PassiveEavesdrop, ActiveKeySubstitution, Tamper, Replay };

// JSON names: PASSIVE_EAVESDROP, ACTIVE_KEY_SUBSTITUTION, TAMPER, REPLAY.
std::string_view to_string(AttackScenario s);
// Also accepts the CLI spellings: passive, key-substitution, tamper, replay.
std::optional<AttackScenario> parse_scenario(std::string_view s);

struct AttackConfig {
    AttackScenario scenario = AttackScenario::PassiveEavesdrop;
    ProtocolMode mode = ProtocolMode::StegoCrypto;
    std::uint64_t seed = 1;
    std::size_t tamper_trials = 1000;
    // Hands the attacker the application key; models a key compromise.
    bool key_leak = false;
    std::size_t cover_width = 96;
    std::size_t cover_height = 64;
    transport::ChannelModel channel{10.0, 0.01, 1};
};

struct AttackReport {
    AttackScenario scenario = AttackScenario::PassiveEavesdrop;
    ProtocolMode protocol_mode = ProtocolMode::StegoCrypto;
    bool passkey_recovered = false;
    bool unlock_granted_to_attacker = false;
    std::size_t tampers_attempted = 0;
    std::size_t tampers_detected = 0;
    bool stego_detected = false;
    // Attacker can tell a secret is in transit (always true outside stego modes).
    bool secret_detected = false;
    std::uint64_t seed = 0;
    bool key_leak = false;
    std::size_t frames_handled = 0;
    std::size_t audit_entries = 0;
    std::size_t relocks = 0;  // timer entries, not tied to a frame
};

std::string to_json(const AttackReport& r);

AttackReport run_attack(const AttackConfig& config);
AttackReport run_attack(AttackScenario scenario, ProtocolMode mode, std::uint64_t seed);

// True when the report contradicts what the mode is supposed to guarantee. Only
// STEGO_CRYPTO without a key leak carries guarantees.
bool violates_guarantees(const AttackReport& r);

struct StegDetection {
    bool detected = false;
    Bytes extracted;
};

/// Runs the public extractor on a STEGO_IMAGE frame. Anything else, or a malformed
/// carrier, is "not detected".
StegDetection steg_detect(const Frame& frame);

/// Best-effort passkey recovery from one captured unlock frame.
std::optional<Bytes> recover_passkey(const Frame& frame, ProtocolMode mode,
                                     const std::optional<SecretKey128>& leaked_key = std::nullopt);

/// Ideal public-key encryption used to model the key-exchange baseline. There is no
/// asymmetric primitive: the object enforces that only the holder of the private half
/// can open what was encrypted to the public half.
class IdealPke {
public:
    struct KeyPair {
        Block secret{};
        Block pub{};
    };

    explicit IdealPke(std::uint64_t seed);

    KeyPair generate();
    Block public_of(const Block& secret) const;

    // pub || envelope
    Bytes encrypt(const Block& recipient, std::uint64_t counter, ByteView message) const;
    std::optional<Bytes> decrypt(const Block& secret, ByteView ciphertext) const;

private:
    SecretKey128 sealing_key(const Block& pub) const;

    std::mt19937_64 rng_;
    cipher::Aes128 derive_pub_;
    cipher::Aes128 derive_seal_;
};

/// Key-substitution relay: swaps in its own public key in both directions, reads E1,
/// re-encrypts as E2. On lock traffic it tries the same trick against the envelope and
/// forwards a re-sealed one. With `honest` set it forwards everything untouched.
class KeySubstitutionRelay : public transport::Interceptor {
public:
    KeySubstitutionRelay(IdealPke& pke, ProtocolMode lock_mode, std::uint64_t seed, bool honest = false);

    transport::Decision on_frame(transport::Direction dir, const Frame& frame, double now) override;

    const std::vector<Bytes>& intercepted_messages() const { return read_; }
    const std::vector<Bytes>& recovered_passkeys() const { return passkeys_; }
    std::size_t frames_rewritten() const { return rewritten_; }
    const IdealPke::KeyPair& own_keys() const { return own_; }

private:
    transport::Decision on_lock_frame(const Frame& frame);

    IdealPke& pke_;
    ProtocolMode mode_;
    bool honest_;
    IdealPke::KeyPair own_;
    std::map<transport::Direction, Block> genuine_pub_;  // keyed by the sender's direction
    std::vector<Bytes> read_;
    std::vector<Bytes> passkeys_;
    std::size_t rewritten_ = 0;
    std::uint64_t counter_ = 1;
    SecretKey128 own_app_key_;
};

std::shared_ptr<KeySubstitutionRelay> key_substitution_relay(IdealPke& pke, ProtocolMode lock_mode,
                                                             std::uint64_t seed, bool honest = false);

enum class RelayKind { None, Substituting, Identity };

struct BaselineOutcome {
    bool attacker_read_message = false;
    bool victim2_decrypted = false;
    bool victim2_got_original = false;
    bool attacker_key_in_use = false;  // victim 1 encrypted to P3
    Bytes message;

    bool both_deceived() const { return attacker_read_message && victim2_decrypted; }
};

/// Two victims exchange public keys then victim 1 sends one encrypted message.
BaselineOutcome run_key_exchange_baseline(std::uint64_t seed, RelayKind relay, ByteView message);

struct StkRecovery {
    bool recovered = false;
    pairing::PairingMethod method = pairing::PairingMethod::JustWorks;
    SecretKey128 stk;
    std::optional<std::uint32_t> passkey;
    std::size_t candidates_tried = 0;
    std::optional<SecretKey128> ltk;
};

/// Passive pairing attack: TK is public under JustWorks and a 10^6 search under
/// PasskeyEntry (checked against the initiator's confirm). OOB is out of reach.
StkRecovery recover_stk(const pairing::ObservedTranscript& transcript);

}  // namespace stegolock::adversary
