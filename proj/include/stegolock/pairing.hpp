#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stegolock/cipher.hpp"
#include "stegolock/transport.hpp"

namespace stegolock::pairing {

using cipher::Block;
using cipher::SecretKey128;

// Codes follow the SMP IO capability values (DisplayYesNo is not modelled).
enum class IoCapability : std::uint8_t {
    DisplayOnly = 0x00,
    KeyboardOnly = 0x02,
    NoInputNoOutput = 0x03,
    KeyboardDisplay = 0x04,
};

enum class PairingMethod { JustWorks, PasskeyEntry, OutOfBand };

std::string_view to_string(IoCapability io);
std::string_view to_string(PairingMethod m);
std::optional<IoCapability> parse_io_capability(std::string_view s);

inline constexpr std::uint32_t kMaxPasskey = 999999;

PairingMethod select_method(IoCapability initiator, IoCapability responder, bool oob_available);

/// JustWorks: zero key. PasskeyEntry: passkey widened big-endian. OutOfBand: the supplied value.
/// Throws InvalidInput for a missing or out-of-range passkey or a missing OOB value.
SecretKey128 derive_tk(PairingMethod method, std::optional<std::uint32_t> passkey,
                       const std::optional<SecretKey128>& oob_value = std::nullopt);

Block confirm_value(const SecretKey128& tk, const Block& rand);

// AES_TK(low 8 octets of srand || low 8 octets of mrand); "low" = trailing, big-endian.
SecretKey128 derive_stk(const SecretKey128& tk, const Block& mrand, const Block& srand);

// AES_IRK(public address || zero padding), first six octets. For logging.
std::array<std::uint8_t, 6> private_address(const SecretKey128& irk,
                                            const std::array<std::uint8_t, 6>& public_address);

struct SessionKeys {
    SecretKey128 stk;
    SecretKey128 ltk;
    SecretKey128 csrk;
    SecretKey128 irk;

    friend bool operator==(const SessionKeys&, const SessionKeys&) = default;
};

enum class Role { Initiator, Responder };

enum class Failure { None, ConfirmMismatch, MicFailure, OutOfOrder, Malformed, Timeout, InvalidConfig };

std::string_view to_string(Failure f);

struct PairingConfig {
    IoCapability io = IoCapability::NoInputNoOutput;
    bool oob = false;
    std::optional<SecretKey128> oob_value;
    std::optional<std::uint32_t> passkey;  // displayed or typed, depending on the side
    std::array<std::uint8_t, 6> address{};
    std::uint64_t seed = 1;
};

struct LogEntry {
    std::string event;
    std::string detail;
};

enum class KeyId : std::uint8_t { Ltk = 0x01, Csrk = 0x02, Irk = 0x03 };

/// One side of legacy pairing. Feed it frames; it returns the frames to send.
class PairingSession {
public:
    PairingSession(Role role, PairingConfig config);

    // Initiator: emits PAIR_REQ. Responder: emits nothing.
    std::vector<transport::Frame> start();
    std::vector<transport::Frame> handle(const transport::Frame& frame);

    // Marks an unfinished session as timed out.
    void on_timeout();

    bool complete() const { return state_ == State::Complete; }
    bool failed() const { return state_ == State::Failed; }
    Failure failure() const { return failure_; }
    std::optional<PairingMethod> method() const { return method_; }
    const std::optional<SessionKeys>& keys() const { return keys_; }
    const std::vector<LogEntry>& log() const { return log_; }
    Role role() const { return role_; }

private:
    enum class State { Idle, AwaitRsp, AwaitReq, AwaitConfirm, AwaitRandom, AwaitKeys, Complete, Failed };

    std::vector<transport::Frame> fail(Failure why, std::string detail);
    std::vector<transport::Frame> on_features(const transport::Frame& f);
    std::vector<transport::Frame> on_confirm(const transport::Frame& f);
    std::vector<transport::Frame> on_random(const transport::Frame& f);
    std::vector<transport::Frame> on_key(const transport::Frame& f);
    std::vector<transport::Frame> distribute_keys();
    bool prepare_tk();
    Block random_block();
    void finish();

    Role role_;
    PairingConfig config_;
    std::mt19937_64 rng_;
    State state_ = State::Idle;
    Failure failure_ = Failure::None;
    std::optional<PairingMethod> method_;
    SecretKey128 tk_;
    Block local_rand_{};
    Block peer_confirm_{};
    std::optional<SecretKey128> stk_;
    std::optional<SessionKeys> keys_;
    SessionKeys pending_{};
    int keys_received_ = 0;
    std::vector<LogEntry> log_;
};

struct PairingResult {
    PairingSession initiator;
    PairingSession responder;
    std::vector<transport::TranscriptEntry> transcript;  // frames as delivered

    bool success() const {
        return initiator.complete() && responder.complete() && initiator.keys() == responder.keys();
    }
};

/// Drives both roles over one in-process link until neither side has pending frames.
PairingResult run_pairing(transport::Link& link, const PairingConfig& initiator,
                          const PairingConfig& responder);

/// Fields a passive observer can pull out of captured SMP frames.
struct ObservedTranscript {
    std::optional<IoCapability> initiator_io, responder_io;
    bool initiator_oob = false, responder_oob = false;
    std::optional<Block> mconfirm, sconfirm, mrand, srand;
    std::vector<std::pair<KeyId, cipher::CipherEnvelope>> key_dist;
};

ObservedTranscript observe(const std::vector<transport::TranscriptEntry>& frames);

}  // namespace stegolock::pairing
