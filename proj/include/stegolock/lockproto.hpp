#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stegolock/cipher.hpp"
#include "stegolock/stego.hpp"
#include "stegolock/transport.hpp"

namespace stegolock::lock {

using cipher::SecretKey128;
using transport::Frame;

inline constexpr std::size_t kMinPasskey = 4;
inline constexpr std::size_t kMaxPasskey = 64;
inline constexpr double kDefaultRelockAfter = 5.0;

/// UTF-8 text of 4..64 octets.
class Passkey {
public:
    // Throws InvalidInput on length or encoding violations.
    explicit Passkey(std::string text);

    const std::string& text() const { return text_; }
    ByteView bytes() const { return as_bytes(text_); }

    static bool is_valid(ByteView candidate);

private:
    std::string text_;
};

enum class ProtocolMode { Plaintext, CryptoOnly, StegoOnly, StegoCrypto };

std::string_view to_string(ProtocolMode m);
// Accepts "plaintext", "crypto-only", "stego-only", "stego-crypto".
std::optional<ProtocolMode> parse_mode(std::string_view s);
bool uses_stego(ProtocolMode m);

using Digest = std::array<std::uint8_t, 32>;

// SHA-256.
Digest passkey_digest(ByteView passkey);

struct EnrollmentRecord {
    SecretKey128 shared_key;
    Digest passkey_digest{};
    ProtocolMode mode = ProtocolMode::StegoCrypto;
    double relock_after = kDefaultRelockAfter;

    friend bool operator==(const EnrollmentRecord&, const EnrollmentRecord&) = default;
};

EnrollmentRecord enroll(const Passkey& passkey, std::uint64_t seed,
                        ProtocolMode mode = ProtocolMode::StegoCrypto,
                        double relock_after = kDefaultRelockAfter);

// {"key": hex, "digest": hex, "mode": name, "relock_after": seconds}
std::string to_json(const EnrollmentRecord& record);
EnrollmentRecord enrollment_from_json(std::string_view json);
void save_enrollment(const EnrollmentRecord& record, const std::filesystem::path& path);
// Missing file yields nullopt; a present but invalid file throws.
std::optional<EnrollmentRecord> load_enrollment(const std::filesystem::path& path);

/// Builds the unlock frame for `mode`. The cover is only read in stego modes.
/// Throws CapacityError when the cover cannot hold the payload; InvalidInput for counter 0.
Frame client_unlock(const Passkey& passkey, const stego::RgbImage& cover, ProtocolMode mode,
                    const SecretKey128& key, std::uint64_t counter);

/// Keyholder side: owns the outgoing counter.
class Keyholder {
public:
    Keyholder(Passkey passkey, SecretKey128 key, ProtocolMode mode, std::uint64_t first_counter = 1);

    // Throws CounterExhausted once the counter space is used up.
    Frame request(const stego::RgbImage& cover);

    std::uint64_t next_counter() const { return next_counter_; }
    ProtocolMode mode() const { return mode_; }

private:
    Passkey passkey_;
    SecretKey128 key_;
    ProtocolMode mode_;
    std::uint64_t next_counter_;
    bool exhausted_ = false;
};

enum class AuditKind { UnlockGranted, UnlockDenied, AuthFailure, Replay, Malformed, Relock, NotEnrolled };

std::string_view to_string(AuditKind k);
std::optional<AuditKind> parse_audit_kind(std::string_view s);

struct AuditEntry {
    double timestamp = 0.0;
    AuditKind kind = AuditKind::UnlockDenied;
    std::uint64_t counter = 0;
    ProtocolMode mode = ProtocolMode::StegoCrypto;
    std::string source;

    friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

// One JSON object: {"timestamp","kind","counter","mode","source"}.
std::string to_json_line(const AuditEntry& e);
AuditEntry audit_entry_from_json(std::string_view line);

/// Append-only, timestamp-monotone. Optionally mirrors every entry to a JSON-lines file.
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(const std::filesystem::path& sink);

    // Throws InvalidInput if the timestamp goes backwards.
    void append(AuditEntry e);

    const std::vector<AuditEntry>& entries() const { return entries_; }
    std::size_t count(AuditKind k) const;
    std::string to_jsonl() const;

    static std::vector<AuditEntry> read_file(const std::filesystem::path& path);

private:
    std::vector<AuditEntry> entries_;
    std::optional<std::ofstream> sink_;
};

enum class LockStatus { Locked, Unlocked };

struct LockState {
    LockStatus status = LockStatus::Locked;
    double unlocked_at = 0.0;
    double relock_after = kDefaultRelockAfter;
};

struct UnlockDecision {
    bool granted = false;
    AuditKind kind = AuditKind::UnlockDenied;
    std::uint64_t counter = 0;
    std::string reason;
};

// [granted] [kind] be64(counter)
Frame result_frame(const UnlockDecision& d);
UnlockDecision parse_result_frame(const Frame& f);

enum class KeySource { Enrollment, PairingLtk };

struct ControllerOptions {
    KeySource key_source = KeySource::Enrollment;
    std::optional<SecretKey128> ltk;
    std::optional<std::filesystem::path> audit_path;
};

/// Lock side. Serialized: one frame at a time.
class Controller {
public:
    explicit Controller(std::optional<EnrollmentRecord> enrollment, ControllerOptions options = {});

    UnlockDecision handle(const Frame& frame, double now, std::string_view source = "channel");
    const LockState& relock_tick(double now);

    const LockState& state() const { return state_; }
    std::uint64_t last_seen_counter() const { return last_seen_; }
    const AuditLog& audit() const { return audit_; }
    std::size_t frames_handled() const { return handled_; }
    std::optional<ProtocolMode> mode() const;

private:
    UnlockDecision decide(const Frame& frame);
    UnlockDecision check_passkey(ByteView candidate, std::uint64_t counter);
    UnlockDecision open_envelope(ByteView wire);

    std::optional<EnrollmentRecord> enrollment_;
    std::optional<SecretKey128> app_key_;
    LockState state_;
    std::uint64_t last_seen_ = 0;
    std::size_t handled_ = 0;
    double clock_ = 0.0;
    AuditLog audit_;
};

/// Keyholder and controller joined by a simulated link (client = initiator side).
class LockSession {
public:
    LockSession(const EnrollmentRecord& record, const Passkey& passkey, transport::ChannelModel model,
                ControllerOptions options = {});

    // Client request, controller handles it, result frame flows back.
    UnlockDecision unlock(const stego::RgbImage& cover);

    // Controller handles whatever is queued for it (including injected frames).
    std::vector<UnlockDecision> serve_pending();

    // Lets simulated time pass and runs the relock timer.
    void idle(double seconds);

    transport::Link& link() { return link_; }
    Keyholder& client() { return client_; }
    Controller& controller() { return controller_; }

private:
    transport::Link link_;
    Keyholder client_;
    Controller controller_;
};

}  // namespace stegolock::lock
