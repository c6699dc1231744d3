#include <openssl/evp.h>

#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"
#include "stegolock/errors.hpp"
#include "stegolock/lockproto.hpp"
#include "stegolock/png_io.hpp"

namespace stegolock::lock {

using nlohmann::json;
using transport::FrameKind;

namespace {

bool valid_utf8(ByteView s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const std::uint8_t c = s[i];
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            extra = 1;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            extra = 2;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((s[i + k] & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (s[i + k] & 0x3f);
        }
        static constexpr std::uint32_t min_cp[] = {0, 0x80, 0x800, 0x10000};
        if (cp < min_cp[extra] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
        i += extra + 1;
    }
    return true;
}

std::string_view frame_kind_for(ProtocolMode m) {
    switch (m) {
        case ProtocolMode::Plaintext: return "PLAINTEXT_UNLOCK";
        case ProtocolMode::CryptoOnly: return "SIGNED_DATA";
        default: return "STEGO_IMAGE";
    }
}

FrameKind expected_kind(ProtocolMode m) {
    switch (m) {
        case ProtocolMode::Plaintext: return FrameKind::PlaintextUnlock;
        case ProtocolMode::CryptoOnly: return FrameKind::SignedData;
        default: return FrameKind::StegoImage;
    }
}

}  // namespace

Passkey::Passkey(std::string text) : text_(std::move(text)) {
    if (text_.size() < kMinPasskey || text_.size() > kMaxPasskey)
        throw InvalidInput("passkey must be 4..64 octets, got " + std::to_string(text_.size()));
    if (!valid_utf8(as_bytes(text_))) throw InvalidInput("passkey is not valid UTF-8");
}

bool Passkey::is_valid(ByteView candidate) {
    return candidate.size() >= kMinPasskey && candidate.size() <= kMaxPasskey && valid_utf8(candidate);
}

std::string_view to_string(ProtocolMode m) {
    switch (m) {
        case ProtocolMode::Plaintext: return "plaintext";
        case ProtocolMode::CryptoOnly: return "crypto-only";
        case ProtocolMode::StegoOnly: return "stego-only";
        case ProtocolMode::StegoCrypto: return "stego-crypto";
    }
    return "unknown";
}

std::optional<ProtocolMode> parse_mode(std::string_view s) {
    for (auto m : {ProtocolMode::Plaintext, ProtocolMode::CryptoOnly, ProtocolMode::StegoOnly,
                   ProtocolMode::StegoCrypto})
        if (s == to_string(m)) return m;
    return std::nullopt;
}

bool uses_stego(ProtocolMode m) { return m == ProtocolMode::StegoOnly || m == ProtocolMode::StegoCrypto; }

Digest passkey_digest(ByteView passkey) {
    Digest d{};
    unsigned int len = 0;
    if (!EVP_Digest(passkey.data(), passkey.size(), d.data(), &len, EVP_sha256(), nullptr) || len != d.size())
        throw Error("SHA-256 failed");
    return d;
}

EnrollmentRecord enroll(const Passkey& passkey, std::uint64_t seed, ProtocolMode mode, double relock_after) {
    if (!(relock_after >= 0.0)) throw InvalidInput("relock_after must be >= 0");
    std::mt19937_64 rng(seed);
    return EnrollmentRecord{SecretKey128::random(rng), passkey_digest(passkey.bytes()), mode, relock_after};
}

std::string to_json(const EnrollmentRecord& r) {
    nlohmann::ordered_json j;
    j["key"] = r.shared_key.hex();
    j["digest"] = to_hex(r.passkey_digest);
    j["mode"] = std::string(to_string(r.mode));
    j["relock_after"] = r.relock_after;
    return j.dump(2);
}

EnrollmentRecord enrollment_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        EnrollmentRecord r;
        r.shared_key = SecretKey128::from_hex(j.at("key").get<std::string>());
        const Bytes digest = from_hex(j.at("digest").get<std::string>());
        if (digest.size() != r.passkey_digest.size()) throw InvalidInput("enrollment digest must be 32 octets");
        std::copy(digest.begin(), digest.end(), r.passkey_digest.begin());
        const auto mode = parse_mode(j.at("mode").get<std::string>());
        if (!mode) throw InvalidInput("enrollment has unknown mode");
        r.mode = *mode;
        r.relock_after = j.at("relock_after").get<double>();
        if (!(r.relock_after >= 0.0)) throw InvalidInput("relock_after must be >= 0");
        return r;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("bad enrollment record: ") + e.what());
    }
}

void save_enrollment(const EnrollmentRecord& record, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write enrollment file " + path.string());
    out << to_json(record) << '\n';
}

std::optional<EnrollmentRecord> load_enrollment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return enrollment_from_json(ss.str());
}

Frame client_unlock(const Passkey& passkey, const stego::RgbImage& cover, ProtocolMode mode,
                    const SecretKey128& key, std::uint64_t counter) {
    switch (mode) {
        case ProtocolMode::Plaintext:
            return Frame{FrameKind::PlaintextUnlock, Bytes(passkey.bytes().begin(), passkey.bytes().end())};
        case ProtocolMode::StegoOnly:
            return Frame{FrameKind::StegoImage, png::encode(stego::embed(cover, passkey.bytes()))};
        case ProtocolMode::CryptoOnly:
        case ProtocolMode::StegoCrypto: {
            if (counter == 0) throw InvalidInput("message counters start at 1");
            const Bytes wire = cipher::serialize(cipher::ccm_seal(key, counter, passkey.bytes()));
            if (mode == ProtocolMode::CryptoOnly) return Frame{FrameKind::SignedData, wire};
            return Frame{FrameKind::StegoImage, png::encode(stego::embed(cover, wire))};
        }
    }
    throw InvalidInput("unknown protocol mode");
}

Keyholder::Keyholder(Passkey passkey, SecretKey128 key, ProtocolMode mode, std::uint64_t first_counter)
    : passkey_(std::move(passkey)), key_(key), mode_(mode), next_counter_(first_counter) {
    if (first_counter == 0) throw InvalidInput("message counters start at 1");
}

Frame Keyholder::request(const stego::RgbImage& cover) {
    if (exhausted_) throw CounterExhausted();
    Frame f = client_unlock(passkey_, cover, mode_, key_, next_counter_);
    if (next_counter_ == std::numeric_limits<std::uint64_t>::max())
        exhausted_ = true;
    else
        ++next_counter_;
    return f;
}

Frame result_frame(const UnlockDecision& d) {
    Bytes p(10);
    p[0] = d.granted ? 1 : 0;
    p[1] = static_cast<std::uint8_t>(d.kind);
    store_be64(p.data() + 2, d.counter);
    return Frame{FrameKind::UnlockResult, std::move(p)};
}

UnlockDecision parse_result_frame(const Frame& f) {
    if (f.kind != FrameKind::UnlockResult || f.payload.size() != 10 || f.payload[0] > 1 ||
        f.payload[1] > static_cast<std::uint8_t>(AuditKind::NotEnrolled))
        throw MalformedFrame("not an UNLOCK_RESULT frame");
    UnlockDecision d;
    d.granted = f.payload[0] == 1;
    d.kind = static_cast<AuditKind>(f.payload[1]);
    d.counter = load_be64(f.payload.data() + 2);
    d.reason = std::string(to_string(d.kind));
    return d;
}

Controller::Controller(std::optional<EnrollmentRecord> enrollment, ControllerOptions options)
    : enrollment_(std::move(enrollment)) {
    if (options.audit_path) audit_ = AuditLog(*options.audit_path);
    if (enrollment_) {
        state_.relock_after = enrollment_->relock_after;
        if (options.key_source == KeySource::PairingLtk) {
            if (!options.ltk) throw InvalidInput("pairing key source selected but no LTK supplied");
            app_key_ = options.ltk;
        } else {
            app_key_ = enrollment_->shared_key;
        }
    }
}

std::optional<ProtocolMode> Controller::mode() const {
    if (!enrollment_) return std::nullopt;
    return enrollment_->mode;
}

UnlockDecision Controller::check_passkey(ByteView candidate, std::uint64_t counter) {
    // Digest first, then a full-length comparison: no early exit on a matching prefix.
    const Digest d = passkey_digest(candidate);
    if (!constant_time_equal(d, enrollment_->passkey_digest))
        return {false, AuditKind::UnlockDenied, counter, "wrong passkey"};
    return {true, AuditKind::UnlockGranted, counter, "granted"};
}

UnlockDecision Controller::open_envelope(ByteView wire) {
    cipher::CipherEnvelope env;
    try {
        env = cipher::deserialize_envelope(wire);
    } catch (const MalformedEnvelope& e) {
        return {false, AuditKind::Malformed, 0, e.what()};
    }
    Bytes plaintext;
    try {
        plaintext = cipher::ccm_open(*app_key_, env);
    } catch (const AuthenticationFailure&) {
        return {false, AuditKind::AuthFailure, env.counter, "MIC mismatch"};
    }
    if (env.counter <= last_seen_)
        return {false, AuditKind::Replay, env.counter,
                "counter " + std::to_string(env.counter) + " <= last seen " + std::to_string(last_seen_)};
    last_seen_ = env.counter;
    return check_passkey(plaintext, env.counter);
}

UnlockDecision Controller::decide(const Frame& frame) {
    if (!enrollment_) return {false, AuditKind::NotEnrolled, 0, "controller not enrolled"};
    const ProtocolMode mode = enrollment_->mode;
    if (frame.kind != expected_kind(mode))
        return {false, AuditKind::Malformed, 0,
                std::string("expected ") + std::string(frame_kind_for(mode)) + ", got " +
                    std::string(transport::to_string(frame.kind))};

    if (mode == ProtocolMode::Plaintext) return check_passkey(frame.payload, 0);
    if (mode == ProtocolMode::CryptoOnly) return open_envelope(frame.payload);

    Bytes hidden;
    try {
        hidden = stego::extract(png::decode(frame.payload));
    } catch (const MalformedStego& e) {
        return {false, AuditKind::Malformed, 0, e.what()};
    } catch (const IoError& e) {
        return {false, AuditKind::Malformed, 0, e.what()};
    } catch (const InvalidInput& e) {
        return {false, AuditKind::Malformed, 0, e.what()};
    }
    if (mode == ProtocolMode::StegoOnly) return check_passkey(hidden, 0);
    return open_envelope(hidden);
}

UnlockDecision Controller::handle(const Frame& frame, double now, std::string_view source) {
    relock_tick(now);
    clock_ = std::max(clock_, now);
    ++handled_;
    UnlockDecision d = decide(frame);
    if (d.granted) {
        state_.status = LockStatus::Unlocked;
        state_.unlocked_at = clock_;
    }
    audit_.append({clock_, d.kind, d.counter, enrollment_ ? enrollment_->mode : ProtocolMode::StegoCrypto,
                   std::string(source)});
    return d;
}

const LockState& Controller::relock_tick(double now) {
    clock_ = std::max(clock_, now);
    if (state_.status == LockStatus::Unlocked && clock_ >= state_.unlocked_at + state_.relock_after) {
        state_.status = LockStatus::Locked;
        audit_.append({clock_, AuditKind::Relock, last_seen_,
                       enrollment_ ? enrollment_->mode : ProtocolMode::StegoCrypto, "timer"});
    }
    return state_;
}

namespace {

SecretKey128 client_key(const EnrollmentRecord& record, const ControllerOptions& options) {
    if (options.key_source == KeySource::PairingLtk) {
        if (!options.ltk) throw InvalidInput("pairing key source selected but no LTK supplied");
        return *options.ltk;
    }
    return record.shared_key;
}

}  // namespace

LockSession::LockSession(const EnrollmentRecord& record, const Passkey& passkey, transport::ChannelModel model,
                         ControllerOptions options)
    : link_(model),
      client_(passkey, client_key(record, options), record.mode),
      controller_(record, options) {}

std::vector<UnlockDecision> LockSession::serve_pending() {
    std::vector<UnlockDecision> out;
    while (auto f = link_.responder().try_recv()) {
        auto d = controller_.handle(*f, link_.now());
        link_.responder().send(result_frame(d));
        out.push_back(std::move(d));
    }
    // Drain results so the client queue does not grow without bound.
    while (link_.initiator().try_recv()) {
    }
    return out;
}

UnlockDecision LockSession::unlock(const stego::RgbImage& cover) {
    link_.initiator().send(client_.request(cover));
    auto decisions = serve_pending();
    if (decisions.empty()) return {false, AuditKind::UnlockDenied, 0, "request never reached the controller"};
    return decisions.back();
}

void LockSession::idle(double seconds) {
    link_.advance_to(link_.now() + seconds);
    controller_.relock_tick(link_.now());
}

}  // namespace stegolock::lock
