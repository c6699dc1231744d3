#include <algorithm>

#include "stegolock/errors.hpp"
#include "stegolock/pairing.hpp"

namespace stegolock::pairing {

using transport::Frame;
using transport::FrameKind;

namespace {

constexpr std::uint8_t kMaxKeySize = 16;

bool has_keyboard(IoCapability io) {
    return io == IoCapability::KeyboardOnly || io == IoCapability::KeyboardDisplay;
}

bool has_display(IoCapability io) {
    return io == IoCapability::DisplayOnly || io == IoCapability::KeyboardDisplay;
}

bool valid_io(std::uint8_t raw) { return raw == 0x00 || raw == 0x02 || raw == 0x03 || raw == 0x04; }

Frame features_frame(FrameKind kind, const PairingConfig& cfg) {
    return Frame{kind, {static_cast<std::uint8_t>(cfg.io), static_cast<std::uint8_t>(cfg.oob ? 1 : 0),
                        kMaxKeySize, 0x00}};
}

struct Features {
    IoCapability io;
    bool oob;
};

std::optional<Features> parse_features(const Frame& f) {
    if (f.payload.size() != 4 || !valid_io(f.payload[0]) || f.payload[1] > 1 ||
        f.payload[2] != kMaxKeySize)
        return std::nullopt;
    return Features{static_cast<IoCapability>(f.payload[0]), f.payload[1] == 1};
}

std::optional<Block> parse_block(const Frame& f) {
    if (f.payload.size() != cipher::kBlockSize) return std::nullopt;
    Block b{};
    std::copy(f.payload.begin(), f.payload.end(), b.begin());
    return b;
}

Frame block_frame(FrameKind kind, const Block& b) { return Frame{kind, Bytes(b.begin(), b.end())}; }

}  // namespace

std::string_view to_string(IoCapability io) {
    switch (io) {
        case IoCapability::DisplayOnly: return "DisplayOnly";
        case IoCapability::KeyboardOnly: return "KeyboardOnly";
        case IoCapability::NoInputNoOutput: return "NoInputNoOutput";
        case IoCapability::KeyboardDisplay: return "KeyboardDisplay";
    }
    return "unknown";
}

std::string_view to_string(PairingMethod m) {
    switch (m) {
        case PairingMethod::JustWorks: return "JustWorks";
        case PairingMethod::PasskeyEntry: return "PasskeyEntry";
        case PairingMethod::OutOfBand: return "OutOfBand";
    }
    return "unknown";
}

std::optional<IoCapability> parse_io_capability(std::string_view s) {
    for (auto io : {IoCapability::DisplayOnly, IoCapability::KeyboardOnly, IoCapability::NoInputNoOutput,
                    IoCapability::KeyboardDisplay})
        if (s == to_string(io)) return io;
    return std::nullopt;
}

std::string_view to_string(Failure f) {
    switch (f) {
        case Failure::None: return "none";
        case Failure::ConfirmMismatch: return "confirm-mismatch";
        case Failure::MicFailure: return "mic-failure";
        case Failure::OutOfOrder: return "out-of-order";
        case Failure::Malformed: return "malformed";
        case Failure::Timeout: return "timeout";
        case Failure::InvalidConfig: return "invalid-config";
    }
    return "unknown";
}

PairingMethod select_method(IoCapability initiator, IoCapability responder, bool oob_available) {
    if (oob_available) return PairingMethod::OutOfBand;
    if ((has_keyboard(initiator) && has_display(responder)) ||
        (has_keyboard(responder) && has_display(initiator)))
        return PairingMethod::PasskeyEntry;
    return PairingMethod::JustWorks;
}

SecretKey128 derive_tk(PairingMethod method, std::optional<std::uint32_t> passkey,
                       const std::optional<SecretKey128>& oob_value) {
    switch (method) {
        case PairingMethod::JustWorks:
            return SecretKey128{};
        case PairingMethod::PasskeyEntry: {
            if (!passkey) throw InvalidInput("passkey entry requires a passkey");
            if (*passkey > kMaxPasskey)
                throw InvalidInput("passkey " + std::to_string(*passkey) + " is outside 0..999999");
            Block b{};
            store_be32(b.data() + 12, *passkey);
            return SecretKey128(b);
        }
        case PairingMethod::OutOfBand:
            if (!oob_value) throw InvalidInput("out-of-band pairing requires an OOB value");
            return *oob_value;
    }
    throw InvalidInput("unknown pairing method");
}

Block confirm_value(const SecretKey128& tk, const Block& rand) { return cipher::Aes128(tk).encrypt(rand); }

SecretKey128 derive_stk(const SecretKey128& tk, const Block& mrand, const Block& srand) {
    Block r{};
    std::copy(srand.begin() + 8, srand.end(), r.begin());
    std::copy(mrand.begin() + 8, mrand.end(), r.begin() + 8);
    return SecretKey128(cipher::Aes128(tk).encrypt(r));
}

std::array<std::uint8_t, 6> private_address(const SecretKey128& irk,
                                            const std::array<std::uint8_t, 6>& public_address) {
    Block in{};
    std::copy(public_address.begin(), public_address.end(), in.begin());
    const Block out = cipher::Aes128(irk).encrypt(in);
    std::array<std::uint8_t, 6> addr{};
    std::copy_n(out.begin(), 6, addr.begin());
    return addr;
}

PairingSession::PairingSession(Role role, PairingConfig config)
    : role_(role), config_(config), rng_(config.seed ^ (role == Role::Initiator ? 0x1111 : 0x2222)) {}

Block PairingSession::random_block() { return SecretKey128::random(rng_).bytes(); }

std::vector<Frame> PairingSession::fail(Failure why, std::string detail) {
    state_ = State::Failed;
    failure_ = why;
    stk_.reset();
    keys_.reset();
    log_.push_back({"pairing-failed", std::string(to_string(why)) + (detail.empty() ? "" : ": " + detail)});
    return {};
}

std::vector<Frame> PairingSession::start() {
    if (state_ != State::Idle) return {};
    if (role_ == Role::Responder) {
        state_ = State::AwaitReq;
        return {};
    }
    state_ = State::AwaitRsp;
    log_.push_back({"phase1", "sent PAIR_REQ"});
    return {features_frame(FrameKind::PairReq, config_)};
}

void PairingSession::on_timeout() {
    if (state_ != State::Complete && state_ != State::Failed) fail(Failure::Timeout, "peer went silent");
}

bool PairingSession::prepare_tk() {
    try {
        tk_ = derive_tk(*method_, config_.passkey, config_.oob_value);
        return true;
    } catch (const InvalidInput& e) {
        fail(Failure::InvalidConfig, e.what());
        return false;
    }
}

std::vector<Frame> PairingSession::handle(const Frame& frame) {
    if (state_ == State::Complete || state_ == State::Failed) return {};
    switch (frame.kind) {
        case FrameKind::PairReq:
        case FrameKind::PairRsp: return on_features(frame);
        case FrameKind::PairConfirm: return on_confirm(frame);
        case FrameKind::PairRandom: return on_random(frame);
        case FrameKind::KeyDist: return on_key(frame);
        default: return fail(Failure::OutOfOrder, "unexpected " + std::string(transport::to_string(frame.kind)));
    }
}

std::vector<Frame> PairingSession::on_features(const Frame& f) {
    const bool expected = role_ == Role::Initiator
                              ? (state_ == State::AwaitRsp && f.kind == FrameKind::PairRsp)
                              : (state_ == State::AwaitReq && f.kind == FrameKind::PairReq);
    if (!expected) return fail(Failure::OutOfOrder, std::string(transport::to_string(f.kind)) + " out of phase");
    const auto peer = parse_features(f);
    if (!peer) return fail(Failure::Malformed, "bad feature exchange payload");

    const auto [init_io, resp_io] = role_ == Role::Initiator ? std::pair{config_.io, peer->io}
                                                             : std::pair{peer->io, config_.io};
    method_ = select_method(init_io, resp_io, config_.oob && peer->oob);
    log_.push_back({"phase1", "method " + std::string(to_string(*method_))});
    if (!prepare_tk()) return {};

    if (role_ == Role::Responder) {
        state_ = State::AwaitConfirm;
        return {features_frame(FrameKind::PairRsp, config_)};
    }
    local_rand_ = random_block();
    state_ = State::AwaitConfirm;
    return {block_frame(FrameKind::PairConfirm, confirm_value(tk_, local_rand_))};
}

std::vector<Frame> PairingSession::on_confirm(const Frame& f) {
    if (state_ != State::AwaitConfirm) return fail(Failure::OutOfOrder, "PAIR_CONFIRM out of phase");
    const auto c = parse_block(f);
    if (!c) return fail(Failure::Malformed, "confirm must be 16 octets");
    peer_confirm_ = *c;
    state_ = State::AwaitRandom;
    if (role_ == Role::Responder) {
        local_rand_ = random_block();
        return {block_frame(FrameKind::PairConfirm, confirm_value(tk_, local_rand_))};
    }
    return {block_frame(FrameKind::PairRandom, local_rand_)};
}

std::vector<Frame> PairingSession::on_random(const Frame& f) {
    if (state_ != State::AwaitRandom) return fail(Failure::OutOfOrder, "PAIR_RANDOM out of phase");
    const auto peer_rand = parse_block(f);
    if (!peer_rand) return fail(Failure::Malformed, "random must be 16 octets");
    if (!constant_time_equal(confirm_value(tk_, *peer_rand), peer_confirm_))
        return fail(Failure::ConfirmMismatch, "peer random does not match its confirm");

    const Block& mrand = role_ == Role::Initiator ? local_rand_ : *peer_rand;
    const Block& srand = role_ == Role::Initiator ? *peer_rand : local_rand_;
    stk_ = derive_stk(tk_, mrand, srand);
    log_.push_back({"phase2", "STK agreed"});

    if (role_ == Role::Initiator) {
        state_ = State::AwaitKeys;
        return {};
    }
    std::vector<Frame> out{block_frame(FrameKind::PairRandom, local_rand_)};
    for (auto& k : distribute_keys()) out.push_back(std::move(k));
    return out;
}

std::vector<Frame> PairingSession::distribute_keys() {
    SessionKeys keys;
    keys.stk = *stk_;
    do {
        keys.ltk = SecretKey128::random(rng_);
        keys.csrk = SecretKey128::random(rng_);
        keys.irk = SecretKey128::random(rng_);
    } while (keys.ltk == keys.csrk || keys.csrk == keys.irk || keys.ltk == keys.irk);

    std::vector<Frame> out;
    const std::pair<KeyId, const SecretKey128*> order[] = {
        {KeyId::Ltk, &keys.ltk}, {KeyId::Csrk, &keys.csrk}, {KeyId::Irk, &keys.irk}};
    for (const auto& [id, key] : order) {
        const auto env = cipher::ccm_seal(*stk_, static_cast<std::uint64_t>(id), key->bytes());
        Bytes payload{static_cast<std::uint8_t>(id)};
        const Bytes wire = cipher::serialize(env);
        payload.insert(payload.end(), wire.begin(), wire.end());
        out.push_back(Frame{FrameKind::KeyDist, std::move(payload)});
    }
    keys_ = keys;
    finish();
    return out;
}

std::vector<Frame> PairingSession::on_key(const Frame& f) {
    if (role_ != Role::Initiator || state_ != State::AwaitKeys)
        return fail(Failure::OutOfOrder, "KEY_DIST out of phase");
    if (f.payload.empty()) return fail(Failure::Malformed, "empty KEY_DIST");
    const auto expected_id = static_cast<std::uint8_t>(keys_received_ + 1);
    if (f.payload[0] != expected_id)
        return fail(Failure::OutOfOrder, "key id " + std::to_string(f.payload[0]) + " out of sequence");

    Bytes key_bytes;
    try {
        const auto env = cipher::deserialize_envelope(ByteView(f.payload).subspan(1));
        if (env.counter != expected_id) return fail(Failure::OutOfOrder, "key counter out of sequence");
        key_bytes = cipher::ccm_open(*stk_, env);
    } catch (const AuthenticationFailure&) {
        return fail(Failure::MicFailure, "KEY_DIST MIC did not verify under STK");
    } catch (const MalformedEnvelope& e) {
        return fail(Failure::Malformed, e.what());
    }
    if (key_bytes.size() != cipher::kBlockSize) return fail(Failure::Malformed, "distributed key not 16 octets");

    const auto key = SecretKey128::from_bytes(key_bytes);
    switch (static_cast<KeyId>(expected_id)) {
        case KeyId::Ltk: pending_.ltk = key; break;
        case KeyId::Csrk: pending_.csrk = key; break;
        case KeyId::Irk: pending_.irk = key; break;
    }
    if (++keys_received_ == 3) {
        pending_.stk = *stk_;
        keys_ = pending_;
        finish();
    }
    return {};
}

void PairingSession::finish() {
    state_ = State::Complete;
    log_.push_back({"phase3", "keys distributed"});
    log_.push_back({"private-address", to_hex(private_address(keys_->irk, config_.address))});
}

PairingResult run_pairing(transport::Link& link, const PairingConfig& initiator,
                          const PairingConfig& responder) {
    PairingResult r{PairingSession(Role::Initiator, initiator), PairingSession(Role::Responder, responder), {}};
    const auto first_entry = link.delivered().size();
    r.responder.start();
    for (auto& f : r.initiator.start()) link.initiator().send(std::move(f));

    bool progressed = true;
    while (progressed) {
        progressed = false;
        while (auto f = link.responder().try_recv()) {
            progressed = true;
            for (auto& out : r.responder.handle(*f)) link.responder().send(std::move(out));
        }
        while (auto f = link.initiator().try_recv()) {
            progressed = true;
            for (auto& out : r.initiator.handle(*f)) link.initiator().send(std::move(out));
        }
    }
    r.initiator.on_timeout();
    r.responder.on_timeout();
    const auto all = link.delivered();
    r.transcript.assign(all.begin() + static_cast<std::ptrdiff_t>(first_entry), all.end());
    return r;
}

ObservedTranscript observe(const std::vector<transport::TranscriptEntry>& frames) {
    ObservedTranscript t;
    for (const auto& e : frames) {
        const bool from_initiator = e.direction == transport::Direction::InitiatorToResponder;
        const Frame& f = e.frame;
        switch (f.kind) {
            case FrameKind::PairReq:
            case FrameKind::PairRsp:
                if (auto feat = parse_features(f)) {
                    (f.kind == FrameKind::PairReq ? t.initiator_io : t.responder_io) = feat->io;
                    (f.kind == FrameKind::PairReq ? t.initiator_oob : t.responder_oob) = feat->oob;
                }
                break;
            case FrameKind::PairConfirm:
                (from_initiator ? t.mconfirm : t.sconfirm) = parse_block(f);
                break;
            case FrameKind::PairRandom:
                (from_initiator ? t.mrand : t.srand) = parse_block(f);
                break;
            case FrameKind::KeyDist:
                if (f.payload.size() > 1 && f.payload[0] >= 1 && f.payload[0] <= 3) {
                    try {
                        t.key_dist.emplace_back(static_cast<KeyId>(f.payload[0]),
                                                cipher::deserialize_envelope(ByteView(f.payload).subspan(1)));
                    } catch (const MalformedEnvelope&) {
                    }
                }
                break;
            default:
                break;
        }
    }
    return t;
}

}  // namespace stegolock::pairing
