#include <algorithm>
#include <limits>

#include "json.hpp"
#include "stegolock/adversary.hpp"
#include "stegolock/errors.hpp"
#include "stegolock/png_io.hpp"
#include "stegolock/stego.hpp"

namespace stegolock::adversary {

using transport::Decision;
using transport::Direction;
using transport::FrameKind;

namespace {

Block random_block(std::mt19937_64& rng) { return SecretKey128::random(rng).bytes(); }

bool is_unlock_kind(FrameKind k) {
    return k == FrameKind::StegoImage || k == FrameKind::SignedData || k == FrameKind::PlaintextUnlock;
}

std::string make_passkey(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> digit(0, 9);
    std::string s = "pk-";
    for (int i = 0; i < 10; ++i) s.push_back(static_cast<char>('0' + digit(rng)));
    return s;
}

// Flips one bit the receiver must read: inside the embedded region for stego
// carriers, anywhere in the payload otherwise.
class TamperHook : public transport::Interceptor {
public:
    TamperHook(std::uint64_t seed) : rng_(seed) {}

    Decision on_frame(Direction dir, const Frame& frame, double) override {
        if (dir != Direction::InitiatorToResponder || !is_unlock_kind(frame.kind) || frame.payload.empty())
            return Decision::forward();
        ++tampered_;
        Frame out = frame;
        if (frame.kind == FrameKind::StegoImage) {
            try {
                auto img = png::decode(frame.payload);
                std::size_t region = stego::kHeaderBits;
                try {
                    region += 8 * stego::extract(img).size();
                } catch (const MalformedStego&) {
                }
                region = std::min(region, img.subpixel_count());
                img.subpixels()[rng_() % region] ^= 1;
                out.payload = png::encode(img);
                return Decision::modify(std::move(out));
            } catch (const IoError&) {
            }
        }
        const std::size_t bit = rng_() % (out.payload.size() * 8);
        out.payload[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        return Decision::modify(std::move(out));
    }

    std::size_t tampered() const { return tampered_; }

private:
    std::mt19937_64 rng_;
    std::size_t tampered_ = 0;
};

// Frame the attacker builds on its own once it holds the passkey (and, for the
// cipher modes, a leaked key).
std::optional<Frame> forge_request(ProtocolMode mode, ByteView passkey, const std::optional<SecretKey128>& key,
                                   std::uint64_t counter, std::uint64_t seed) {
    if (!lock::Passkey::is_valid(passkey)) return std::nullopt;
    const lock::Passkey pk(stegolock::to_string(passkey));
    const auto cover = stego::synthesize_cover(96, 64, seed ^ 0xa77ac4);
    if ((mode == ProtocolMode::CryptoOnly || mode == ProtocolMode::StegoCrypto) && !key) return std::nullopt;
    return lock::client_unlock(pk, cover, mode, key.value_or(SecretKey128{}), counter);
}

}  // namespace

std::string_view to_string(AttackScenario s) {
    switch (s) {
        case AttackScenario::PassiveEavesdrop: return "PASSIVE_EAVESDROP";
        case AttackScenario::ActiveKeySubstitution: return "ACTIVE_KEY_SUBSTITUTION";
        case AttackScenario::Tamper: return "TAMPER";
        case AttackScenario::Replay: return "REPLAY";
    }
    return "UNKNOWN";
}

std::optional<AttackScenario> parse_scenario(std::string_view s) {
    for (auto sc : {AttackScenario::PassiveEavesdrop, AttackScenario::ActiveKeySubstitution, AttackScenario::Tamper,
                    AttackScenario::Replay})
        if (s == to_string(sc)) return sc;
    if (s == "passive" || s == "passive-eavesdrop") return AttackScenario::PassiveEavesdrop;
    if (s == "key-substitution" || s == "active-key-substitution" || s == "active")
        return AttackScenario::ActiveKeySubstitution;
    if (s == "tamper") return AttackScenario::Tamper;
    if (s == "replay") return AttackScenario::Replay;
    return std::nullopt;
}

std::string to_json(const AttackReport& r) {
    nlohmann::ordered_json j;
    j["scenario"] = std::string(to_string(r.scenario));
    j["protocol_mode"] = std::string(lock::to_string(r.protocol_mode));
    j["passkey_recovered"] = r.passkey_recovered;
    j["unlock_granted_to_attacker"] = r.unlock_granted_to_attacker;
    j["tampers_attempted"] = r.tampers_attempted;
    j["tampers_detected"] = r.tampers_detected;
    j["stego_detected"] = r.stego_detected;
    j["secret_detected"] = r.secret_detected;
    j["seed"] = r.seed;
    j["key_leak"] = r.key_leak;
    j["frames_handled"] = r.frames_handled;
    j["audit_entries"] = r.audit_entries;
    j["relocks"] = r.relocks;
    return j.dump(2);
}

bool violates_guarantees(const AttackReport& r) {
    if (r.protocol_mode != ProtocolMode::StegoCrypto || r.key_leak) return false;
    return r.passkey_recovered || r.unlock_granted_to_attacker || r.tampers_detected != r.tampers_attempted;
}

StegDetection steg_detect(const Frame& frame) {
    if (frame.kind != FrameKind::StegoImage) return {};
    try {
        return {true, stego::extract(png::decode(frame.payload))};
    } catch (const MalformedStego&) {
    } catch (const IoError&) {
    } catch (const InvalidInput&) {
    }
    return {};
}

std::optional<Bytes> recover_passkey(const Frame& frame, ProtocolMode mode,
                                     const std::optional<SecretKey128>& leaked_key) {
    Bytes carried;
    switch (frame.kind) {
        case FrameKind::PlaintextUnlock:
            return frame.payload;
        case FrameKind::SignedData:
            carried = frame.payload;
            break;
        case FrameKind::StegoImage: {
            auto det = steg_detect(frame);
            if (!det.detected) return std::nullopt;
            if (mode == ProtocolMode::StegoOnly) return det.extracted;
            carried = std::move(det.extracted);
            break;
        }
        default:
            return std::nullopt;
    }
    if (!leaked_key) return std::nullopt;
    try {
        return cipher::ccm_open(*leaked_key, cipher::deserialize_envelope(carried));
    } catch (const Error&) {
        return std::nullopt;
    }
}

IdealPke::IdealPke(std::uint64_t seed)
    : rng_(seed),
      derive_pub_(SecretKey128::random(rng_)),
      derive_seal_(SecretKey128::random(rng_)) {}

IdealPke::KeyPair IdealPke::generate() {
    KeyPair kp;
    kp.secret = random_block(rng_);
    kp.pub = public_of(kp.secret);
    return kp;
}

Block IdealPke::public_of(const Block& secret) const { return derive_pub_.encrypt(secret); }

SecretKey128 IdealPke::sealing_key(const Block& pub) const { return SecretKey128(derive_seal_.encrypt(pub)); }

Bytes IdealPke::encrypt(const Block& recipient, std::uint64_t counter, ByteView message) const {
    Bytes out(recipient.begin(), recipient.end());
    const Bytes env = cipher::serialize(cipher::ccm_seal(sealing_key(recipient), counter, message));
    out.insert(out.end(), env.begin(), env.end());
    return out;
}

std::optional<Bytes> IdealPke::decrypt(const Block& secret, ByteView ciphertext) const {
    if (ciphertext.size() < cipher::kBlockSize) return std::nullopt;
    Block recipient{};
    std::copy_n(ciphertext.begin(), cipher::kBlockSize, recipient.begin());
    if (public_of(secret) != recipient) return std::nullopt;
    try {
        return cipher::ccm_open(sealing_key(recipient),
                                cipher::deserialize_envelope(ciphertext.subspan(cipher::kBlockSize)));
    } catch (const Error&) {
        return std::nullopt;
    }
}

KeySubstitutionRelay::KeySubstitutionRelay(IdealPke& pke, ProtocolMode lock_mode, std::uint64_t seed, bool honest)
    : pke_(pke), mode_(lock_mode), honest_(honest), own_(pke.generate()) {
    std::mt19937_64 rng(seed ^ 0x5eed);
    own_app_key_ = SecretKey128::random(rng);
}

Decision KeySubstitutionRelay::on_frame(Direction dir, const Frame& frame, double) {
    if (honest_) return Decision::forward();
    switch (frame.kind) {
        case FrameKind::KeyExchange: {
            if (frame.payload.size() != cipher::kBlockSize) return Decision::forward();
            Block genuine{};
            std::copy(frame.payload.begin(), frame.payload.end(), genuine.begin());
            genuine_pub_[dir] = genuine;
            ++rewritten_;
            return Decision::modify(Frame{FrameKind::KeyExchange, Bytes(own_.pub.begin(), own_.pub.end())});
        }
        case FrameKind::PkeData: {
            auto plain = pke_.decrypt(own_.secret, frame.payload);
            if (!plain) return Decision::forward();
            read_.push_back(*plain);
            // Re-encrypt to the peer that is actually on the other end.
            const Direction peer = dir == Direction::InitiatorToResponder ? Direction::ResponderToInitiator
                                                                          : Direction::InitiatorToResponder;
            const auto it = genuine_pub_.find(peer);
            if (it == genuine_pub_.end()) return Decision::forward();
            ++rewritten_;
            return Decision::modify(Frame{FrameKind::PkeData, pke_.encrypt(it->second, counter_++, *plain)});
        }
        default:
            if (dir != Direction::InitiatorToResponder || !is_unlock_kind(frame.kind)) return Decision::forward();
            return on_lock_frame(frame);
    }
}

Decision KeySubstitutionRelay::on_lock_frame(const Frame& frame) {
    if (frame.kind == FrameKind::PlaintextUnlock) {
        passkeys_.push_back(frame.payload);
        return Decision::forward();
    }
    std::optional<stego::RgbImage> carrier;
    Bytes carried = frame.payload;
    if (frame.kind == FrameKind::StegoImage) {
        try {
            carrier = png::decode(frame.payload);
            carried = stego::extract(*carrier);
        } catch (const Error&) {
            return Decision::forward();
        }
        if (mode_ == ProtocolMode::StegoOnly) {
            passkeys_.push_back(carried);
            return Decision::forward();
        }
    }

    // E1 -> E2: open with the key the attacker believes it negotiated, re-seal.
    cipher::CipherEnvelope env;
    try {
        env = cipher::deserialize_envelope(carried);
    } catch (const MalformedEnvelope&) {
        return Decision::forward();
    }
    Bytes message;
    try {
        message = cipher::ccm_open(own_app_key_, env);
        passkeys_.push_back(message);
    } catch (const AuthenticationFailure&) {
        message = env.ciphertext;  // unreadable; pass the bytes on under the attacker's key
    }
    const Bytes resealed = cipher::serialize(cipher::ccm_seal(own_app_key_, env.counter, message));
    ++rewritten_;
    if (carrier) return Decision::modify(Frame{FrameKind::StegoImage, png::encode(stego::embed(*carrier, resealed))});
    return Decision::modify(Frame{FrameKind::SignedData, resealed});
}

std::shared_ptr<KeySubstitutionRelay> key_substitution_relay(IdealPke& pke, ProtocolMode lock_mode,
                                                             std::uint64_t seed, bool honest) {
    return std::make_shared<KeySubstitutionRelay>(pke, lock_mode, seed, honest);
}

BaselineOutcome run_key_exchange_baseline(std::uint64_t seed, RelayKind relay_kind, ByteView message) {
    IdealPke pke(seed);
    const auto victim1 = pke.generate();
    const auto victim2 = pke.generate();
    transport::Link link(transport::ChannelModel{10.0, 0.01, seed});
    std::shared_ptr<KeySubstitutionRelay> relay;
    if (relay_kind != RelayKind::None) {
        relay = key_substitution_relay(pke, ProtocolMode::StegoCrypto, seed, relay_kind == RelayKind::Identity);
        link.attach_interceptor(relay);
    }

    auto block_of = [](const Frame& f) {
        Block b{};
        std::copy_n(f.payload.begin(), std::min(f.payload.size(), b.size()), b.begin());
        return b;
    };
    link.initiator().send(Frame{FrameKind::KeyExchange, Bytes(victim1.pub.begin(), victim1.pub.end())});
    link.responder().recv();
    link.responder().send(Frame{FrameKind::KeyExchange, Bytes(victim2.pub.begin(), victim2.pub.end())});
    const Block v1_view_of_peer = block_of(link.initiator().recv());

    link.initiator().send(Frame{FrameKind::PkeData, pke.encrypt(v1_view_of_peer, 1, message)});
    const auto received = pke.decrypt(victim2.secret, link.responder().recv().payload);

    BaselineOutcome out;
    out.message.assign(message.begin(), message.end());
    out.victim2_decrypted = received.has_value();
    out.victim2_got_original = received && *received == out.message;
    if (relay) {
        const auto& seen = relay->intercepted_messages();
        out.attacker_read_message = std::find(seen.begin(), seen.end(), out.message) != seen.end();
        out.attacker_key_in_use = v1_view_of_peer == relay->own_keys().pub;
    }
    return out;
}

StkRecovery recover_stk(const pairing::ObservedTranscript& t) {
    StkRecovery r;
    if (!t.initiator_io || !t.responder_io || !t.mconfirm || !t.mrand || !t.srand) return r;
    r.method = pairing::select_method(*t.initiator_io, *t.responder_io, t.initiator_oob && t.responder_oob);

    SecretKey128 tk;
    switch (r.method) {
        case pairing::PairingMethod::OutOfBand:
            return r;
        case pairing::PairingMethod::JustWorks:
            r.candidates_tried = 1;
            if (pairing::confirm_value(tk, *t.mrand) != *t.mconfirm) return r;
            break;
        case pairing::PairingMethod::PasskeyEntry: {
            const Block mrand = *t.mrand;
            const Block mconfirm = *t.mconfirm;
            constexpr std::int64_t kNone = std::numeric_limits<std::int64_t>::max();
            std::int64_t found = kNone;
#pragma omp parallel for schedule(static) reduction(min : found)
            for (std::int64_t candidate = 0; candidate <= pairing::kMaxPasskey; ++candidate) {
                if (found != kNone) continue;
                const auto key = pairing::derive_tk(pairing::PairingMethod::PasskeyEntry,
                                                    static_cast<std::uint32_t>(candidate));
                if (pairing::confirm_value(key, mrand) == mconfirm) found = candidate;
            }
            if (found == kNone) {
                r.candidates_tried = pairing::kMaxPasskey + 1;
                return r;
            }
            r.candidates_tried = static_cast<std::size_t>(found) + 1;
            r.passkey = static_cast<std::uint32_t>(found);
            tk = pairing::derive_tk(pairing::PairingMethod::PasskeyEntry, r.passkey);
            break;
        }
    }
    r.stk = pairing::derive_stk(tk, *t.mrand, *t.srand);
    r.recovered = true;
    for (const auto& [id, env] : t.key_dist) {
        if (id != pairing::KeyId::Ltk) continue;
        try {
            r.ltk = SecretKey128::from_bytes(cipher::ccm_open(r.stk, env));
        } catch (const Error&) {
        }
    }
    return r;
}

AttackReport run_attack(AttackScenario scenario, ProtocolMode mode, std::uint64_t seed) {
    AttackConfig cfg;
    cfg.scenario = scenario;
    cfg.mode = mode;
    cfg.seed = seed;
    return run_attack(cfg);
}

AttackReport run_attack(const AttackConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    const lock::Passkey passkey(make_passkey(rng));
    const Bytes truth(passkey.bytes().begin(), passkey.bytes().end());
    const auto record = lock::enroll(passkey, rng(), cfg.mode);
    auto channel = cfg.channel;
    channel.seed = cfg.seed;
    lock::LockSession session(record, passkey, channel);
    const auto cover = stego::synthesize_cover(cfg.cover_width, cfg.cover_height, cfg.seed);
    const std::optional<SecretKey128> leaked =
        cfg.key_leak ? std::optional<SecretKey128>(record.shared_key) : std::nullopt;
    const double pause = record.relock_after + 1.0;

    AttackReport r;
    r.scenario = cfg.scenario;
    r.protocol_mode = cfg.mode;
    r.seed = cfg.seed;
    r.key_leak = cfg.key_leak;

    std::shared_ptr<KeySubstitutionRelay> relay;
    IdealPke pke(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    switch (cfg.scenario) {
        case AttackScenario::PassiveEavesdrop:
            session.unlock(cover);
            break;
        case AttackScenario::ActiveKeySubstitution: {
            relay = key_substitution_relay(pke, cfg.mode, cfg.seed);
            session.link().attach_interceptor(relay);
            // Abstract public-key handshake ahead of the session; the lock's app key is
            // enrolled, so the substituted keys never reach the cipher layer.
            const auto client_pair = pke.generate();
            const auto lock_pair = pke.generate();
            auto& link = session.link();
            link.initiator().send(Frame{FrameKind::KeyExchange, Bytes(client_pair.pub.begin(), client_pair.pub.end())});
            link.responder().recv();
            link.responder().send(Frame{FrameKind::KeyExchange, Bytes(lock_pair.pub.begin(), lock_pair.pub.end())});
            link.initiator().recv();

            const std::size_t before = relay->frames_rewritten();
            const auto d = session.unlock(cover);
            if (d.granted && relay->frames_rewritten() > before) r.unlock_granted_to_attacker = true;
            session.link().detach_interceptor();
            for (const auto& p : relay->recovered_passkeys())
                if (p == truth) r.passkey_recovered = true;
            break;
        }
        case AttackScenario::Tamper: {
            auto hook = std::make_shared<TamperHook>(cfg.seed ^ 0x7a3e);
            session.link().attach_interceptor(hook);
            for (std::size_t i = 0; i < cfg.tamper_trials; ++i) {
                const auto d = session.unlock(cover);
                if (d.granted)
                    r.unlock_granted_to_attacker = true;
                else
                    ++r.tampers_detected;
                session.idle(pause);
            }
            r.tampers_attempted = hook->tampered();
            session.link().detach_interceptor();
            break;
        }
        case AttackScenario::Replay: {
            session.unlock(cover);
            std::optional<Frame> captured;
            for (const auto& e : session.link().sent())
                if (e.direction == Direction::InitiatorToResponder && is_unlock_kind(e.frame.kind)) captured = e.frame;
            session.idle(pause);
            if (captured) {
                session.link().inject(Direction::InitiatorToResponder, *captured);
                for (const auto& d : session.serve_pending())
                    if (d.granted) r.unlock_granted_to_attacker = true;
            }
            break;
        }
    }

    // Everything the client put on the air is visible to the attacker.
    std::uint64_t max_counter = 0;
    for (const auto& e : session.link().sent()) {
        if (e.direction != Direction::InitiatorToResponder || !is_unlock_kind(e.frame.kind)) continue;
        if (e.frame.kind == FrameKind::StegoImage && steg_detect(e.frame).detected) r.stego_detected = true;
        if (const auto rec = recover_passkey(e.frame, cfg.mode, leaked); rec && *rec == truth)
            r.passkey_recovered = true;
    }
    max_counter = session.controller().last_seen_counter();
    r.secret_detected = lock::uses_stego(cfg.mode) ? r.stego_detected : true;

    // Exploit what was learned with a request of the attacker's own.
    if (r.passkey_recovered) {
        session.idle(pause);
        if (auto forged = forge_request(cfg.mode, truth, leaked, max_counter + 1, cfg.seed)) {
            session.link().inject(Direction::InitiatorToResponder, *forged);
            for (const auto& d : session.serve_pending())
                if (d.granted) r.unlock_granted_to_attacker = true;
        }
    }
    session.idle(pause);

    r.frames_handled = session.controller().frames_handled();
    r.audit_entries = session.controller().audit().entries().size();
    r.relocks = session.controller().audit().count(lock::AuditKind::Relock);
    return r;
}

}  // namespace stegolock::adversary
