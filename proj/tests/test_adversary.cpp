#include "doctest.h"
#include "stegolock/adversary.hpp"
#include "stegolock/png_io.hpp"
#include "stegolock/stego.hpp"

using namespace stegolock;
using namespace stegolock::adversary;
using lock::ProtocolMode;
using transport::Frame;
using transport::FrameKind;

namespace {

constexpr ProtocolMode kModes[] = {ProtocolMode::Plaintext, ProtocolMode::CryptoOnly, ProtocolMode::StegoOnly,
                                   ProtocolMode::StegoCrypto};

AttackConfig config(AttackScenario s, ProtocolMode m, std::size_t trials = 50) {
    AttackConfig c;
    c.scenario = s;
    c.mode = m;
    c.seed = 7;
    c.tamper_trials = trials;
    return c;
}

}  // namespace

TEST_CASE("scenario names") {
    for (auto s : {AttackScenario::PassiveEavesdrop, AttackScenario::ActiveKeySubstitution, AttackScenario::Tamper,
                   AttackScenario::Replay})
        CHECK(parse_scenario(to_string(s)) == s);
    CHECK(parse_scenario("tamper") == AttackScenario::Tamper);
    CHECK(parse_scenario("key-substitution") == AttackScenario::ActiveKeySubstitution);
    CHECK_FALSE(parse_scenario("jam"));
}

TEST_CASE("passive eavesdrop per mode") {
    auto plain = run_attack(AttackScenario::PassiveEavesdrop, ProtocolMode::Plaintext, 3);
    CHECK(plain.passkey_recovered);
    CHECK(plain.unlock_granted_to_attacker);

    auto so = run_attack(AttackScenario::PassiveEavesdrop, ProtocolMode::StegoOnly, 3);
    CHECK(so.stego_detected);
    CHECK(so.passkey_recovered);

    auto co = run_attack(AttackScenario::PassiveEavesdrop, ProtocolMode::CryptoOnly, 3);
    CHECK_FALSE(co.passkey_recovered);
    CHECK(co.secret_detected);

    auto sc = run_attack(AttackScenario::PassiveEavesdrop, ProtocolMode::StegoCrypto, 3);
    CHECK(sc.stego_detected);
    CHECK_FALSE(sc.passkey_recovered);
    CHECK_FALSE(sc.unlock_granted_to_attacker);
    CHECK_FALSE(violates_guarantees(sc));
}

TEST_CASE("key leak exposes cipher modes") {
    auto c = config(AttackScenario::PassiveEavesdrop, ProtocolMode::CryptoOnly);
    c.key_leak = true;
    auto r = run_attack(c);
    CHECK(r.passkey_recovered);
    CHECK(r.unlock_granted_to_attacker);

    c.mode = ProtocolMode::StegoCrypto;
    r = run_attack(c);
    CHECK(r.passkey_recovered);
    CHECK_FALSE(violates_guarantees(r));  // leak is outside the guarantee
}

TEST_CASE("stego-crypto holds against every scenario") {
    for (auto s : {AttackScenario::PassiveEavesdrop, AttackScenario::ActiveKeySubstitution, AttackScenario::Tamper,
                   AttackScenario::Replay}) {
        CAPTURE(to_string(s));
        auto r = run_attack(config(s, ProtocolMode::StegoCrypto));
        CHECK_FALSE(r.passkey_recovered);
        CHECK_FALSE(r.unlock_granted_to_attacker);
        CHECK(r.tampers_detected <= r.tampers_attempted);
        CHECK_FALSE(violates_guarantees(r));
        CHECK(r.audit_entries == r.frames_handled + r.relocks);
    }
}

TEST_CASE("tamper is detected in every mode") {
    for (auto m : kModes) {
        CAPTURE(lock::to_string(m));
        auto r = run_attack(config(AttackScenario::Tamper, m, 40));
        CHECK(r.tampers_attempted == 40);
        CHECK(r.tampers_detected == 40);
        // Without a cipher layer the untouched original still leaks the passkey.
        const bool exposed = m == ProtocolMode::Plaintext || m == ProtocolMode::StegoOnly;
        CHECK(r.unlock_granted_to_attacker == exposed);
    }
}

TEST_CASE("tamper 1000 against stego-crypto") {
    auto r = run_attack(config(AttackScenario::Tamper, ProtocolMode::StegoCrypto, 1000));
    CHECK(r.tampers_attempted == 1000);
    CHECK(r.tampers_detected == 1000);
    CHECK_FALSE(r.unlock_granted_to_attacker);
}

TEST_CASE("replay succeeds only without counters") {
    CHECK(run_attack(AttackScenario::Replay, ProtocolMode::Plaintext, 5).unlock_granted_to_attacker);
    CHECK(run_attack(AttackScenario::Replay, ProtocolMode::StegoOnly, 5).unlock_granted_to_attacker);
    CHECK_FALSE(run_attack(AttackScenario::Replay, ProtocolMode::CryptoOnly, 5).unlock_granted_to_attacker);
    CHECK_FALSE(run_attack(AttackScenario::Replay, ProtocolMode::StegoCrypto, 5).unlock_granted_to_attacker);
}

TEST_CASE("active relay against the enrolled pipeline") {
    auto plain = run_attack(AttackScenario::ActiveKeySubstitution, ProtocolMode::Plaintext, 9);
    CHECK(plain.passkey_recovered);
    auto sc = run_attack(AttackScenario::ActiveKeySubstitution, ProtocolMode::StegoCrypto, 9);
    CHECK_FALSE(sc.passkey_recovered);
    CHECK_FALSE(sc.unlock_granted_to_attacker);
    auto co = run_attack(AttackScenario::ActiveKeySubstitution, ProtocolMode::CryptoOnly, 9);
    CHECK_FALSE(co.unlock_granted_to_attacker);
}

TEST_CASE("relay rewrite surfaces as auth-failure") {
    const lock::Passkey pk("open sesame");
    const auto rec = lock::enroll(pk, 4, ProtocolMode::StegoCrypto);
    lock::LockSession session(rec, pk, transport::ChannelModel{});
    IdealPke pke(4);
    auto relay = key_substitution_relay(pke, ProtocolMode::StegoCrypto, 4);
    session.link().attach_interceptor(relay);
    const auto d = session.unlock(stego::synthesize_cover(64, 64, 4));
    CHECK_FALSE(d.granted);
    CHECK(d.kind == lock::AuditKind::AuthFailure);
    CHECK(relay->frames_rewritten() == 1);
}

TEST_CASE("reports are deterministic per seed") {
    for (auto s : {AttackScenario::PassiveEavesdrop, AttackScenario::Tamper, AttackScenario::Replay,
                   AttackScenario::ActiveKeySubstitution})
        CHECK(to_json(run_attack(config(s, ProtocolMode::StegoCrypto, 20))) ==
              to_json(run_attack(config(s, ProtocolMode::StegoCrypto, 20))));
}

TEST_CASE("report json field names") {
    const auto j = to_json(run_attack(AttackScenario::Tamper, ProtocolMode::StegoCrypto, 2));
    for (const char* k : {"\"scenario\"", "\"protocol_mode\"", "\"passkey_recovered\"", "\"unlock_granted_to_attacker\"",
                          "\"tampers_attempted\"", "\"tampers_detected\"", "\"stego_detected\""})
        CHECK(j.find(k) != std::string::npos);
    CHECK(j.find("\"TAMPER\"") != std::string::npos);
    CHECK(j.find("\"stego-crypto\"") != std::string::npos);
}

TEST_CASE("baseline exchange deceives both victims") {
    const Bytes msg = Bytes(as_bytes("meet at the east gate").begin(), as_bytes("meet at the east gate").end());

    auto none = run_key_exchange_baseline(11, RelayKind::None, msg);
    CHECK(none.victim2_got_original);
    CHECK_FALSE(none.attacker_read_message);

    auto mitm = run_key_exchange_baseline(11, RelayKind::Substituting, msg);
    CHECK(mitm.attacker_read_message);
    CHECK(mitm.victim2_decrypted);
    CHECK(mitm.victim2_got_original);
    CHECK(mitm.attacker_key_in_use);
    CHECK(mitm.both_deceived());

    auto ident = run_key_exchange_baseline(11, RelayKind::Identity, msg);
    CHECK_FALSE(ident.attacker_read_message);
    CHECK(ident.victim2_got_original);
    CHECK_FALSE(ident.attacker_key_in_use);
}

TEST_CASE("ideal pke only opens for the matching secret") {
    IdealPke pke(2);
    auto a = pke.generate();
    auto b = pke.generate();
    const Bytes msg = Bytes(as_bytes("hello").begin(), as_bytes("hello").end());
    const auto ct = pke.encrypt(a.pub, 1, msg);
    CHECK(pke.decrypt(a.secret, ct) == msg);
    CHECK_FALSE(pke.decrypt(b.secret, ct));
    Bytes bad = ct;
    bad.back() ^= 1;
    CHECK_FALSE(pke.decrypt(a.secret, bad));
}

TEST_CASE("identity relay leaves the audit log untouched") {
    for (auto m : kModes) {
        auto run = [&](bool with_relay) {
            const lock::Passkey pk("correct horse");
            const auto rec = lock::enroll(pk, 21, m);
            lock::LockSession s(rec, pk, transport::ChannelModel{8.0, 0.02, 21});
            IdealPke pke(21);
            if (with_relay) s.link().attach_interceptor(key_substitution_relay(pke, m, 21, true));
            const auto cover = stego::synthesize_cover(80, 60, 21);
            s.unlock(cover);
            s.idle(10);
            s.unlock(cover);
            return s.controller().audit().to_jsonl();
        };
        CHECK(run(false) == run(true));
    }
}

TEST_CASE("steg_detect") {
    const auto cover = stego::synthesize_cover(40, 40, 1);
    const Bytes payload = Bytes(as_bytes("inside").begin(), as_bytes("inside").end());
    Frame f{FrameKind::StegoImage, png::encode(stego::embed(cover, payload))};
    auto det = steg_detect(f);
    CHECK(det.detected);
    CHECK(det.extracted == payload);

    // Random cover: header decodes to a length far past capacity.
    auto random_img = stego::synthesize_cover(40, 40, 99);
    random_img.subpixels()[0] |= 1;
    CHECK_FALSE(steg_detect(Frame{FrameKind::StegoImage, png::encode(random_img)}).detected);
    CHECK_FALSE(steg_detect(Frame{FrameKind::StegoImage, Bytes(as_bytes("not a png").begin(), as_bytes("not a png").end())}).detected);
    CHECK_FALSE(steg_detect(Frame{FrameKind::SignedData, f.payload}).detected);
}

TEST_CASE("justworks stk recovered from a captured transcript") {
    pairing::PairingConfig a, b;
    a.seed = 31;
    b.seed = 32;
    transport::Link link(transport::ChannelModel{});
    auto res = pairing::run_pairing(link, a, b);
    REQUIRE(res.success());
    auto rec = recover_stk(pairing::observe(res.transcript));
    CHECK(rec.recovered);
    CHECK(rec.method == pairing::PairingMethod::JustWorks);
    CHECK(rec.stk == res.initiator.keys()->stk);
    REQUIRE(rec.ltk);
    CHECK(*rec.ltk == res.initiator.keys()->ltk);
}

TEST_CASE("passkey entry falls to a brute-force search") {
    pairing::PairingConfig a, b;
    a.io = pairing::IoCapability::KeyboardOnly;
    b.io = pairing::IoCapability::DisplayOnly;
    a.passkey = b.passkey = 4321;
    a.seed = 41;
    b.seed = 42;
    transport::Link link(transport::ChannelModel{});
    auto res = pairing::run_pairing(link, a, b);
    REQUIRE(res.success());
    auto rec = recover_stk(pairing::observe(res.transcript));
    CHECK(rec.recovered);
    CHECK(rec.passkey == 4321);
    CHECK(rec.stk == res.responder.keys()->stk);
}

TEST_CASE("oob pairing resists the passive observer") {
    pairing::PairingConfig a, b;
    a.oob = b.oob = true;
    a.oob_value = b.oob_value = SecretKey128::from_hex("00112233445566778899aabbccddeeff");
    a.seed = 51;
    b.seed = 52;
    transport::Link link(transport::ChannelModel{});
    auto res = pairing::run_pairing(link, a, b);
    REQUIRE(res.success());
    auto rec = recover_stk(pairing::observe(res.transcript));
    CHECK_FALSE(rec.recovered);
    CHECK(rec.method == pairing::PairingMethod::OutOfBand);
}
