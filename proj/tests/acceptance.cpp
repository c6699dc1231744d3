// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stegolock/adversary.hpp"
#include "stegolock/bench.hpp"
#include "stegolock/cipher.hpp"
#include "stegolock/errors.hpp"
#include "stegolock/lockproto.hpp"
#include "stegolock/pairing.hpp"
#include "stegolock/png_io.hpp"
#include "stegolock/stego.hpp"

using namespace stegolock;
using lock::ProtocolMode;
using transport::Direction;
using transport::Frame;
using transport::FrameKind;

namespace {

constexpr double kCryptoBudgetS = 10.0;
constexpr double kStegoBudgetS = 30.0;
constexpr int kCryptoTrials = 10000;
constexpr int kStegoPairs = 100;
constexpr std::size_t kTamperTrials = 1000;
constexpr double kMinR2 = 0.95;
constexpr double kMaxRelErr = 0.30;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

// 1
Outcome crypto_correctness() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();

    const auto ct = cipher::aes128_encrypt_block(cipher::SecretKey128::from_hex("000102030405060708090a0b0c0d0e0f"),
                                                 from_hex("00112233445566778899aabbccddeeff"));
    o.require(to_hex(ct) == "69c4e0d86a7b0430d8cdb78070b4c55a", "known-answer vector");

    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> len(1, 512);
    int round_trips = 0, rejected = 0;
    for (int i = 0; i < kCryptoTrials; ++i) {
        const auto key = cipher::SecretKey128::random(rng);
        Bytes msg(len(rng));
        for (auto& b : msg) b = static_cast<std::uint8_t>(rng());
        const std::uint64_t counter = rng() | 1;
        const auto env = cipher::ccm_seal(key, counter, msg);
        if (cipher::ccm_open(key, env) == msg) ++round_trips;

        Bytes wire = cipher::serialize(env);
        const std::size_t bit = rng() % (wire.size() * 8);
        wire[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        try {
            cipher::ccm_open(key, cipher::deserialize_envelope(wire));
        } catch (const AuthenticationFailure&) {
            ++rejected;
        } catch (const MalformedEnvelope&) {
            ++rejected;
        }
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(round_trips == kCryptoTrials, "round trips " + std::to_string(round_trips));
    o.require(rejected == kCryptoTrials, "tampers rejected " + std::to_string(rejected));
    o.require(elapsed < kCryptoBudgetS, "runtime " + std::to_string(elapsed) + " s");
    if (o.pass)
        o.detail = "KAT ok, " + std::to_string(round_trips) + " round trips, " + std::to_string(rejected) +
                   " tampers rejected, " + std::to_string(elapsed) + " s";
    return o;
}

// 2
Outcome stego_fidelity() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> dim(16, 320);
    std::size_t worst_delta = 0;
    for (int i = 0; i < kStegoPairs; ++i) {
        const std::size_t w = dim(rng), h = dim(rng);
        const auto cover = stego::synthesize_cover(w, h, rng());
        const std::size_t cap = stego::capacity(cover);
        Bytes payload(1 + rng() % cap);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng());

        // Through the PNG codec, as on the wire.
        const auto stego_img = png::decode(png::encode(stego::embed(cover, payload)));
        const auto stats = stego::measure(cover, stego_img);
        worst_delta = std::max<std::size_t>(worst_delta, stats.max_channel_delta);
        o.require(stats.max_channel_delta <= 1, "delta > 1 at pair " + std::to_string(i));
        o.require(stats.changed_subpixels <= 32 + 8 * payload.size(), "too many changes at pair " + std::to_string(i));
        o.require(stego::extract(stego_img) == payload, "extract mismatch at pair " + std::to_string(i));
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(elapsed < kStegoBudgetS, "runtime " + std::to_string(elapsed) + " s");
    if (o.pass)
        o.detail = std::to_string(kStegoPairs) + " pairs, max delta " + std::to_string(worst_delta) + ", " +
                   std::to_string(elapsed) + " s";
    return o;
}

// 3
Outcome attack_matrix() {
    Outcome o;
    using adversary::AttackScenario;
    auto run = [](AttackScenario s, ProtocolMode m) {
        adversary::AttackConfig c;
        c.scenario = s;
        c.mode = m;
        c.seed = 1;
        c.tamper_trials = kTamperTrials;
        return adversary::run_attack(c);
    };

    o.require(run(AttackScenario::PassiveEavesdrop, ProtocolMode::Plaintext).passkey_recovered,
              "passive vs plaintext did not recover the passkey");
    const auto so = run(AttackScenario::PassiveEavesdrop, ProtocolMode::StegoOnly);
    o.require(so.stego_detected && so.passkey_recovered, "steg_detect vs stego-only did not recover the passkey");

    for (auto s : {AttackScenario::PassiveEavesdrop, AttackScenario::ActiveKeySubstitution, AttackScenario::Tamper,
                   AttackScenario::Replay}) {
        const auto r = run(s, ProtocolMode::StegoCrypto);
        const std::string name(adversary::to_string(s));
        o.require(!r.passkey_recovered, name + " recovered the passkey");
        o.require(!r.unlock_granted_to_attacker, name + " unlocked for the attacker");
        if (s == AttackScenario::Tamper)
            o.require(r.tampers_attempted == kTamperTrials && r.tampers_detected == kTamperTrials,
                      "tamper detected " + std::to_string(r.tampers_detected) + "/" +
                          std::to_string(r.tampers_attempted));
        o.require(adversary::to_json(r) == adversary::to_json(run(s, ProtocolMode::StegoCrypto)),
                  name + " not deterministic");
    }
    if (o.pass) o.detail = "plaintext and stego-only exposed; stego-crypto held in 4 scenarios, tamper 1000/1000";
    return o;
}

// 4
Outcome pairing_properties() {
    Outcome o;
    using namespace pairing;
    auto cfg = [](IoCapability io, std::uint64_t seed, std::optional<std::uint32_t> pk = std::nullopt) {
        PairingConfig c;
        c.io = io;
        c.seed = seed;
        c.passkey = pk;
        return c;
    };

    transport::Link jw_link(transport::ChannelModel{});
    const auto jw = run_pairing(jw_link, cfg(IoCapability::NoInputNoOutput, 10), cfg(IoCapability::NoInputNoOutput, 11));
    o.require(jw.success() && jw.initiator.method() == PairingMethod::JustWorks, "JustWorks run failed");

    transport::Link pe_link(transport::ChannelModel{});
    const auto pe = run_pairing(pe_link, cfg(IoCapability::KeyboardOnly, 12, 654321),
                                cfg(IoCapability::DisplayOnly, 13, 654321));
    o.require(pe.success() && pe.initiator.method() == PairingMethod::PasskeyEntry, "PasskeyEntry run failed");

    if (jw.success()) {
        const auto rec = adversary::recover_stk(observe(jw.transcript));
        o.require(rec.recovered && rec.stk == jw.initiator.keys()->stk, "passive STK recompute failed");
    }

    struct FlipNth : transport::Interceptor {
        int target, seen = 0;
        explicit FlipNth(int t) : target(t) {}
        transport::Decision on_frame(Direction, const Frame& f, double) override {
            if (f.kind != FrameKind::KeyDist || seen++ != target) return transport::Decision::forward();
            Frame g = f;
            g.payload.back() ^= 0x01;
            return transport::Decision::modify(std::move(g));
        }
    };
    int aborted = 0, key_frames = 0;
    for (const auto& e : jw.transcript) key_frames += e.frame.kind == FrameKind::KeyDist;
    for (int i = 0; i < key_frames; ++i) {
        transport::Link link(transport::ChannelModel{});
        auto hook = std::make_shared<FlipNth>(i);
        link.attach_interceptor(hook);
        const auto r =
            run_pairing(link, cfg(IoCapability::NoInputNoOutput, 10), cfg(IoCapability::NoInputNoOutput, 11));
        if (!r.success() && r.initiator.failure() == Failure::MicFailure) ++aborted;
    }
    o.require(key_frames == 3 && aborted == key_frames,
              "key-distribution tamper aborted " + std::to_string(aborted) + "/" + std::to_string(key_frames));
    if (o.pass) o.detail = "JW and PE keys identical, JW STK recomputed, 3/3 key-distribution tampers aborted";
    return o;
}

// 5
Outcome table_reproduction() {
    Outcome o;
    const auto& table = bench::table1();
    const auto cal = bench::calibrate(table);
    o.require(cal.r_squared >= kMinR2, "r^2 " + std::to_string(cal.r_squared));

    const auto model = cal.channel();
    double worst = 0.0;
    for (const auto& p : table) {
        const double modeled = transport::simulated_transfer_time(p.size_kb, model);
        const double rel = std::abs(modeled - p.total_s) / p.total_s;
        worst = std::max(worst, rel);
        o.require(rel <= kMaxRelErr, "size " + std::to_string(p.size_kb) + " off by " + std::to_string(rel));
    }

    double prev = -1.0;
    for (double kb = 0.5; kb <= 2000.0; kb *= 1.25) {
        const double t = transport::simulated_transfer_time(kb, model);
        o.require(t > prev, "transfer not monotone at " + std::to_string(kb) + " KB");
        prev = t;
    }
    bench::LadderOptions opt;
    opt.wall_clock = false;
    const auto rows = bench::run_ladder(bench::default_ladder(1), cal, ProtocolMode::StegoCrypto, opt);
    for (std::size_t i = 1; i < rows.size(); ++i)
        o.require(rows[i].file_size_kb > rows[i - 1].file_size_kb && rows[i].transfer_s > rows[i - 1].transfer_s,
                  "ladder transfer not monotone");

    if (o.pass) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "r^2 %.4f, worst relative error %.1f%%, bandwidth %.3f KB/s, latency %.3f s",
                      cal.r_squared, 100 * worst, cal.bandwidth_kbps, cal.latency_s);
        o.detail = buf;
    }
    return o;
}

// 6
Outcome replay_and_audit() {
    Outcome o;
    const lock::Passkey pk("acceptance-pass");
    const auto record = lock::enroll(pk, 606, ProtocolMode::StegoCrypto);
    lock::LockSession session(record, pk, transport::ChannelModel{10.0, 0.01, 6});
    const auto cover = stego::synthesize_cover(120, 80, 6);

    constexpr int kGrants = 3;
    int granted = 0;
    for (int i = 0; i < kGrants; ++i) {
        granted += session.unlock(cover).granted;
        session.idle(record.relock_after + 1.0);
        session.idle(record.relock_after + 1.0);  // second tick must not relock again
    }
    o.require(granted == kGrants, "honest unlocks granted " + std::to_string(granted));

    std::optional<Frame> captured;
    for (const auto& e : session.link().sent())
        if (e.direction == Direction::InitiatorToResponder && e.frame.kind == FrameKind::StegoImage) captured = e.frame;
    o.require(captured.has_value(), "no STEGO_IMAGE frame captured");
    if (captured) {
        session.link().inject(Direction::InitiatorToResponder, *captured);
        const auto ds = session.serve_pending();
        o.require(ds.size() == 1 && !ds[0].granted && ds[0].kind == lock::AuditKind::Replay, "replay not denied");
        o.require(session.controller().audit().entries().back().kind == lock::AuditKind::Replay,
                  "last audit entry is not replay");
    }

    const auto& audit = session.controller().audit();
    const std::size_t relocks = audit.count(lock::AuditKind::Relock);
    o.require(audit.entries().size() - relocks == session.controller().frames_handled(),
              "audit entries " + std::to_string(audit.entries().size() - relocks) + " vs frames " +
                  std::to_string(session.controller().frames_handled()));
    o.require(relocks == static_cast<std::size_t>(granted), "relocks " + std::to_string(relocks));
    if (o.pass)
        o.detail = "replay denied, " + std::to_string(session.controller().frames_handled()) + " frames / " +
                   std::to_string(audit.entries().size() - relocks) + " entries, " + std::to_string(relocks) +
                   " relocks for " + std::to_string(granted) + " grants";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"crypto correctness", crypto_correctness}, {"stego fidelity", stego_fidelity},
        {"attack matrix", attack_matrix},           {"pairing properties", pairing_properties},
        {"table reproduction", table_reproduction}, {"replay and audit", replay_and_audit},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
