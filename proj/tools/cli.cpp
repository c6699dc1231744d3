#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iterator>
#include <random>

#include "CLI11.hpp"
#include "json.hpp"
#include "stegolock/adversary.hpp"
#include "stegolock/bench.hpp"
#include "stegolock/errors.hpp"
#include "stegolock/lockproto.hpp"
#include "stegolock/pairing.hpp"
#include "stegolock/png_io.hpp"
#include "stegolock/stego.hpp"
#include "stegolock/transport.hpp"

namespace stegolock::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct UsageError : Error {
    using Error::Error;
};

Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, ByteView data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("short write to " + p.string());
}

void write_text(const fs::path& p, std::string_view text) { write_file(p, as_bytes(text)); }

lock::ProtocolMode mode_arg(const std::string& s) {
    auto m = lock::parse_mode(s);
    if (!m) throw UsageError("unknown mode '" + s + "' (plaintext, crypto-only, stego-only, stego-crypto)");
    return *m;
}

pairing::IoCapability io_arg(const std::string& s) {
    auto io = pairing::parse_io_capability(s);
    if (!io) throw UsageError("unknown io capability '" + s + "'");
    return *io;
}

lock::EnrollmentRecord enrollment_arg(const fs::path& p) {
    auto r = lock::load_enrollment(p);
    if (!r) throw IoError("no enrollment at " + p.string());
    return *r;
}

json decision_json(const lock::UnlockDecision& d) {
    json j;
    j["granted"] = d.granted;
    j["kind"] = std::string(lock::to_string(d.kind));
    j["counter"] = d.counter;
    j["reason"] = d.reason;
    return j;
}

// --- subcommands -----------------------------------------------------------

struct EnrollArgs {
    std::string passkey, mode = "stego-crypto", out;
    std::optional<std::uint64_t> seed;
    double relock_after = 5.0;
};

int do_enroll(const EnrollArgs& a, bool as_json, std::ostream& out) {
    const auto mode = mode_arg(a.mode);
    if (!lock::Passkey::is_valid(as_bytes(a.passkey))) throw UsageError("passkey must be 4..64 octets of UTF-8");
    const std::uint64_t seed = a.seed ? *a.seed : (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}();
    const auto record = lock::enroll(lock::Passkey(a.passkey), seed, mode, a.relock_after);
    if (a.out.empty()) {
        out << lock::to_json(record) << '\n';
        return kOk;
    }
    lock::save_enrollment(record, a.out);
    if (as_json) {
        json j;
        j["out"] = a.out;
        j["mode"] = std::string(lock::to_string(mode));
        j["relock_after"] = record.relock_after;
        out << j.dump(2) << '\n';
    } else {
        out << "enrolled (" << lock::to_string(mode) << ") -> " << a.out << '\n';
    }
    return kOk;
}

struct EmbedArgs {
    std::string cover, in, out;
};

int do_embed(const EmbedArgs& a, bool as_json, std::ostream& out) {
    const auto cover = png::load(a.cover);
    const auto payload = read_file(a.in);
    const auto stego_img = stego::embed(cover, payload);
    const auto stats = stego::measure(cover, stego_img);
    png::save(stego_img, a.out);
    if (as_json) {
        json j;
        j["octets"] = payload.size();
        j["capacity"] = stego::capacity(cover);
        j["changed_subpixels"] = stats.changed_subpixels;
        j["max_channel_delta"] = stats.max_channel_delta;
        j["psnr_db"] = stats.psnr_db;
        j["out"] = a.out;
        out << j.dump(2) << '\n';
    } else {
        out << "embedded " << payload.size() << " octets; " << stats.changed_subpixels << " subpixels changed; PSNR "
            << stats.psnr_db << " dB\n";
    }
    return kOk;
}

struct ExtractArgs {
    std::string in, out;
};

int do_extract(const ExtractArgs& a, bool as_json, std::ostream& out) {
    const auto payload = stego::extract(png::load(a.in));
    if (!a.out.empty()) write_file(a.out, payload);
    if (as_json) {
        json j;
        j["octets"] = payload.size();
        j["hex"] = to_hex(payload);
        out << j.dump(2) << '\n';
    } else if (a.out.empty()) {
        out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    }
    return kOk;
}

struct LockdArgs {
    std::string enrollment, port_file, audit, ltk;
    std::uint16_t port = 0;
    bool once = false;
};

int do_lockd(const LockdArgs& a, bool as_json, std::ostream& out, std::ostream& err) {
    const auto record = enrollment_arg(a.enrollment);
    lock::ControllerOptions opts;
    if (!a.ltk.empty()) {
        opts.key_source = lock::KeySource::PairingLtk;
        opts.ltk = cipher::SecretKey128::from_hex(a.ltk);
    }
    if (!a.audit.empty()) opts.audit_path = a.audit;
    lock::Controller controller(record, opts);

    transport::tcp::Listener listener(a.port);
    if (!a.port_file.empty()) write_text(a.port_file, std::to_string(listener.port()) + "\n");
    err << "lockd listening on 127.0.0.1:" << listener.port() << std::endl;

    const auto start = std::chrono::steady_clock::now();
    auto now = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    do {
        auto stream = listener.accept();
        try {
            for (;;) {
                const auto frame = stream.recv_frame();
                const auto d = controller.handle(frame, now(), "tcp");
                stream.send_frame(lock::result_frame(d));
                if (as_json)
                    out << decision_json(d).dump() << std::endl;
                else
                    out << lock::to_string(d.kind) << " counter=" << d.counter << std::endl;
            }
        } catch (const Disconnect&) {
        } catch (const MalformedFrame& e) {
            err << "dropping connection: " << e.what() << '\n';
        }
    } while (!a.once);
    return kOk;
}

struct UnlockArgs {
    std::string enrollment, passkey, cover, channel;
    std::uint64_t counter = 1;
    std::optional<std::uint16_t> port;
    std::uint64_t seed = 1;
};

int do_unlock(const UnlockArgs& a, bool as_json, std::ostream& out) {
    const auto record = enrollment_arg(a.enrollment);
    if (!lock::Passkey::is_valid(as_bytes(a.passkey))) throw UsageError("passkey must be 4..64 octets of UTF-8");
    const lock::Passkey passkey(a.passkey);
    const auto cover = a.cover.empty() ? stego::synthesize_cover(96, 64, a.seed) : png::load(a.cover);

    lock::UnlockDecision d;
    json j;
    if (a.port) {
        auto stream = transport::tcp::Stream::connect("127.0.0.1", *a.port);
        stream.send_frame(lock::client_unlock(passkey, cover, record.mode, record.shared_key, a.counter));
        d = lock::parse_result_frame(stream.recv_frame());
        j["transport"] = "tcp";
    } else {
        auto model = a.channel.empty() ? transport::ChannelModel{} : transport::load_channel_config(a.channel);
        lock::LockSession session(record, passkey, model);
        d = session.unlock(cover);
        j["transport"] = "simulated";
        j["simulated_time_s"] = session.link().now();
    }
    if (as_json) {
        const json dj = decision_json(d);
        for (const auto& [k, v] : dj.items()) j[k] = v;
        out << j.dump(2) << '\n';
    } else {
        out << (d.granted ? "granted" : "denied") << " (" << lock::to_string(d.kind) << ")\n";
    }
    return d.granted ? kOk : kDenied;
}

struct PairArgs {
    std::string initiator_io = "NoInputNoOutput", responder_io = "NoInputNoOutput", oob;
    std::optional<std::uint32_t> passkey;
    std::uint64_t seed = 1;
};

int do_pair(const PairArgs& a, bool as_json, std::ostream& out) {
    pairing::PairingConfig ic, rc;
    ic.io = io_arg(a.initiator_io);
    rc.io = io_arg(a.responder_io);
    ic.seed = a.seed;
    rc.seed = a.seed + 1;
    ic.passkey = rc.passkey = a.passkey;
    if (!a.oob.empty()) {
        ic.oob = rc.oob = true;
        ic.oob_value = rc.oob_value = cipher::SecretKey128::from_hex(a.oob);
    }
    transport::Link link(transport::ChannelModel{});
    const auto res = pairing::run_pairing(link, ic, rc);
    const auto observed = adversary::recover_stk(pairing::observe(res.transcript));

    json j;
    const auto method = res.initiator.method();
    j["method"] = method ? std::string(pairing::to_string(*method)) : std::string("none");
    j["success"] = res.success();
    j["failure"] = std::string(pairing::to_string(res.initiator.failed() ? res.initiator.failure()
                                                                          : res.responder.failure()));
    if (res.success()) {
        j["stk"] = res.initiator.keys()->stk.hex();
        j["ltk"] = res.initiator.keys()->ltk.hex();
    }
    j["passive_stk_recovered"] = observed.recovered && res.success() && observed.stk == res.initiator.keys()->stk;
    if (as_json) {
        out << j.dump(2) << '\n';
    } else {
        out << "pairing " << (res.success() ? "complete" : "failed") << " via " << j["method"].get<std::string>()
            << "; passive STK recovery: " << (j["passive_stk_recovered"].get<bool>() ? "yes" : "no") << '\n';
    }
    return res.success() ? kOk : kDenied;
}

struct AttackArgs {
    std::string scenario, mode = "stego-crypto";
    std::uint64_t seed = 1;
    std::size_t trials = 1000;
    bool key_leak = false;
};

int do_attack(const AttackArgs& a, bool as_json, std::ostream& out) {
    const auto scenario = adversary::parse_scenario(a.scenario);
    if (!scenario) throw UsageError("unknown scenario '" + a.scenario + "'");
    adversary::AttackConfig cfg;
    cfg.scenario = *scenario;
    cfg.mode = mode_arg(a.mode);
    cfg.seed = a.seed;
    cfg.tamper_trials = a.trials;
    cfg.key_leak = a.key_leak;
    const auto r = adversary::run_attack(cfg);
    if (as_json) {
        out << adversary::to_json(r) << '\n';
    } else {
        out << adversary::to_string(r.scenario) << " vs " << lock::to_string(r.protocol_mode)
            << ": passkey recovered=" << (r.passkey_recovered ? "yes" : "no")
            << " attacker unlocked=" << (r.unlock_granted_to_attacker ? "yes" : "no") << " tampers "
            << r.tampers_detected << "/" << r.tampers_attempted << " detected\n";
    }
    return adversary::violates_guarantees(r) ? kDenied : kOk;
}

struct BenchArgs {
    std::string table, mode = "stego-crypto", csv, plot_data;
    std::vector<std::string> images;
    bool ladder = false, no_wall_clock = false;
    std::uint64_t seed = 1;
};

int do_bench(const BenchArgs& a, bool as_json, std::ostream& out) {
    const auto mode = mode_arg(a.mode);
    const bool run = a.ladder || !a.images.empty();
    if (as_json && run && a.csv.empty()) throw UsageError("--csv is required with --json when running a ladder");
    if (!a.plot_data.empty() && !run) throw UsageError("--plot-data needs --images or --ladder");

    const auto points = a.table.empty() ? bench::table1() : bench::load_table_csv(a.table);
    const auto cal = bench::calibrate(points);
    if (as_json)
        out << bench::to_json(cal, points) << '\n';
    else
        out << "bandwidth " << cal.bandwidth_kbps << " KB/s, latency " << cal.latency_s << " s, r^2 "
            << cal.r_squared << '\n';
    if (!run) return kOk;

    std::vector<bench::LadderImage> images;
    if (a.ladder) images = bench::default_ladder(a.seed);
    std::vector<fs::path> paths(a.images.begin(), a.images.end());
    for (auto& li : bench::load_images(paths)) images.push_back(std::move(li));

    bench::LadderOptions opt;
    opt.seed = a.seed;
    opt.wall_clock = !a.no_wall_clock;
    const auto rows = bench::run_ladder(images, cal, mode, opt);
    const auto csv = bench::to_csv(rows);
    if (a.csv.empty())
        out << csv;
    else
        write_text(a.csv, csv);
    if (!a.plot_data.empty()) {
        write_text(a.plot_data + "_total.dat", bench::plot_total(rows));
        write_text(a.plot_data + "_transfer.dat", bench::plot_transfer(rows));
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"stegolock: steganographic smart-lock unlock protocol toolkit", "stegolock"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "Machine-readable output");

    EnrollArgs enroll;
    auto* c_enroll = app.add_subcommand("enroll", "Create an enrollment record for a passkey");
    c_enroll->add_option("--passkey", enroll.passkey, "Passkey (4..64 octets)")->required();
    c_enroll->add_option("--mode", enroll.mode, "Protocol mode");
    c_enroll->add_option("--seed", enroll.seed, "Key generation seed (default: random)");
    c_enroll->add_option("--relock-after", enroll.relock_after, "Seconds until relock")->check(CLI::NonNegativeNumber);
    c_enroll->add_option("--out", enroll.out, "Write record here instead of stdout");

    EmbedArgs embed;
    auto* c_embed = app.add_subcommand("embed", "Hide a file in a PNG cover");
    c_embed->add_option("--cover", embed.cover, "Cover PNG")->required()->check(CLI::ExistingFile);
    c_embed->add_option("--in", embed.in, "Payload file")->required()->check(CLI::ExistingFile);
    c_embed->add_option("--out", embed.out, "Stego PNG to write")->required();

    ExtractArgs extract;
    auto* c_extract = app.add_subcommand("extract", "Recover the payload from a stego PNG");
    c_extract->add_option("--in", extract.in, "Stego PNG")->required()->check(CLI::ExistingFile);
    c_extract->add_option("--out", extract.out, "Payload file (default: stdout)");

    LockdArgs lockd;
    auto* c_lockd = app.add_subcommand("lockd", "Serve the lock controller on loopback TCP");
    c_lockd->add_option("--enrollment", lockd.enrollment, "Enrollment record")->required()->check(CLI::ExistingFile);
    c_lockd->add_option("--port", lockd.port, "Port (0 = ephemeral)");
    c_lockd->add_option("--port-file", lockd.port_file, "Write the bound port here");
    c_lockd->add_option("--audit", lockd.audit, "JSON-lines audit log");
    c_lockd->add_option("--ltk", lockd.ltk, "Use a paired LTK (hex) instead of the enrolled key");
    c_lockd->add_flag("--once", lockd.once, "Exit after the first connection closes");

    UnlockArgs unlock;
    auto* c_unlock = app.add_subcommand("unlock", "Send one unlock request");
    c_unlock->add_option("--enrollment", unlock.enrollment, "Enrollment record")->required()->check(CLI::ExistingFile);
    c_unlock->add_option("--passkey", unlock.passkey, "Passkey")->required();
    c_unlock->add_option("--cover", unlock.cover, "Cover PNG (default: synthetic)")->check(CLI::ExistingFile);
    c_unlock->add_option("--counter", unlock.counter, "Request counter")->check(CLI::PositiveNumber);
    c_unlock->add_option("--port", unlock.port, "lockd port; without it the session is simulated in-process");
    c_unlock->add_option("--channel", unlock.channel, "key=value channel config")->check(CLI::ExistingFile);
    c_unlock->add_option("--seed", unlock.seed, "Seed for the synthetic cover");

    PairArgs pair;
    auto* c_pair = app.add_subcommand("pair", "Run a simulated legacy pairing");
    c_pair->add_option("--initiator-io", pair.initiator_io, "DisplayOnly, KeyboardOnly, NoInputNoOutput, KeyboardDisplay");
    c_pair->add_option("--responder-io", pair.responder_io, "Responder IO capability");
    c_pair->add_option("--passkey", pair.passkey, "Six-digit passkey")->check(CLI::Range(0u, pairing::kMaxPasskey));
    c_pair->add_option("--oob", pair.oob, "Shared out-of-band value (hex)");
    c_pair->add_option("--seed", pair.seed, "Seed");

    AttackArgs attack;
    auto* c_attack = app.add_subcommand("attack", "Run an attack scenario against a lock session");
    c_attack->add_option("--scenario", attack.scenario, "passive, key-substitution, tamper, replay")->required();
    c_attack->add_option("--mode", attack.mode, "Protocol mode");
    c_attack->add_option("--seed", attack.seed, "Seed");
    c_attack->add_option("--trials", attack.trials, "Tamper trials");
    c_attack->add_flag("--key-leak", attack.key_leak, "Hand the attacker the shared key");

    BenchArgs bench_args;
    auto* c_bench = app.add_subcommand("bench", "Calibrate the channel model and run the image ladder");
    c_bench->add_option("--table", bench_args.table, "CSV of size_kb,total_s (default: built-in)")
        ->check(CLI::ExistingFile);
    c_bench->add_option("--images", bench_args.images, "PNG images for the ladder");
    c_bench->add_flag("--ladder", bench_args.ladder, "Add the synthetic image ladder");
    c_bench->add_option("--mode", bench_args.mode, "Protocol mode");
    c_bench->add_option("--csv", bench_args.csv, "Write ladder CSV here");
    c_bench->add_option("--plot-data", bench_args.plot_data, "Prefix for size/time plot files");
    c_bench->add_flag("--no-wall-clock", bench_args.no_wall_clock, "Report encode/decode as 0");
    c_bench->add_option("--seed", bench_args.seed, "Seed");

    for (auto* sub : app.get_subcommands({})) sub->add_flag("--json", as_json, "Machine-readable output");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (c_enroll->parsed()) return do_enroll(enroll, as_json, out);
        if (c_embed->parsed()) return do_embed(embed, as_json, out);
        if (c_extract->parsed()) return do_extract(extract, as_json, out);
        if (c_lockd->parsed()) return do_lockd(lockd, as_json, out, err);
        if (c_unlock->parsed()) return do_unlock(unlock, as_json, out);
        if (c_pair->parsed()) return do_pair(pair, as_json, out);
        if (c_attack->parsed()) return do_attack(attack, as_json, out);
        if (c_bench->parsed()) return do_bench(bench_args, as_json, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace stegolock::cli
