#include "stegolock/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stegolock/errors.hpp"
#include "stegolock/png_io.hpp"

namespace stegolock::bench {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string fmt(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string dims(const stego::RgbImage& img) {
    return std::to_string(img.width()) + "x" + std::to_string(img.height());
}

}  // namespace

const std::vector<TablePoint>& table1() {
    static const std::vector<TablePoint> rows = {
        {6.97, 19.8}, {21.85, 22.85}, {43, 36}, {79.7, 36.01}, {224, 52.27}, {557, 64}, {1070, 120.7}, {1100, 137},
    };
    return rows;
}

std::vector<TablePoint> parse_table_csv(std::string_view text) {
    std::vector<TablePoint> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("size_kb", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw InvalidInput("table line " + std::to_string(lineno) + ": expected size_kb,total_s");
        try {
            std::size_t used = 0;
            const std::string a = trim(line.substr(0, comma)), b = trim(line.substr(comma + 1));
            TablePoint p;
            p.size_kb = std::stod(a, &used);
            if (used != a.size()) throw std::invalid_argument(a);
            p.total_s = std::stod(b, &used);
            if (used != b.size()) throw std::invalid_argument(b);
            out.push_back(p);
        } catch (const std::logic_error&) {
            throw InvalidInput("table line " + std::to_string(lineno) + ": not a number");
        }
    }
    return out;
}

std::vector<TablePoint> load_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_table_csv(ss.str());
}

transport::ChannelModel Calibration::channel(std::uint64_t seed) const {
    transport::ChannelModel m{bandwidth_kbps, latency_s, seed};
    m.validate();
    return m;
}

Calibration calibrate(const std::vector<TablePoint>& points) {
    if (points.size() < 2) throw InvalidInput("calibration needs at least two points");
    const double n = static_cast<double>(points.size());
    double mx = 0, my = 0;
    for (const auto& p : points) {
        mx += p.size_kb;
        my += p.total_s;
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : points) {
        sxx += (p.size_kb - mx) * (p.size_kb - mx);
        sxy += (p.size_kb - mx) * (p.total_s - my);
        syy += (p.total_s - my) * (p.total_s - my);
    }
    if (!(sxx > 0.0)) throw InvalidInput("calibration needs at least two distinct sizes");
    const double slope = sxy / sxx;
    if (!(slope > 0.0)) throw InvalidInput("time does not grow with size; no positive bandwidth fits");

    Calibration c;
    c.bandwidth_kbps = 1.0 / slope;
    c.latency_s = my - slope * mx;
    c.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    return c;
}

std::vector<double> relative_errors(const std::vector<TablePoint>& points, const Calibration& cal) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back((cal.predict(p.size_kb) - p.total_s) / p.total_s);
    return out;
}

std::string to_json(const Calibration& cal, const std::vector<TablePoint>& points) {
    nlohmann::ordered_json j;
    j["bandwidth_kbps"] = cal.bandwidth_kbps;
    j["latency_s"] = cal.latency_s;
    j["r_squared"] = cal.r_squared;
    const auto errs = relative_errors(points, cal);
    double worst = 0;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        worst = std::max(worst, std::abs(errs[i]));
        rows.push_back({{"size_kb", points[i].size_kb},
                        {"total_s", points[i].total_s},
                        {"model_s", cal.predict(points[i].size_kb)},
                        {"relative_error", errs[i]}});
    }
    j["max_abs_relative_error"] = worst;
    j["points"] = std::move(rows);
    return j.dump(2);
}

std::vector<LadderImage> load_images(const std::vector<std::filesystem::path>& paths) {
    std::vector<LadderImage> out;
    for (const auto& p : paths) {
        LadderImage li;
        li.name = p.filename().string();
        try {
            li.image = png::load(p);
        } catch (const Error& e) {
            li.error = e.what();
        }
        out.push_back(std::move(li));
    }
    return out;
}

std::vector<LadderImage> default_ladder(std::uint64_t seed) {
    static constexpr std::pair<std::size_t, std::size_t> kDims[] = {
        {225, 400}, {320, 480}, {480, 640}, {720, 1280}, {1200, 1200},
    };
    std::vector<LadderImage> out;
    std::uint64_t s = seed;
    for (auto [w, h] : kDims) {
        LadderImage li;
        li.name = std::to_string(w) + "x" + std::to_string(h);
        li.image = stego::synthesize_cover(w, h, s++);
        out.push_back(std::move(li));
    }
    return out;
}

std::vector<BenchRow> run_ladder(const std::vector<LadderImage>& images, const Calibration& cal,
                                 lock::ProtocolMode mode, const LadderOptions& options) {
    const auto model = cal.channel(options.seed);
    const lock::Passkey passkey("bench-passkey");
    const auto record = lock::enroll(passkey, options.seed, mode, 0.0);

    std::vector<BenchRow> rows, skipped;
    std::uint64_t counter = 0;
    for (const auto& li : images) {
        if (!li.image) {
            BenchRow r;
            r.dimensions = li.name;
            r.warning = li.error.empty() ? "unreadable image" : li.error;
            skipped.push_back(std::move(r));
            continue;
        }
        BenchRow r;
        r.dimensions = dims(*li.image);
        try {
            // Fresh link and controller per row; nothing carries between rows.
            transport::Link link(model);
            lock::Controller controller(record);

            auto t0 = std::chrono::steady_clock::now();
            const auto frame = lock::client_unlock(passkey, *li.image, mode, record.shared_key, ++counter);
            const double encode = seconds_since(t0);

            const double sent_at = link.now();
            link.initiator().send(frame);
            const auto delivered = link.responder().recv();
            r.transfer_s = link.now() - sent_at;

            t0 = std::chrono::steady_clock::now();
            r.granted = controller.handle(delivered, link.now(), "bench").granted;
            const double decode = seconds_since(t0);

            r.file_size_kb = static_cast<double>(frame.payload.size()) / transport::kBytesPerKb;
            if (options.wall_clock) {
                r.encode_s = encode;
                r.decode_s = decode;
            }
            r.total_s = r.encode_s + r.transfer_s + r.decode_s;
            if (!r.granted) r.warning = "pipeline denied the unlock";
        } catch (const Error& e) {
            r.warning = e.what();
        }
        (r.skipped() ? skipped : rows).push_back(std::move(r));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const BenchRow& a, const BenchRow& b) { return a.file_size_kb < b.file_size_kb; });
    rows.insert(rows.end(), skipped.begin(), skipped.end());
    return rows;
}

std::string to_csv(const std::vector<BenchRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    std::string tail;
    for (const auto& r : rows) {
        if (r.skipped()) {
            tail += "# skipped " + r.dimensions + ": " + r.warning + '\n';
            continue;
        }
        out += r.dimensions + ',' + fmt(r.file_size_kb, 3) + ',' + fmt(r.encode_s, 6) + ',' + fmt(r.transfer_s, 6) +
               ',' + fmt(r.decode_s, 6) + ',' + fmt(r.total_s, 6) + '\n';
    }
    return out + tail;
}

namespace {

std::string series(const std::vector<BenchRow>& rows, double BenchRow::*field) {
    std::string out = "# size_kb time_s\n";
    for (const auto& r : rows)
        if (!r.skipped()) out += fmt(r.file_size_kb, 3) + ' ' + fmt(r.*field, 6) + '\n';
    return out;
}

}  // namespace

std::string plot_total(const std::vector<BenchRow>& rows) { return series(rows, &BenchRow::total_s); }
std::string plot_transfer(const std::vector<BenchRow>& rows) { return series(rows, &BenchRow::transfer_s); }

std::vector<TablePoint> transfer_points(const std::vector<BenchRow>& rows) {
    std::vector<TablePoint> out;
    for (const auto& r : rows)
        if (!r.skipped()) out.push_back({r.file_size_kb, r.transfer_s});
    return out;
}

}  // namespace stegolock::bench
