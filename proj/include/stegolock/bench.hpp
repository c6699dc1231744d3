#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stegolock/lockproto.hpp"
#include "stegolock/stego.hpp"
#include "stegolock/transport.hpp"

namespace stegolock::bench {

struct TablePoint {
    double size_kb = 0.0;
    double total_s = 0.0;
};

/// The published size/time ladder (carrier kilobytes, end-to-end seconds).
const std::vector<TablePoint>& table1();

std::vector<TablePoint> parse_table_csv(std::string_view text);
std::vector<TablePoint> load_table_csv(const std::filesystem::path& path);

struct Calibration {
    double bandwidth_kbps = 0.0;
    double latency_s = 0.0;
    double r_squared = 0.0;

    double predict(double size_kb) const { return latency_s + size_kb / bandwidth_kbps; }
    transport::ChannelModel channel(std::uint64_t seed = 1) const;
};

/// Least-squares line total = latency + size / bandwidth.
Calibration calibrate(const std::vector<TablePoint>& points);

/// Signed (model - observed) / observed per point.
std::vector<double> relative_errors(const std::vector<TablePoint>& points, const Calibration& cal);

std::string to_json(const Calibration& cal, const std::vector<TablePoint>& points);

struct LadderImage {
    std::string name;
    std::optional<stego::RgbImage> image;
    std::string error;  // why image is missing
};

std::vector<LadderImage> load_images(const std::vector<std::filesystem::path>& paths);

/// Synthetic covers at the published dimensions plus a few in between.
std::vector<LadderImage> default_ladder(std::uint64_t seed = 1);

struct BenchRow {
    std::string dimensions;
    double file_size_kb = 0.0;
    double encode_s = 0.0;
    double transfer_s = 0.0;
    double decode_s = 0.0;
    double total_s = 0.0;
    bool granted = false;
    std::string warning;  // non-empty: row was skipped

    bool skipped() const { return !warning.empty(); }
};

struct LadderOptions {
    std::uint64_t seed = 1;
    bool wall_clock = true;  // false: encode/decode reported as 0 for reproducible output
};

std::vector<BenchRow> run_ladder(const std::vector<LadderImage>& images, const Calibration& cal,
                                 lock::ProtocolMode mode = lock::ProtocolMode::StegoCrypto,
                                 const LadderOptions& options = {});

inline constexpr std::string_view kCsvHeader = "dimensions,size_kb,encode_s,transfer_s,decode_s,total_s";

/// Skipped rows become trailing "# skipped" comment lines.
std::string to_csv(const std::vector<BenchRow>& rows);

/// Two-column "size_kb time_s" series: total and transfer.
std::string plot_total(const std::vector<BenchRow>& rows);
std::string plot_transfer(const std::vector<BenchRow>& rows);

/// (size, transfer) points for refitting the channel from a ladder run.
std::vector<TablePoint> transfer_points(const std::vector<BenchRow>& rows);

}  // namespace stegolock::bench
