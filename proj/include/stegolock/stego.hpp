#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stegolock/bytes.hpp"

namespace stegolock::stego {

inline constexpr std::size_t kHeaderBits = 32;

/// 8-bit RGB raster, row-major, channels interleaved r,g,b.
class RgbImage {
public:
    // Throws InvalidInput for zero dimensions or a pixel buffer of the wrong size.
    RgbImage(std::size_t width, std::size_t height);
    RgbImage(std::size_t width, std::size_t height, Bytes subpixels);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t pixel_count() const { return width_ * height_; }
    std::size_t subpixel_count() const { return data_.size(); }

    std::span<std::uint8_t> subpixels() { return data_; }
    std::span<const std::uint8_t> subpixels() const { return data_; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    std::size_t width_;
    std::size_t height_;
    Bytes data_;
};

struct StegoStats {
    std::size_t changed_subpixels = 0;
    unsigned max_channel_delta = 0;
    double psnr_db = 0.0;  // +infinity when the images are identical
};

/// Usable payload octets after the 4-octet length header; 0 if the header does not fit.
std::size_t capacity(const RgbImage& image);

/// Length header (32 bits, big-endian) then payload bits MSB-first into subpixel LSBs.
/// Throws CapacityError when the payload (or the header itself) does not fit.
RgbImage embed(const RgbImage& cover, ByteView payload);

/// Throws MalformedStego when the declared length exceeds capacity.
Bytes extract(const RgbImage& stego);

/// Throws InvalidInput on dimension mismatch.
StegoStats measure(const RgbImage& cover, const RgbImage& stego);

/// Deterministic smooth-gradient cover with a little seeded noise, for tests and the bench.
RgbImage synthesize_cover(std::size_t width, std::size_t height, std::uint64_t seed);

struct DiffCounts {
    std::size_t changed = 0;
    unsigned max_delta = 0;
    std::uint64_t squared_error = 0;
};

// Low-level bit kernels. `serial` is the reference, `parallel` the OpenMP version;
// they must agree bit for bit.
namespace serial {
void write_lsb_bits(std::span<std::uint8_t> subpixels, ByteView bits, std::size_t first_subpixel);
Bytes read_lsb_bits(std::span<const std::uint8_t> subpixels, std::size_t first_subpixel,
                    std::size_t octets);
DiffCounts diff(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
}  // namespace serial

namespace parallel {
void write_lsb_bits(std::span<std::uint8_t> subpixels, ByteView bits, std::size_t first_subpixel);
Bytes read_lsb_bits(std::span<const std::uint8_t> subpixels, std::size_t first_subpixel,
                    std::size_t octets);
DiffCounts diff(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
}  // namespace parallel

double psnr_from_counts(const DiffCounts& counts, std::size_t subpixels);

}  // namespace stegolock::stego
