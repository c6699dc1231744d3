#include <algorithm>
#include <random>
#include <string>

#include "stegolock/errors.hpp"
#include "stegolock/stego.hpp"

namespace stegolock::stego {

namespace {

constexpr std::size_t kHeaderOctets = kHeaderBits / 8;

std::size_t checked_subpixels(std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw InvalidInput("image dimensions must be at least 1x1");
    return width * height * 3;
}

}  // namespace

RgbImage::RgbImage(std::size_t width, std::size_t height)
    : width_(width), height_(height), data_(checked_subpixels(width, height), 0) {}

RgbImage::RgbImage(std::size_t width, std::size_t height, Bytes subpixels)
    : width_(width), height_(height), data_(std::move(subpixels)) {
    if (data_.size() != checked_subpixels(width, height))
        throw InvalidInput("pixel buffer holds " + std::to_string(data_.size()) +
                           " subpixels, expected " + std::to_string(width * height * 3));
}

std::size_t capacity(const RgbImage& image) {
    const std::size_t raw = image.subpixel_count() / 8;
    return raw > kHeaderOctets ? raw - kHeaderOctets : 0;
}

RgbImage embed(const RgbImage& cover, ByteView payload) {
    const std::size_t available = capacity(cover);
    if (cover.subpixel_count() < kHeaderBits)
        throw CapacityError("cover has " + std::to_string(cover.subpixel_count()) +
                            " subpixels, the length header alone needs 32");
    if (payload.size() > available || payload.size() > 0xffffffffu)
        throw CapacityError("payload needs " + std::to_string(payload.size()) +
                            " bytes, cover holds " + std::to_string(available));

    Bytes header(kHeaderOctets);
    store_be32(header.data(), static_cast<std::uint32_t>(payload.size()));

    RgbImage out = cover;
    parallel::write_lsb_bits(out.subpixels(), header, 0);
    parallel::write_lsb_bits(out.subpixels(), payload, kHeaderBits);
    return out;
}

Bytes extract(const RgbImage& stego) {
    if (stego.subpixel_count() < kHeaderBits)
        throw MalformedStego("image too small to carry a length header");
    const Bytes header = parallel::read_lsb_bits(stego.subpixels(), 0, kHeaderOctets);
    const std::uint32_t declared = load_be32(header.data());
    const std::size_t available = capacity(stego);
    if (declared > available)
        throw MalformedStego("declared payload length " + std::to_string(declared) +
                             " exceeds capacity " + std::to_string(available));
    return parallel::read_lsb_bits(stego.subpixels(), kHeaderBits, declared);
}

StegoStats measure(const RgbImage& cover, const RgbImage& stego) {
    if (cover.width() != stego.width() || cover.height() != stego.height())
        throw InvalidInput("cannot compare " + std::to_string(cover.width()) + "x" +
                           std::to_string(cover.height()) + " with " +
                           std::to_string(stego.width()) + "x" + std::to_string(stego.height()));
    const DiffCounts c = parallel::diff(cover.subpixels(), stego.subpixels());
    return {c.changed, c.max_delta, psnr_from_counts(c, cover.subpixel_count())};
}

RgbImage synthesize_cover(std::size_t width, std::size_t height, std::uint64_t seed) {
    RgbImage img(width, height);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> noise(-6, 6);
    auto px = img.subpixels();
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t i = 3 * (y * width + x);
            const int r = static_cast<int>(255 * x / std::max<std::size_t>(1, width - 1));
            const int g = static_cast<int>(255 * y / std::max<std::size_t>(1, height - 1));
            const int b = (r + g) / 2;
            px[i] = static_cast<std::uint8_t>(std::clamp(r + noise(rng), 0, 255));
            px[i + 1] = static_cast<std::uint8_t>(std::clamp(g + noise(rng), 0, 255));
            px[i + 2] = static_cast<std::uint8_t>(std::clamp(255 - b + noise(rng), 0, 255));
        }
    }
    return img;
}

}  // namespace stegolock::stego
