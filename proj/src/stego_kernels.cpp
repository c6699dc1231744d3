#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "stegolock/stego.hpp"

namespace stegolock::stego {

namespace serial {

void write_lsb_bits(std::span<std::uint8_t> subpixels, ByteView bits, std::size_t first_subpixel) {
    for (std::size_t i = 0; i < bits.size() * 8; ++i) {
        const std::uint8_t bit = (bits[i / 8] >> (7 - i % 8)) & 1;
        auto& px = subpixels[first_subpixel + i];
        px = static_cast<std::uint8_t>((px & 0xfe) | bit);
    }
}

Bytes read_lsb_bits(std::span<const std::uint8_t> subpixels, std::size_t first_subpixel,
                    std::size_t octets) {
    Bytes out(octets, 0);
    for (std::size_t i = 0; i < octets * 8; ++i) {
        out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | ((subpixels[first_subpixel + i] & 1) << (7 - i % 8)));
    }
    return out;
}

DiffCounts diff(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    DiffCounts c;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const unsigned d = static_cast<unsigned>(std::abs(int{a[i]} - int{b[i]}));
        if (d != 0) ++c.changed;
        c.max_delta = std::max(c.max_delta, d);
        c.squared_error += std::uint64_t{d} * d;
    }
    return c;
}

}  // namespace serial

namespace parallel {

// One octet per iteration: each thread owns 8 disjoint subpixels.
void write_lsb_bits(std::span<std::uint8_t> subpixels, ByteView bits, std::size_t first_subpixel) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(bits.size());
    std::uint8_t* base = subpixels.data() + first_subpixel;
    const std::uint8_t* src = bits.data();
#pragma omp parallel for schedule(static) if (n > 4096)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        const std::uint8_t octet = src[j];
        std::uint8_t* px = base + 8 * j;
        for (int k = 0; k < 8; ++k)
            px[k] = static_cast<std::uint8_t>((px[k] & 0xfe) | ((octet >> (7 - k)) & 1));
    }
}

Bytes read_lsb_bits(std::span<const std::uint8_t> subpixels, std::size_t first_subpixel,
                    std::size_t octets) {
    Bytes out(octets);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(octets);
    const std::uint8_t* base = subpixels.data() + first_subpixel;
    std::uint8_t* dst = out.data();
#pragma omp parallel for schedule(static) if (n > 4096)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        const std::uint8_t* px = base + 8 * j;
        std::uint8_t octet = 0;
        for (int k = 0; k < 8; ++k) octet = static_cast<std::uint8_t>((octet << 1) | (px[k] & 1));
        dst[j] = octet;
    }
    return out;
}

DiffCounts diff(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.size());
    const std::uint8_t* pa = a.data();
    const std::uint8_t* pb = b.data();
    std::size_t changed = 0;
    unsigned max_delta = 0;
    std::uint64_t sse = 0;
#pragma omp parallel for schedule(static) reduction(+ : changed, sse) reduction(max : max_delta)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const int d = std::abs(int{pa[i]} - int{pb[i]});
        changed += d != 0;
        max_delta = std::max(max_delta, static_cast<unsigned>(d));
        sse += static_cast<std::uint64_t>(d * d);
    }
    return {changed, max_delta, sse};
}

}  // namespace parallel

double psnr_from_counts(const DiffCounts& counts, std::size_t subpixels) {
    if (counts.squared_error == 0) return std::numeric_limits<double>::infinity();
    const double mse = static_cast<double>(counts.squared_error) / static_cast<double>(subpixels);
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace stegolock::stego
