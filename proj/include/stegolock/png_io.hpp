#pragma once

#include <filesystem>

#include "stegolock/bytes.hpp"
#include "stegolock/stego.hpp"

namespace stegolock::png {

// Any PNG colour type is converted to 8-bit RGB; alpha is dropped.
stego::RgbImage decode(ByteView png_bytes);
Bytes encode(const stego::RgbImage& image);

stego::RgbImage load(const std::filesystem::path& path);
void save(const stego::RgbImage& image, const std::filesystem::path& path);

}  // namespace stegolock::png
