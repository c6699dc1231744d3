#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "stegolock/errors.hpp"
#include "stegolock/png_io.hpp"

namespace stegolock::png {

namespace {

struct ImageGuard {
    png_image image{};
    ImageGuard() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~ImageGuard() { png_image_free(&image); }
};

}  // namespace

stego::RgbImage decode(ByteView png_bytes) {
    ImageGuard g;
    if (!png_image_begin_read_from_memory(&g.image, png_bytes.data(), png_bytes.size()))
        throw IoError(std::string("PNG decode failed: ") + g.image.message);
    g.image.format = PNG_FORMAT_RGBA;
    const std::size_t w = g.image.width, h = g.image.height;
    Bytes rgba(PNG_IMAGE_SIZE(g.image));
    if (!png_image_finish_read(&g.image, nullptr, rgba.data(), 0, nullptr))
        throw IoError(std::string("PNG decode failed: ") + g.image.message);

    Bytes rgb(w * h * 3);
    for (std::size_t i = 0; i < w * h; ++i) std::memcpy(&rgb[3 * i], &rgba[4 * i], 3);
    return stego::RgbImage(w, h, std::move(rgb));
}

Bytes encode(const stego::RgbImage& image) {
    ImageGuard g;
    g.image.width = static_cast<png_uint_32>(image.width());
    g.image.height = static_cast<png_uint_32>(image.height());
    g.image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    const auto px = image.subpixels();
    if (!png_image_write_to_memory(&g.image, nullptr, &size, 0, px.data(), 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + g.image.message);
    Bytes out(size);
    if (!png_image_write_to_memory(&g.image, out.data(), &size, 0, px.data(), 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + g.image.message);
    out.resize(size);
    return out;
}

stego::RgbImage load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

void save(const stego::RgbImage& image, const std::filesystem::path& path) {
    const Bytes bytes = encode(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace stegolock::png
