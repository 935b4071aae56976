#pragma once

#include "idfalign/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

struct RgbImage
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // interleaved RGB, row-major
};

/// Luma conversion 0.299 R + 0.587 G + 0.114 B, rounded to nearest.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<std::uint8_t>(std::lround(std::min(255.0, y)));
}

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct PnmCursor
{
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void skip_space_and_comments()
    {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    }
    int read_int(const std::string& path)
    {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw std::runtime_error("malformed PGM header in '" + path + "'");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            if (v > 1 << 24)
                throw std::runtime_error("PGM header value too large in '" + path + "'");
        }
        return static_cast<int>(v);
    }
};

inline Image decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& path)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw std::runtime_error("'" + path + "' is not a binary PGM (P5) file");
    PnmCursor cur{bytes, 2};
    const int w = cur.read_int(path);
    const int h = cur.read_int(path);
    const int maxval = cur.read_int(path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw std::runtime_error("unsupported PGM dimensions or maxval in '" + path + "'");
    ++cur.pos; // single whitespace before raster
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (cur.pos + need > bytes.size())
        throw std::runtime_error("truncated PGM raster in '" + path + "'");
    std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos + need));
    if (maxval != 255)
        for (auto& v : px)
            v = static_cast<std::uint8_t>(std::lround(std::min(255.0, 255.0 * v / maxval)));
    return Image(w, h, std::move(px));
}

struct PngReadGuard
{
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWriteGuard
{
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteGuard() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

struct FileCloser
{
    void operator()(std::FILE* f) const { std::fclose(f); }
};

inline void png_error_to_exception(png_structp, png_const_charp msg) { throw std::runtime_error(msg); }
inline void png_warning_ignore(png_structp, png_const_charp) {}

inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path)
{
    struct Reader
    {
        const std::vector<std::uint8_t>* bytes;
        std::size_t pos;
    } reader{&bytes, 0};

    PngReadGuard g;
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_to_exception, png_warning_ignore);
    if (!g.png)
        throw std::runtime_error("libpng initialisation failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info)
        throw std::runtime_error("libpng initialisation failed");
    png_set_read_fn(g.png, &reader, [](png_structp p, png_bytep out, png_size_t len) {
        auto* r = static_cast<Reader*>(png_get_io_ptr(p));
        if (r->pos + len > r->bytes->size())
            png_error(p, "truncated PNG data");
        std::copy_n(r->bytes->data() + r->pos, len, out);
        r->pos += len;
    });

    try {
        png_read_info(g.png, g.info);
        const int w = static_cast<int>(png_get_image_width(g.png, g.info));
        const int h = static_cast<int>(png_get_image_height(g.png, g.info));
        const int color = png_get_color_type(g.png, g.info);
        const int bit_depth = png_get_bit_depth(g.png, g.info);
        if (bit_depth == 16)
            png_set_strip_16(g.png);
        if (color == PNG_COLOR_TYPE_PALETTE)
            png_set_palette_to_rgb(g.png);
        if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
            png_set_expand_gray_1_2_4_to_8(g.png);
        if (png_get_valid(g.png, g.info, PNG_INFO_tRNS))
            png_set_strip_alpha(g.png);
        if (color & PNG_COLOR_MASK_ALPHA)
            png_set_strip_alpha(g.png);
        png_read_update_info(g.png, g.info);
        const int channels = png_get_channels(g.png, g.info);
        const std::size_t stride = png_get_rowbytes(g.png, g.info);
        std::vector<std::uint8_t> raw(stride * static_cast<std::size_t>(h));
        std::vector<png_bytep> rows(static_cast<std::size_t>(h));
        for (int y = 0; y < h; ++y)
            rows[static_cast<std::size_t>(y)] = raw.data() + stride * static_cast<std::size_t>(y);
        png_read_image(g.png, rows.data());

        Image img(w, h);
        for (int y = 0; y < h; ++y) {
            const std::uint8_t* row = rows[static_cast<std::size_t>(y)];
            for (int x = 0; x < w; ++x) {
                const std::uint8_t* px = row + static_cast<std::size_t>(x) * channels;
                img.at(x, y) = channels >= 3 ? luma(px[0], px[1], px[2]) : px[0];
            }
        }
        return img;
    } catch (const std::runtime_error& e) {
        throw std::runtime_error("cannot decode PNG '" + path + "': " + e.what());
    }
}

inline void encode_png(const std::string& path, int w, int h, int channels, const std::uint8_t* data)
{
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    if (!file)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    PngWriteGuard g;
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_to_exception, png_warning_ignore);
    if (!g.png)
        throw std::runtime_error("libpng initialisation failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info)
        throw std::runtime_error("libpng initialisation failed");
    png_init_io(g.png, file.get());
    png_set_IHDR(g.png, g.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    for (int y = 0; y < h; ++y)
        png_write_row(g.png, const_cast<png_bytep>(data + stride * static_cast<std::size_t>(y)));
    png_write_end(g.png, nullptr);
}

} // namespace detail

/// Loads a binary PGM (P5) or PNG file as grayscale; format is detected from the content.
inline Image load_image(const std::string& path)
{
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin()))
        return detail::decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
        return detail::decode_pgm(bytes, path);
    throw std::runtime_error("unsupported image format in '" + path + "' (expected PGM P5 or PNG)");
}

inline void write_pgm(const std::string& path, const Image& image)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out)
        throw std::runtime_error("failed writing '" + path + "'");
}

inline void write_png(const std::string& path, const Image& image)
{
    detail::encode_png(path, image.width, image.height, 1, image.pixels.data());
}

inline void write_png(const std::string& path, const RgbImage& image)
{
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
        throw std::invalid_argument("write_png: RGB buffer size mismatch");
    detail::encode_png(path, image.width, image.height, 3, image.pixels.data());
}

/// Writes PNG unless the path ends in .pgm.
inline void save_image(const std::string& path, const Image& image)
{
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0)
        write_pgm(path, image);
    else
        write_png(path, image);
}

} // namespace idfalign
