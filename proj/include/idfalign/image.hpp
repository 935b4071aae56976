#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace idfalign {

/// 8-bit grayscale image, row-major.
struct Image
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(checked_area(w, h), fill)
    {
    }
    Image(int w, int h, std::vector<std::uint8_t> data) : width(w), height(h), pixels(std::move(data))
    {
        if (pixels.size() != checked_area(w, h))
            throw std::invalid_argument("image data length " + std::to_string(pixels.size()) +
                                        " does not match " + std::to_string(w) + "x" + std::to_string(h));
    }

    bool empty() const { return pixels.empty(); }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static std::size_t checked_area(int w, int h)
    {
        if (w <= 0 || h <= 0)
            throw std::invalid_argument("image dimensions must be positive");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }
};

} // namespace idfalign
