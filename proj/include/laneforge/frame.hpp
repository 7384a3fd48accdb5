#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace laneforge {

/// 8-bit grayscale image, row-major.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
    double timestamp = 0.0;
    std::uint64_t seq = 0;

    Frame() = default;
    Frame(int w, int h, std::uint8_t fill = 0) : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {}

    std::uint8_t& at(int x, int y) { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    std::uint8_t at(int x, int y) const { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    bool same_pixels(const Frame& o) const { return width == o.width && height == o.height && pixels == o.pixels; }
};

/// Interleaved 8-bit RGB.
struct RgbFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    RgbFrame() = default;
    RgbFrame(int w, int h) : width(w), height(h), rgb(std::size_t(w) * std::size_t(h) * 3, 0) {}

    std::uint8_t* at(int x, int y) { return &rgb[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3]; }
    const std::uint8_t* at(int x, int y) const { return &rgb[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3]; }
};

RgbFrame gray_to_rgb(const Frame& f);

Frame flip_horizontal(const Frame& f);
/// Box-filter resample to w x h (exact area weights).
Frame resample_area(const Frame& f, int w, int h);

/// Binary PGM (P5, maxval 255).
std::string encode_pgm(const Frame& f);
Frame decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const Frame& f);
Frame read_pgm(const std::filesystem::path& path);

/// `frame_{seq:08d}.pgm`
std::string frame_file_name(std::uint64_t seq);

}  // namespace laneforge
