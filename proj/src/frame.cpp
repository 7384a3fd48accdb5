#include "laneforge/frame.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace laneforge {

RgbFrame gray_to_rgb(const Frame& f) {
    RgbFrame out(f.width, f.height);
    for (std::size_t i = 0; i < f.pixels.size(); ++i) {
        out.rgb[3 * i] = out.rgb[3 * i + 1] = out.rgb[3 * i + 2] = f.pixels[i];
    }
    return out;
}

Frame flip_horizontal(const Frame& f) {
    Frame out = f;
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) out.at(x, y) = f.at(f.width - 1 - x, y);
    }
    return out;
}

Frame resample_area(const Frame& f, int w, int h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("resample target must be non-empty");
    if (w == f.width && h == f.height) return f;
    Frame out(w, h);
    out.timestamp = f.timestamp;
    out.seq = f.seq;
    const double sx = double(f.width) / w, sy = double(f.height) / h;
    for (int y = 0; y < h; ++y) {
        const double y0 = y * sy, y1 = (y + 1) * sy;
        for (int x = 0; x < w; ++x) {
            const double x0 = x * sx, x1 = (x + 1) * sx;
            double acc = 0.0;
            for (int yy = int(y0); yy < std::min(f.height, int(std::ceil(y1))); ++yy) {
                const double wy = std::min(y1, yy + 1.0) - std::max(y0, double(yy));
                if (wy <= 0.0) continue;
                for (int xx = int(x0); xx < std::min(f.width, int(std::ceil(x1))); ++xx) {
                    const double wx = std::min(x1, xx + 1.0) - std::max(x0, double(xx));
                    if (wx > 0.0) acc += wx * wy * f.at(xx, yy);
                }
            }
            out.at(x, y) = std::uint8_t(std::clamp(std::lround(acc / (sx * sy)), 0L, 255L));
        }
    }
    return out;
}

std::string encode_pgm(const Frame& f) {
    std::string out = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
    return out;
}

Frame decode_pgm(std::string_view bytes) {
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return std::string(bytes.substr(start, pos - start));
    };
    if (next_token() != "P5") throw std::runtime_error("not a binary PGM");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw std::runtime_error("malformed PGM header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("unsupported PGM geometry");
    ++pos;  // single whitespace after maxval
    const std::size_t n = std::size_t(w) * std::size_t(h);
    if (bytes.size() < pos + n) throw std::runtime_error("truncated PGM");
    Frame f(w, h);
    std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), n, f.pixels.begin());
    return f;
}

void write_pgm(const std::filesystem::path& path, const Frame& f) {
    std::ofstream out(path, std::ios::binary);
    const std::string bytes = encode_pgm(f);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

Frame read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_pgm(ss.str());
}

std::string frame_file_name(std::uint64_t seq) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%08llu.pgm", static_cast<unsigned long long>(seq));
    return buf;
}

}  // namespace laneforge
