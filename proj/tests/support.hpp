#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "laneforge/trackkit.hpp"

namespace lftest {

inline std::filesystem::path data_dir() { return LANEFORGE_DATA_DIR; }

/// Fresh directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("lftest_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline const laneforge::Track& ring_track() {
    static const laneforge::Track t = laneforge::build_track(laneforge::ring_layout(4, 2));
    return t;
}

/// A long straight run: 12 straights closed by turns at both ends.
inline const laneforge::Track& long_ring_track() {
    static const laneforge::Track t = laneforge::build_track(laneforge::ring_layout(14, 2));
    return t;
}

}  // namespace lftest
