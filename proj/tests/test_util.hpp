#pragma once

#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "loadfc/calendar.hpp"
#include "loadfc/series.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("loadfc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Single-channel hourly series from plain values; NaN marks a missing slot.
inline loadfc::HourlySeries series_of(const std::vector<double>& values,
                                      loadfc::Timestamp start = loadfc::make_timestamp(2014, 1, 6)) {
    loadfc::Channel ch;
    for (double v : values) {
        if (std::isnan(v)) ch.emplace_back();
        else ch.emplace_back(v);
    }
    return loadfc::HourlySeries(start, {"Aggregate"}, {ch});
}

inline std::vector<double> values_of(const loadfc::Channel& ch) {
    std::vector<double> out;
    for (const auto& v : ch) out.push_back(v ? *v : std::nan(""));
    return out;
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace testutil
