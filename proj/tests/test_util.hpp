#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "lexcurate/random.hpp"

namespace lexcurate::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = "lexcurate";
        if (info) name += std::string("-") + info->test_suite_name() + "-" + info->name();
        for (auto& c : name) {
            if (c == '/') c = '_';
        }
        path_ = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string random_word(Rng& rng, std::size_t alphabet, std::size_t max_len = 3) {
    std::string w;
    const auto len = 1 + uniform_below(rng, max_len);
    for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + uniform_below(rng, alphabet));
    return w;
}

}  // namespace lexcurate::testing
