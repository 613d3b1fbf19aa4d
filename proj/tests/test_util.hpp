#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "hystkin/errors.hpp"

namespace testutil {

// Scratch directory removed at scope exit.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("hystkin_test_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    out << body;
    return path;
}

// The ErrorKind thrown by f, or nullopt if f completes.
template <typename F>
std::optional<hystkin::ErrorKind> kind_of(F&& f) {
    try {
        std::forward<F>(f)();
    } catch (const hystkin::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

}  // namespace testutil
