#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace hystkin::log {

// Verbosity comes from the HYSTKIN_LOG environment variable:
// quiet | info (default) | debug. Everything goes to stderr.
enum class Level { quiet = 0, info = 1, debug = 2 };

inline Level level() {
    static const Level lv = [] {
        const char* env = std::getenv("HYSTKIN_LOG");
        if (env == nullptr) return Level::info;
        const std::string v(env);
        if (v == "quiet") return Level::quiet;
        if (v == "debug") return Level::debug;
        return Level::info;
    }();
    return lv;
}

inline void info(const std::string& msg) {
    if (level() >= Level::info) std::cerr << "hystkin: " << msg << '\n';
}

inline void warn(const std::string& msg) {
    if (level() >= Level::info) std::cerr << "hystkin: warning: " << msg << '\n';
}

inline void debug(const std::string& msg) {
    if (level() >= Level::debug) std::cerr << "hystkin: debug: " << msg << '\n';
}

}  // namespace hystkin::log
