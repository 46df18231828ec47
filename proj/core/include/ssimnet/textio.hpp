#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace ssimnet {

// Shortest decimal form that parses back to exactly the same value.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
    const char* b = text.data();
    const auto res = std::from_chars(b, b + text.size(), out);
    return res.ec == std::errc() && res.ptr == b + text.size();
}

inline bool parse_u64(std::string_view text, std::uint64_t& out) {
    const char* b = text.data();
    const auto res = std::from_chars(b, b + text.size(), out);
    return res.ec == std::errc() && res.ptr == b + text.size();
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace ssimnet
