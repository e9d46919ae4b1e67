#pragma once

// Little-endian helpers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "qcreg/errors.hpp"

namespace qcreg::detail {

inline void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

inline void put_f32(std::vector<std::uint8_t> &out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32(const std::uint8_t *p) noexcept {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32(const std::uint8_t *p) noexcept { return std::bit_cast<float>(get_u32(p)); }

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes);

struct Header {
    std::uint32_t first = 0;
    std::uint32_t second = 0;
};

// Checks the magic and two non-zero u32 dimensions of a 12-byte header.
inline Header read_dims(const std::vector<std::uint8_t> &bytes, const char (&magic)[5]) {
    if (bytes.size() < 4) {
        throw FormatError(FormatErrorKind::Truncated, bytes.size(), "file shorter than the 4-byte magic");
    }
    if (std::memcmp(bytes.data(), magic, 4) != 0) {
        throw FormatError(FormatErrorKind::BadMagic, 0,
                          "expected magic '" + std::string(magic) + "', found '" +
                              std::string(reinterpret_cast<const char *>(bytes.data()), 4) + "'");
    }
    if (bytes.size() < 12) {
        throw FormatError(FormatErrorKind::Truncated, bytes.size(),
                          "header needs 12 bytes, file has " + std::to_string(bytes.size()));
    }
    Header h{get_u32(bytes.data() + 4), get_u32(bytes.data() + 8)};
    if (h.first == 0) throw FormatError(FormatErrorKind::ZeroDimension, 4, "first dimension is zero");
    if (h.second == 0) throw FormatError(FormatErrorKind::ZeroDimension, 8, "second dimension is zero");
    return h;
}

// Exact-length contract: shorter is Truncated, longer is TrailingBytes.
inline void check_length(const std::vector<std::uint8_t> &bytes, std::uint64_t expected) {
    const std::uint64_t actual = bytes.size();
    if (actual < expected) {
        throw FormatError(FormatErrorKind::Truncated, actual,
                          "expected " + std::to_string(expected) + " bytes, got " + std::to_string(actual));
    }
    if (actual > expected) {
        throw FormatError(FormatErrorKind::TrailingBytes, expected,
                          std::to_string(actual - expected) + " bytes after the payload (expected " +
                              std::to_string(expected) + ", got " + std::to_string(actual) + ")");
    }
}

} // namespace qcreg::detail
