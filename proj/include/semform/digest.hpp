#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semform {

using Bytes = std::vector<std::uint8_t>;

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);
std::array<std::uint8_t, 32> sha256(std::string_view data);
/// Lowercase 64-char hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> data);
bool is_hex_digest(std::string_view s);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws DataError on malformed input.
Bytes base64_decode(std::string_view text);

/// 1-pixel-per-entry RGB image encoded as an 8-bit truecolor PNG.
Bytes encode_png_rgb(std::uint32_t width, std::uint32_t height, std::span<const std::uint8_t> rgb);

struct PngInfo {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint8_t bit_depth = 0;
    std::uint8_t color_type = 0;
};

/// Structural PNG check: signature, IHDR first, chunk CRCs, IEND last.
/// Throws DataError describing the first defect.
PngInfo parse_png(std::span<const std::uint8_t> bytes);
bool is_png(std::span<const std::uint8_t> bytes);

}  // namespace semform
