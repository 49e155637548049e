#include "semform/digest.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <zlib.h>

#include "semform/error.hpp"

namespace semform {

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
        throw std::runtime_error("SHA-256 computation failed");
    return out;
}

std::array<std::uint8_t, 32> sha256(std::string_view data) {
    return sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(std::span<const std::uint8_t> data) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }
std::string sha256_hex(std::span<const std::uint8_t> data) { return to_hex(sha256(data)); }

bool is_hex_digest(std::string_view s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

std::string base64_encode(std::span<const std::uint8_t> data) {
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

Bytes base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
    if (clean.size() % 4 != 0) throw DataError("base64: length is not a multiple of 4");
    Bytes out(3 * clean.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) throw DataError("base64: malformed input");
    std::size_t size = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the bytes produced by '=' padding.
    if (!clean.empty() && clean.back() == '=') --size;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') --size;
    out.resize(size);
    return out;
}

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

void put_chunk(Bytes& out, const char type[4], std::span<const std::uint8_t> data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

Bytes encode_png_rgb(std::uint32_t width, std::uint32_t height, std::span<const std::uint8_t> rgb) {
    if (width == 0 || height == 0) throw DataError("png: zero-sized image");
    if (rgb.size() != std::size_t{width} * height * 3) throw DataError("png: pixel buffer size mismatch");
    Bytes out(std::begin(kPngSignature), std::end(kPngSignature));

    Bytes ihdr;
    put_u32(ihdr, width);
    put_u32(ihdr, height);
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    put_chunk(out, "IHDR", ihdr);

    Bytes raw;
    raw.reserve((std::size_t{width} * 3 + 1) * height);
    for (std::uint32_t y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        const auto row = rgb.subspan(std::size_t{y} * width * 3, std::size_t{width} * 3);
        raw.insert(raw.end(), row.begin(), row.end());
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    Bytes packed(packed_size);
    if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw std::runtime_error("png: deflate failed");
    packed.resize(packed_size);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

PngInfo parse_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || !std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin()))
        throw DataError("not a PNG: bad signature");
    PngInfo info;
    std::size_t at = 8;
    bool first = true;
    bool seen_idat = false;
    while (true) {
        if (at + 12 > bytes.size()) throw DataError("PNG truncated: missing IEND");
        const std::uint32_t len = get_u32(bytes, at);
        if (at + 12 + std::size_t{len} > bytes.size()) throw DataError("PNG truncated inside a chunk");
        const std::string type(reinterpret_cast<const char*>(bytes.data() + at + 4), 4);
        const auto crc = crc32(0L, bytes.data() + at + 4, static_cast<uInt>(4 + len));
        if (static_cast<std::uint32_t>(crc) != get_u32(bytes, at + 8 + len))
            throw DataError(fmt::format("PNG chunk {} has a bad CRC", type));
        if (first) {
            if (type != "IHDR" || len != 13) throw DataError("PNG does not start with IHDR");
            info.width = get_u32(bytes, at + 8);
            info.height = get_u32(bytes, at + 12);
            info.bit_depth = bytes[at + 16];
            info.color_type = bytes[at + 17];
            if (info.width == 0 || info.height == 0) throw DataError("PNG has zero dimensions");
            first = false;
        }
        if (type == "IDAT") seen_idat = true;
        at += 12 + len;
        if (type == "IEND") break;
    }
    if (!seen_idat) throw DataError("PNG has no image data");
    return info;
}

bool is_png(std::span<const std::uint8_t> bytes) {
    try {
        parse_png(bytes);
        return true;
    } catch (const DataError&) {
        return false;
    }
}

}  // namespace semform
