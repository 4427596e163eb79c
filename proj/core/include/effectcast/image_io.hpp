#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "effectcast/imaging.hpp"

namespace effectcast {

// Frames are stored as 8-bit RGB PNG without alpha. Decoding also accepts
// JPEG and any PNG colour type, converted to RGB.
std::vector<std::uint8_t> encode_png(const Frame& frame);
Frame decode_frame(std::span<const std::uint8_t> bytes);
Frame read_frame(const std::filesystem::path& path);
void write_frame(const std::filesystem::path& path, const Frame& frame);

// Masks are single-channel 8-bit PNG: 0 = preserve, 255 = regenerate. Any
// other gray level is rejected on decode.
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);
Mask decode_mask(std::span<const std::uint8_t> bytes);
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace effectcast
