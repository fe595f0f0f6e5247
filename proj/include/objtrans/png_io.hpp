#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "objtrans/image.hpp"

namespace objtrans::png {

// Decoders accept any PNG color type and normalize to 8-bit RGB; alpha is
// dropped. All functions throw DataError on malformed input or I/O failure.
ImageFrame decode_rgb(std::span<const std::uint8_t> bytes, std::string image_id = {});
ImageFrame read_rgb(const std::filesystem::path& path);

// Encoding uses fixed zlib settings and writes no time chunk, so equal
// frames encode to equal bytes.
std::vector<std::uint8_t> encode_rgb(const ImageFrame& img);
void write_rgb(const std::filesystem::path& path, const ImageFrame& img);

struct Gray16 {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint16_t> values;  // row-major
};

// Single-channel 16-bit rasters (instance id maps). 8-bit grayscale input is
// widened without rescaling.
Gray16 read_gray16(const std::filesystem::path& path);
void write_gray16(const std::filesystem::path& path, const Gray16& raster);

}  // namespace objtrans::png
