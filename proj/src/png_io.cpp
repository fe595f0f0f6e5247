#include "objtrans/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "objtrans/errors.hpp"

namespace objtrans::png {

namespace {

struct ReadCursor {
    std::span<const std::uint8_t> data;
    std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->offset + n > cur->data.size()) {
        png_error(png, "unexpected end of PNG data");
    }
    std::memcpy(out, cur->data.data() + cur->offset, n);
    cur->offset += n;
}

void write_to_vector(png_structp png, png_bytep in, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), in, in + n);
}

void flush_noop(png_structp) {}

void on_error(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text != nullptr) {
        *text = msg;
    }
    png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("short write to " + path.string());
    }
}

// Decodes into interleaved rows. `want_gray16` selects 16-bit single channel
// output; otherwise 8-bit RGB.
struct Decoded {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> rows;
};

Decoded decode(std::span<const std::uint8_t> bytes, bool want_gray16) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw DataError("not a PNG stream");
    }
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
    if (png == nullptr) {
        throw DataError("png_create_read_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png_create_info_struct failed");
    }
    ReadCursor cursor{bytes, 0};
    Decoded out;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("PNG decode failed: " + err);
    }
    png_set_read_fn(png, &cursor, read_from_memory);
    png_read_info(png, info);

    out.width = png_get_image_width(png, info);
    out.height = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (want_gray16) {
        if (color != PNG_COLOR_TYPE_GRAY) {
            png_error(png, "instance mask must be single-channel grayscale");
        }
        if (depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
        if (depth <= 8) {
            // widen later by hand
        } else {
            png_set_swap(png);  // host little-endian 16-bit samples
        }
    } else {
        if (color == PNG_COLOR_TYPE_PALETTE) {
            png_set_palette_to_rgb(png);
        }
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
        if (png_get_valid(png, info, PNG_INFO_tRNS)) {
            png_set_tRNS_to_alpha(png);
        }
        if (depth == 16) {
            png_set_strip_16(png);
        }
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
            png_set_gray_to_rgb(png);
        }
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    std::size_t rowbytes = png_get_rowbytes(png, info);
    out.rows.resize(rowbytes * out.height);
    row_ptrs.resize(out.height);
    for (std::uint32_t y = 0; y < out.height; ++y) {
        row_ptrs[y] = out.rows.data() + y * rowbytes;
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    if (want_gray16 && depth <= 8) {
        std::vector<std::uint8_t> wide(std::size_t{out.width} * out.height * 2);
        for (std::size_t i = 0; i < std::size_t{out.width} * out.height; ++i) {
            std::uint16_t v = out.rows[i];
            std::memcpy(wide.data() + 2 * i, &v, 2);
        }
        out.rows = std::move(wide);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

std::vector<std::uint8_t> encode(std::uint32_t width, std::uint32_t height, int color, int depth,
                                 const std::uint8_t* data, std::size_t rowbytes, bool swap16) {
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
    if (png == nullptr) {
        throw DataError("png_create_write_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png_create_info_struct failed");
    }
    std::vector<std::uint8_t> out;
    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG encode failed: " + err);
    }
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, width, height, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (swap16) {
        png_set_swap(png);
    }
    for (std::uint32_t y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(data + y * rowbytes);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

}  // namespace

ImageFrame decode_rgb(std::span<const std::uint8_t> bytes, std::string image_id) {
    auto d = decode(bytes, false);
    return {d.width, d.height, std::move(d.rows), std::move(image_id)};
}

ImageFrame read_rgb(const std::filesystem::path& path) {
    auto bytes = slurp(path);
    try {
        return decode_rgb(bytes, path.stem().string());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_rgb(const ImageFrame& img) {
    return encode(img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8, img.pixels().data(),
                  std::size_t{img.width()} * 3, false);
}

void write_rgb(const std::filesystem::path& path, const ImageFrame& img) {
    spit(path, encode_rgb(img));
}

Gray16 read_gray16(const std::filesystem::path& path) {
    auto bytes = slurp(path);
    Decoded d;
    try {
        d = decode(bytes, true);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    Gray16 out{d.width, d.height, std::vector<std::uint16_t>(std::size_t{d.width} * d.height)};
    std::memcpy(out.values.data(), d.rows.data(), out.values.size() * 2);
    return out;
}

void write_gray16(const std::filesystem::path& path, const Gray16& raster) {
    if (raster.values.size() != std::size_t{raster.width} * raster.height) {
        throw DataError("gray16 raster size mismatch");
    }
    auto bytes = encode(raster.width, raster.height, PNG_COLOR_TYPE_GRAY, 16,
                        reinterpret_cast<const std::uint8_t*>(raster.values.data()),
                        std::size_t{raster.width} * 2, true);
    spit(path, bytes);
}

}  // namespace objtrans::png
