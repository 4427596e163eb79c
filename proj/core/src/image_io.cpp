#include "effectcast/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <thread>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include <csetjmp>

#include "effectcast/error.hpp"

namespace effectcast {

namespace fs = std::filesystem;

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff;
}

struct PngImage {
    png_image image{};
    PngImage() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> png_encode(const std::uint8_t* data, int width, int height,
                                     png_uint_32 format, int channels) {
    PngImage png;
    png.image.width = static_cast<png_uint_32>(width);
    png.image.height = static_cast<png_uint_32>(height);
    png.image.format = format;
    png_alloc_size_t size = 0;
    const png_int_32 stride = width * channels;
    if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, data, stride, nullptr)) {
        throw Error(ErrorCode::Io, std::string("png encode: ") + png.image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, data, stride,
                                   nullptr)) {
        throw Error(ErrorCode::Io, std::string("png encode: ") + png.image.message);
    }
    out.resize(size);
    return out;
}

Frame png_decode_rgb(std::span<const std::uint8_t> bytes) {
    PngImage png;
    if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::Parse, std::string("png decode: ") + png.image.message);
    }
    png.image.format = PNG_FORMAT_RGB;
    const int w = static_cast<int>(png.image.width);
    const int h = static_cast<int>(png.image.height);
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::Parse, std::string("png decode: ") + png.image.message);
    }
    return Frame(w, h, std::move(pixels));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

Frame jpeg_decode(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> pixels;
    int w = 0;
    int h = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorCode::Parse, std::string("jpeg decode: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return Frame(w, h, std::move(pixels));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Frame& frame) {
    return png_encode(frame.bytes().data(), frame.width(), frame.height(), PNG_FORMAT_RGB,
                      3);
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return png_decode_rgb(bytes);
    if (is_jpeg(bytes)) return jpeg_decode(bytes);
    throw Error(ErrorCode::Parse, "decode_frame: neither PNG nor JPEG data");
}

Frame read_frame(const fs::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_frame(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_frame(const fs::path& path, const Frame& frame) {
    write_file_atomic(path, encode_png(frame));
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) {
    std::vector<std::uint8_t> gray(mask.bits().size());
    std::transform(mask.bits().begin(), mask.bits().end(), gray.begin(),
                   [](std::uint8_t b) -> std::uint8_t { return b ? 255 : 0; });
    return png_encode(gray.data(), mask.width(), mask.height(), PNG_FORMAT_GRAY, 1);
}

Mask decode_mask(std::span<const std::uint8_t> bytes) {
    if (!is_png(bytes)) throw Error(ErrorCode::Parse, "decode_mask: not PNG data");
    PngImage png;
    if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::Parse, std::string("mask decode: ") + png.image.message);
    }
    png.image.format = PNG_FORMAT_GRAY;
    const int w = static_cast<int>(png.image.width);
    const int h = static_cast<int>(png.image.height);
    std::vector<std::uint8_t> gray(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, gray.data(), 0, nullptr)) {
        throw Error(ErrorCode::Parse, std::string("mask decode: ") + png.image.message);
    }
    Mask mask(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t v = gray[static_cast<std::size_t>(y) * w + x];
            if (v != 0 && v != 255) {
                throw Error(ErrorCode::Validation,
                            "mask decode: pixel (" + std::to_string(x) + "," +
                                std::to_string(y) + ") has gray level " +
                                std::to_string(v) + ", expected 0 or 255");
            }
            mask.set(x, y, v == 255);
        }
    }
    return mask;
}

Mask read_mask(const fs::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_mask(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_mask(const fs::path& path, const Mask& mask) {
    write_file_atomic(path, encode_mask_png(mask));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
    }
}

void write_file_atomic(const fs::path& path, std::string_view text) {
    write_file_atomic(path, std::span<const std::uint8_t>(
                                reinterpret_cast<const std::uint8_t*>(text.data()),
                                text.size()));
}

}  // namespace effectcast
