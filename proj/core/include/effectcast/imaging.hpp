#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace effectcast {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major, three bytes per pixel.
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, Rgb fill = {});
    Frame(int width, int height, std::vector<std::uint8_t> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb value);

    std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }
    std::span<std::uint8_t> bytes() noexcept { return pixels_; }

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Boolean raster aligned to a Frame. true marks a pixel the backend must
/// regenerate; false marks a pixel that must be preserved.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool fill = false);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }

    /// One byte per pixel, 0 or 1.
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    std::size_t count() const noexcept;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Half-open pixel box: [x_min, x_max) x [y_min, y_max).
struct Box {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
    bool valid_for(int width, int height) const noexcept {
        return 0 <= x_min && x_min < x_max && x_max <= width && 0 <= y_min &&
               y_min < y_max && y_max <= height;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct Polygon {
    std::vector<Point> vertices;

    bool valid_for(int width, int height) const noexcept;

    friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct Dimensions {
    int width = 0;
    int height = 0;

    friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

inline Dimensions dims(const Frame& f) { return {f.width(), f.height()}; }
inline Dimensions dims(const Mask& m) { return {m.width(), m.height()}; }

Mask rasterize_box(const Box& box, int width, int height);

// Pixel (x, y) is set when its center (x + 0.5, y + 0.5) lies inside the
// polygon under the even-odd rule.
Mask rasterize_polygon(const Polygon& polygon, int width, int height);

Mask mask_union(std::span<const Mask> masks);

// Chebyshev (square) structuring element.
Mask dilate(const Mask& mask, int radius);

Frame resize_frame(const Frame& frame, int out_w, int out_h);

// Coverage-max reduction: an output pixel is set when any source pixel in
// its footprint is set. Source column sx belongs to output column
// floor(sx * out_w / w) (likewise for rows), so footprints partition the
// source and are never empty for out_w <= w.
Mask downsample_mask(const Mask& mask, int out_w, int out_h);

// Nearest-neighbour enlargement by an integer factor.
Frame upscale_nearest(const Frame& frame, int factor);
Mask upscale_nearest(const Mask& mask, int factor);

double coverage(const Mask& mask);

}  // namespace effectcast
