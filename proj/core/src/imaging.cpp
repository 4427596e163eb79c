#include "effectcast/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "effectcast/error.hpp"

namespace effectcast {

namespace {

void require_positive(int width, int height, const char* what) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidGeometry,
                    std::string(what) + ": dimensions must be at least 1x1, got " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
}

std::size_t pixel_count(int width, int height) {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

Frame::Frame(int width, int height, Rgb fill) : width_(width), height_(height) {
    require_positive(width, height, "Frame");
    pixels_.resize(pixel_count(width, height) * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = fill.r;
        pixels_[i + 1] = fill.g;
        pixels_[i + 2] = fill.b;
    }
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    require_positive(width, height, "Frame");
    if (pixels_.size() != pixel_count(width, height) * 3) {
        throw Error(ErrorCode::DimensionMismatch,
                    "Frame: pixel buffer holds " + std::to_string(pixels_.size()) +
                        " bytes, expected " +
                        std::to_string(pixel_count(width, height) * 3));
    }
}

Rgb Frame::at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Frame::set(int x, int y, Rgb value) {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    pixels_[i] = value.r;
    pixels_[i + 1] = value.g;
    pixels_[i + 2] = value.b;
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
    require_positive(width, height, "Mask");
    bits_.assign(pixel_count(width, height), fill ? 1 : 0);
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

bool Polygon::valid_for(int width, int height) const noexcept {
    if (vertices.size() < 3) return false;
    return std::all_of(vertices.begin(), vertices.end(), [&](const Point& p) {
        return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
    });
}

Mask rasterize_box(const Box& box, int width, int height) {
    require_positive(width, height, "rasterize_box");
    if (!box.valid_for(width, height)) {
        throw Error(ErrorCode::InvalidGeometry,
                    "rasterize_box: box (" + std::to_string(box.x_min) + "," +
                        std::to_string(box.y_min) + "," + std::to_string(box.x_max) +
                        "," + std::to_string(box.y_max) + ") is degenerate or outside " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
    Mask out(width, height);
    for (int y = box.y_min; y < box.y_max; ++y) {
        for (int x = box.x_min; x < box.x_max; ++x) out.set(x, y, true);
    }
    return out;
}

Mask rasterize_polygon(const Polygon& polygon, int width, int height) {
    require_positive(width, height, "rasterize_polygon");
    if (polygon.vertices.size() < 3) {
        throw Error(ErrorCode::InvalidGeometry,
                    "rasterize_polygon: need at least 3 vertices, got " +
                        std::to_string(polygon.vertices.size()));
    }
    if (!polygon.valid_for(width, height)) {
        throw Error(ErrorCode::InvalidGeometry,
                    "rasterize_polygon: vertex outside " + std::to_string(width) + "x" +
                        std::to_string(height));
    }

    // Scanline fill at pixel-center rows. An edge contributes a crossing for
    // row center cy when it spans cy under the half-open rule
    // (y0 <= cy < y1 or y1 <= cy < y0); horizontal edges never contribute.
    // Pixels whose centers lie between crossing pairs are inside. The crossing
    // is evaluated with the classic point-in-polygon expression, anchored at
    // the edge's end vertex, so centers lying exactly on an edge or a vertex
    // classify the same way a per-point even-odd test would.
    Mask out(width, height);
    const auto& v = polygon.vertices;
    std::vector<double> crossings;
    for (int y = 0; y < height; ++y) {
        const double cy = y + 0.5;
        crossings.clear();
        for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
            const Point& a = v[j];
            const Point& b = v[i];
            if ((a.y <= cy) != (b.y <= cy)) {
                crossings.push_back((a.x - b.x) * (cy - b.y) / (a.y - b.y) + b.x);
            }
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
            // Inside when left <= cx < right, the ray-casting convention for
            // centers that land exactly on a crossing.
            const double left = crossings[k];
            const double right = crossings[k + 1];
            int x_begin = std::max(0, static_cast<int>(std::floor(left)) - 1);
            while (x_begin + 0.5 < left) ++x_begin;
            int x_end = std::max(x_begin, static_cast<int>(std::floor(right)) - 1);
            while (x_end + 0.5 < right) ++x_end;
            x_end = std::min(x_end, width);
            for (int x = x_begin; x < x_end; ++x) out.set(x, y, !out.at(x, y));
        }
    }
    return out;
}

Mask mask_union(std::span<const Mask> masks) {
    if (masks.empty()) {
        throw Error(ErrorCode::EmptyInput, "mask_union: empty mask list");
    }
    Mask out(masks.front().width(), masks.front().height());
    for (const Mask& m : masks) {
        if (dims(m) != dims(out)) {
            throw Error(ErrorCode::DimensionMismatch,
                        "mask_union: mask of " + std::to_string(m.width()) + "x" +
                            std::to_string(m.height()) + " does not match " +
                            std::to_string(out.width()) + "x" +
                            std::to_string(out.height()));
        }
        for (int y = 0; y < m.height(); ++y) {
            for (int x = 0; x < m.width(); ++x) {
                if (m.at(x, y)) out.set(x, y, true);
            }
        }
    }
    return out;
}

Mask dilate(const Mask& mask, int radius) {
    if (radius < 0) {
        throw Error(ErrorCode::InvalidGeometry,
                    "dilate: radius must be >= 0, got " + std::to_string(radius));
    }
    if (radius == 0) return mask;
    const int w = mask.width();
    const int h = mask.height();

    // The square element is separable: a horizontal pass then a vertical one.
    Mask horizontal(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            const int lo = std::max(0, x - radius);
            const int hi = std::min(w - 1, x + radius);
            for (int k = lo; k <= hi; ++k) horizontal.set(k, y, true);
        }
    }
    Mask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!horizontal.at(x, y)) continue;
            const int lo = std::max(0, y - radius);
            const int hi = std::min(h - 1, y + radius);
            for (int k = lo; k <= hi; ++k) out.set(x, k, true);
        }
    }
    return out;
}

Frame resize_frame(const Frame& frame, int out_w, int out_h) {
    require_positive(out_w, out_h, "resize_frame");
    if (out_w == frame.width() && out_h == frame.height()) return frame;

    // Half-pixel-center alignment with edge clamping.
    const double sx = static_cast<double>(frame.width()) / out_w;
    const double sy = static_cast<double>(frame.height()) / out_h;
    const auto src = frame.bytes();
    const int fw = frame.width();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_w) * out_h * 3);

    for (int oy = 0; oy < out_h; ++oy) {
        const double y = std::clamp((oy + 0.5) * sy - 0.5, 0.0,
                                    static_cast<double>(frame.height() - 1));
        const int y0 = static_cast<int>(std::floor(y));
        const int y1 = std::min(y0 + 1, frame.height() - 1);
        const double fy = y - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double x = std::clamp((ox + 0.5) * sx - 0.5, 0.0,
                                        static_cast<double>(fw - 1));
            const int x0 = static_cast<int>(std::floor(x));
            const int x1 = std::min(x0 + 1, fw - 1);
            const double fx = x - x0;
            for (int c = 0; c < 3; ++c) {
                const auto p = [&](int px, int py) {
                    return static_cast<double>(
                        src[(static_cast<std::size_t>(py) * fw + px) * 3 + c]);
                };
                const double top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                const double bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                const double value = top * (1.0 - fy) + bottom * fy;
                out[(static_cast<std::size_t>(oy) * out_w + ox) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
            }
        }
    }
    return Frame(out_w, out_h, std::move(out));
}

Mask downsample_mask(const Mask& mask, int out_w, int out_h) {
    require_positive(out_w, out_h, "downsample_mask");
    if (out_w > mask.width() || out_h > mask.height()) {
        throw Error(ErrorCode::UnsupportedDirection,
                    "downsample_mask: cannot upscale " + std::to_string(mask.width()) +
                        "x" + std::to_string(mask.height()) + " to " +
                        std::to_string(out_w) + "x" + std::to_string(out_h));
    }
    Mask out(out_w, out_h);
    const std::int64_t w = mask.width();
    const std::int64_t h = mask.height();
    for (std::int64_t y = 0; y < h; ++y) {
        const int oy = static_cast<int>(y * out_h / h);
        for (std::int64_t x = 0; x < w; ++x) {
            if (mask.at(static_cast<int>(x), static_cast<int>(y))) {
                out.set(static_cast<int>(x * out_w / w), oy, true);
            }
        }
    }
    return out;
}

Frame upscale_nearest(const Frame& frame, int factor) {
    if (factor < 1) {
        throw Error(ErrorCode::InvalidGeometry, "upscale_nearest: factor must be >= 1");
    }
    Frame out(frame.width() * factor, frame.height() * factor);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) out.set(x, y, frame.at(x / factor, y / factor));
    }
    return out;
}

Mask upscale_nearest(const Mask& mask, int factor) {
    if (factor < 1) {
        throw Error(ErrorCode::InvalidGeometry, "upscale_nearest: factor must be >= 1");
    }
    Mask out(mask.width() * factor, mask.height() * factor);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) out.set(x, y, mask.at(x / factor, y / factor));
    }
    return out;
}

double coverage(const Mask& mask) {
    const auto bits = mask.bits();
    if (bits.empty()) return 0.0;
    return static_cast<double>(mask.count()) / static_cast<double>(bits.size());
}

}  // namespace effectcast
