// Brute-force reference implementations and random generators shared by the
// unit tests and the acceptance binary. Every oracle here is written per pixel
// and independently of the library code it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "effectcast/dataset.hpp"
#include "effectcast/imaging.hpp"

namespace oracle {

using effectcast::Box;
using effectcast::Detection;
using effectcast::Frame;
using effectcast::Mask;
using effectcast::Point;
using effectcast::Polygon;

inline Mask box(const Box& b, int w, int h) {
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.set(x, y, b.x_min <= x && x < b.x_max && b.y_min <= y && y < b.y_max);
    return m;
}

// Classic PNPOLY crossing test at the pixel centre.
inline bool inside_even_odd(const Polygon& poly, double px, double py) {
    bool in = false;
    const auto& v = poly.vertices;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > py) != (v[j].y > py)) {
            const double xc = (v[j].x - v[i].x) * (py - v[i].y) / (v[j].y - v[i].y) + v[i].x;
            if (px < xc) in = !in;
        }
    }
    return in;
}

inline Mask polygon(const Polygon& p, int w, int h) {
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, inside_even_odd(p, x + 0.5, y + 0.5));
    return m;
}

inline Mask union_of(const std::vector<Mask>& ms) {
    Mask out(ms.front().width(), ms.front().height());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            bool any = false;
            for (const auto& m : ms) any = any || m.at(x, y);
            out.set(x, y, any);
        }
    return out;
}

inline Mask chebyshev_dilate(const Mask& m, int r) {
    Mask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            bool hit = false;
            for (int sy = 0; sy < m.height() && !hit; ++sy)
                for (int sx = 0; sx < m.width() && !hit; ++sx)
                    hit = m.at(sx, sy) && std::max(std::abs(sx - x), std::abs(sy - y)) <= r;
            out.set(x, y, hit);
        }
    return out;
}

// Output cell (ox, oy) owns the source pixels whose scaled coordinate
// floor(s * out / in) lands on it; the cells partition the source.
inline Mask footprint_max(const Mask& m, int ow, int oh) {
    Mask out(ow, oh);
    for (int sy = 0; sy < m.height(); ++sy)
        for (int sx = 0; sx < m.width(); ++sx) {
            if (!m.at(sx, sy)) continue;
            const int ox = static_cast<int>(static_cast<std::int64_t>(sx) * ow / m.width());
            const int oy = static_cast<int>(static_cast<std::int64_t>(sy) * oh / m.height());
            out.set(ox, oy, true);
        }
    return out;
}

inline Mask threshold_union(const std::vector<Detection>& ds, int w, int h, double t) {
    Mask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool any = false;
            for (const auto& d : ds) {
                const auto& b = d.box;
                any = any || (d.score > t && b.x_min <= x && x < b.x_max && b.y_min <= y &&
                              y < b.y_max);
            }
            out.set(x, y, any);
        }
    return out;
}

inline bool subset(const Mask& a, const Mask& b) {
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x)
            if (a.at(x, y) && !b.at(x, y)) return false;
    return true;
}

class Random {
public:
    explicit Random(std::uint32_t seed) : gen_(seed) {}

    int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    double real(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(gen_); }
    std::uint64_t u64() { return std::uniform_int_distribution<std::uint64_t>()(gen_); }

    Mask mask(int w, int h, double density = 0.3) {
        Mask m(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) m.set(x, y, coin(density));
        return m;
    }

    Box box(int w, int h) {
        Box b;
        b.x_min = uniform(0, w - 1);
        b.x_max = uniform(b.x_min + 1, w);
        b.y_min = uniform(0, h - 1);
        b.y_max = uniform(b.y_min + 1, h);
        return b;
    }

    // Random simple or self-intersecting polygon with vertices in the canvas.
    Polygon polygon(int w, int h) {
        Polygon p;
        const int n = uniform(3, 8);
        for (int i = 0; i < n; ++i) {
            // Mix integer and fractional coordinates so edges through pixel
            // centres and exact half-integers are both exercised.
            const double x = coin() ? uniform(0, 2 * w) / 2.0 : real(0.0, w);
            const double y = coin() ? uniform(0, 2 * h) / 2.0 : real(0.0, h);
            p.vertices.push_back({x, y});
        }
        return p;
    }

    Frame frame(int w, int h) {
        Frame f(w, h);
        for (auto& b : f.bytes()) b = static_cast<std::uint8_t>(uniform(0, 255));
        return f;
    }

    std::vector<Detection> detections(int w, int h, int max_count = 6) {
        std::vector<Detection> ds(static_cast<std::size_t>(uniform(0, max_count)));
        for (auto& d : ds) {
            d.kind = coin() ? effectcast::DetectionKind::Hand : effectcast::DetectionKind::Object;
            d.box = box(w, h);
            // Round to a 0.05 grid so ties with thresholds actually occur.
            d.score = uniform(0, 20) / 20.0;
        }
        return ds;
    }

    std::mt19937& engine() { return gen_; }

private:
    std::mt19937 gen_;
};

}  // namespace oracle
