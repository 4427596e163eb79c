#include "effectcast/mask_strategy.hpp"

#include <cmath>
#include <vector>

#include "effectcast/error.hpp"

namespace effectcast {

namespace {

Mask empty_or_fallback(const MaskStrategyConfig& config, Dimensions frame,
                       const Error& cause) {
    if (config.fallback == EmptyMaskFallback::UseFixed) {
        return fixed_mask(frame.width, frame.height, config.fixed_fraction);
    }
    throw cause;
}

}  // namespace

std::string_view to_string(MaskKind kind) {
    switch (kind) {
        case MaskKind::Fixed: return "fixed";
        case MaskKind::HandObject: return "hand_object";
        case MaskKind::Segmentation: return "segmentation";
    }
    return "unknown";
}

std::string_view to_string(EmptyMaskFallback fallback) {
    return fallback == EmptyMaskFallback::Error ? "error" : "use_fixed";
}

MaskKind parse_mask_kind(std::string_view text) {
    if (text == "fixed") return MaskKind::Fixed;
    if (text == "hand_object") return MaskKind::HandObject;
    if (text == "segmentation") return MaskKind::Segmentation;
    throw Error(ErrorCode::Config, "unknown mask strategy '" + std::string(text) + "'");
}

EmptyMaskFallback parse_fallback(std::string_view text) {
    if (text == "error") return EmptyMaskFallback::Error;
    if (text == "use_fixed") return EmptyMaskFallback::UseFixed;
    throw Error(ErrorCode::Config, "unknown fallback '" + std::string(text) + "'");
}

void MaskStrategyConfig::validate() const {
    if (!(fixed_fraction > 0.0 && fixed_fraction <= 1.0)) {
        throw Error(ErrorCode::Config, "fixed_fraction must lie in (0, 1]");
    }
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
        throw Error(ErrorCode::Config, "score_threshold must lie in [0, 1]");
    }
    if (dilation_radius < 0) {
        throw Error(ErrorCode::Config, "dilation_radius must be >= 0");
    }
}

int fixed_mask_first_row(int height, double fraction) {
    // 1 - 2/3 is not exactly 1/3 in binary, and floor() of a product that
    // should be integral can land one row low. Recover p/q when fraction is
    // a ratio of small integers and do the floor in integers.
    for (std::int64_t q = 1; q <= 1000; ++q) {
        const double p = std::round(fraction * static_cast<double>(q));
        if (std::abs(p / static_cast<double>(q) - fraction) <= 1e-12) {
            const auto preserved = static_cast<std::int64_t>(q - static_cast<std::int64_t>(p));
            return static_cast<int>(static_cast<std::int64_t>(height) * preserved / q);
        }
    }
    return static_cast<int>(std::floor(height * (1.0 - fraction)));
}

Mask fixed_mask(int width, int height, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidGeometry, "fixed_mask: fraction must lie in (0, 1]");
    }
    Mask out(width, height);
    for (int y = fixed_mask_first_row(height, fraction); y < height; ++y) {
        for (int x = 0; x < width; ++x) out.set(x, y, true);
    }
    return out;
}

Mask hand_object_mask(std::span<const Detection> detections, int width, int height,
                      double threshold) {
    std::vector<Mask> parts;
    for (const Detection& d : detections) {
        if (d.score > threshold) parts.push_back(rasterize_box(d.box, width, height));
    }
    if (parts.empty()) {
        throw Error(ErrorCode::EmptyMask, "hand_object_mask: no detection scored above " +
                                              std::to_string(threshold));
    }
    return mask_union(parts);
}

Mask segmentation_mask(std::span<const SegmentationRegion> regions, int width, int height,
                       double threshold, const std::optional<std::string>& noun_filter) {
    std::vector<Mask> parts;
    for (const SegmentationRegion& r : regions) {
        if (!(r.score > threshold)) continue;
        if (noun_filter && r.category != *noun_filter) continue;
        for (const Polygon& p : r.polygons) parts.push_back(rasterize_polygon(p, width, height));
    }
    if (parts.empty()) {
        throw Error(ErrorCode::EmptyMask, "segmentation_mask: no region scored above " +
                                              std::to_string(threshold));
    }
    return mask_union(parts);
}

Mask build_mask(const MaskStrategyConfig& config, Dimensions frame,
                std::span<const Detection> detections,
                std::span<const SegmentationRegion> regions) {
    config.validate();
    const auto strategy = [&]() -> Mask {
        switch (config.kind) {
            case MaskKind::Fixed:
                return fixed_mask(frame.width, frame.height, config.fixed_fraction);
            case MaskKind::HandObject:
                return hand_object_mask(detections, frame.width, frame.height,
                                        config.score_threshold);
            case MaskKind::Segmentation:
                return segmentation_mask(regions, frame.width, frame.height,
                                         config.score_threshold, config.noun_filter);
        }
        throw Error(ErrorCode::Config, "unknown mask strategy");
    };
    Mask raw;
    try {
        raw = strategy();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyMask) throw;
        raw = empty_or_fallback(config, frame, e);
    }
    return dilate(raw, config.dilation_radius);
}

}  // namespace effectcast
