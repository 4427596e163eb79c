#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "effectcast/dataset.hpp"
#include "effectcast/imaging.hpp"

namespace effectcast {

enum class MaskKind { Fixed, HandObject, Segmentation };
enum class EmptyMaskFallback { Error, UseFixed };

std::string_view to_string(MaskKind kind);
std::string_view to_string(EmptyMaskFallback fallback);
MaskKind parse_mask_kind(std::string_view text);
EmptyMaskFallback parse_fallback(std::string_view text);

struct MaskStrategyConfig {
    MaskKind kind = MaskKind::Fixed;
    double fixed_fraction = 2.0 / 3.0;
    // Detections and regions must score strictly above this to be masked.
    double score_threshold = 0.1;
    int dilation_radius = 0;
    EmptyMaskFallback fallback = EmptyMaskFallback::Error;
    // Segmentation only: keep just regions whose category equals this noun.
    std::optional<std::string> noun_filter;

    void validate() const;
};

/// Rows y >= floor(height * (1 - fraction)) are set.
Mask fixed_mask(int width, int height, double fraction);

// Row where the fixed mask begins. Computed in exact rational arithmetic
// when fraction is a ratio of small integers (2/3 lands on floor(h / 3)).
int fixed_mask_first_row(int height, double fraction);

// Both throw Error(EmptyMask) when nothing scores above the threshold.
Mask hand_object_mask(std::span<const Detection> detections, int width, int height,
                      double threshold);
Mask segmentation_mask(std::span<const SegmentationRegion> regions, int width, int height,
                       double threshold, const std::optional<std::string>& noun_filter = {});

/// Dispatches on config.kind, applies the empty-mask fallback, then dilates.
Mask build_mask(const MaskStrategyConfig& config, Dimensions frame,
                std::span<const Detection> detections,
                std::span<const SegmentationRegion> regions);

}  // namespace effectcast
