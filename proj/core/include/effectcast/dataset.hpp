#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "effectcast/imaging.hpp"

namespace effectcast {

/// One annotated action segment.
struct ActionInstance {
    std::string narration_id;
    std::string video_id;
    std::string participant_id;
    std::string verb;
    std::string noun;
    std::string phrase;
    std::int64_t start_frame = 0;
    std::int64_t stop_frame = 1;
};

/// Validates and builds an instance; phrase is verb + " " + noun.
ActionInstance make_action_instance(std::string narration_id, std::string video_id,
                                    std::string participant_id, std::string verb,
                                    std::string noun, std::int64_t start_frame,
                                    std::int64_t stop_frame);

enum class DetectionKind { Hand, Object };

std::string_view to_string(DetectionKind kind);

struct Detection {
    std::int64_t frame_index = 0;
    DetectionKind kind = DetectionKind::Hand;
    Box box;
    double score = 0.0;
};

struct SegmentationRegion {
    std::int64_t frame_index = 0;
    std::string category;
    std::vector<Polygon> polygons;
    double score = 0.0;
};

struct FramePair {
    Frame start;
    Frame end_truth;
};

// Comma-separated with a header row naming at least narration_id,
// participant_id, video_id, start_frame, stop_frame, verb, noun. Extra
// columns are ignored; quoted fields follow RFC 4180.
std::vector<ActionInstance> load_actions(const std::filesystem::path& path);

using DetectionTable = std::map<std::int64_t, std::vector<Detection>>;
using SegmentationTable = std::map<std::int64_t, std::vector<SegmentationRegion>>;

// One JSON document per video, keyed by frame index (as a string).
// Detection record: {"kind": "hand"|"object", "box": [x0,y0,x1,y1], "score": s}.
// Box corners may be fractional; they are widened to the enclosing
// half-open integer box.
DetectionTable load_detection_table(const std::filesystem::path& path);

// Segmentation record: {"category": c, "polygons": [[[x,y],...],...], "score": s}.
SegmentationTable load_segmentation_table(const std::filesystem::path& path);

std::vector<Detection> load_detections(const std::filesystem::path& path,
                                       std::int64_t frame_index);
std::vector<SegmentationRegion> load_segmentations(const std::filesystem::path& path,
                                                   std::int64_t frame_index);

struct FrameNaming {
    std::string prefix = "frame_";
    int digits = 10;
    std::vector<std::string> extensions = {".jpg", ".png"};
};

/// frames_dir/<video_id>/<prefix><zero-padded index><ext>, first extension
/// that exists wins.
std::filesystem::path frame_path(const std::filesystem::path& frames_dir,
                                 const std::string& video_id, std::int64_t index,
                                 const FrameNaming& naming = {});

FramePair select_frame_pair(const ActionInstance& instance,
                            const std::filesystem::path& frames_dir,
                            const FrameNaming& naming = {});

}  // namespace effectcast
