#include "effectcast/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "effectcast/error.hpp"
#include "effectcast/image_io.hpp"

namespace effectcast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads one CSV record; handles quoted fields with
// embedded commas, doubled quotes and newlines. Returns false at EOF.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, int& line) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c = 0;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line;
            fields.push_back(std::move(field));
            return true;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

std::int64_t parse_index(const std::string& text, const std::string& column, int line,
                         const fs::path& path) {
    std::int64_t value = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value < 0) {
        throw Error(ErrorCode::Parse, path.string() + ": line " + std::to_string(line) +
                                          ": malformed " + column + " '" + text + "'");
    }
    return value;
}

json parse_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
}

std::int64_t parse_frame_key(const std::string& key, const fs::path& path) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), value);
    if (ec != std::errc{} || ptr != key.data() + key.size() || value < 0) {
        throw Error(ErrorCode::Parse,
                    path.string() + ": frame key '" + key + "' is not a frame index");
    }
    return value;
}

double parse_score(const json& record, const std::string& where) {
    if (!record.contains("score") || !record["score"].is_number()) {
        throw Error(ErrorCode::Validation, where + ": missing numeric score");
    }
    const double score = record["score"].get<double>();
    if (!(score >= 0.0 && score <= 1.0)) {
        throw Error(ErrorCode::Validation,
                    where + ": score " + record["score"].dump() + " outside [0, 1]");
    }
    return score;
}

template <typename Record, typename ParseFn>
std::map<std::int64_t, std::vector<Record>> load_table(const fs::path& path, ParseFn parse) {
    const json doc = parse_json_file(path);
    if (!doc.is_object()) {
        throw Error(ErrorCode::Schema, path.string() + ": top level must be an object");
    }
    std::map<std::int64_t, std::vector<Record>> table;
    for (const auto& [key, records] : doc.items()) {
        const std::int64_t frame = parse_frame_key(key, path);
        if (!records.is_array()) {
            throw Error(ErrorCode::Schema,
                        path.string() + ": frame " + key + " must map to a list");
        }
        auto& out = table[frame];
        for (std::size_t i = 0; i < records.size(); ++i) {
            const std::string where =
                path.string() + ": frame " + key + " record " + std::to_string(i);
            if (!records[i].is_object()) {
                throw Error(ErrorCode::Validation, where + ": record must be an object");
            }
            out.push_back(parse(records[i], frame, where));
        }
    }
    return table;
}

Detection parse_detection(const json& r, std::int64_t frame, const std::string& where) {
    Detection d;
    d.frame_index = frame;
    const std::string kind = r.value("kind", std::string{});
    if (kind == "hand") {
        d.kind = DetectionKind::Hand;
    } else if (kind == "object") {
        d.kind = DetectionKind::Object;
    } else {
        throw Error(ErrorCode::Validation, where + ": unknown kind '" + kind + "'");
    }
    const json& box = r.contains("box") ? r["box"] : json();
    if (!box.is_array() || box.size() != 4 ||
        !std::all_of(box.begin(), box.end(), [](const json& v) { return v.is_number(); })) {
        throw Error(ErrorCode::Validation, where + ": box must be [x_min, y_min, x_max, y_max]");
    }
    d.box.x_min = static_cast<int>(std::floor(box[0].get<double>()));
    d.box.y_min = static_cast<int>(std::floor(box[1].get<double>()));
    d.box.x_max = static_cast<int>(std::ceil(box[2].get<double>()));
    d.box.y_max = static_cast<int>(std::ceil(box[3].get<double>()));
    if (d.box.x_min < 0 || d.box.y_min < 0 || d.box.x_min >= d.box.x_max ||
        d.box.y_min >= d.box.y_max) {
        throw Error(ErrorCode::Validation, where + ": degenerate or negative box");
    }
    d.score = parse_score(r, where);
    return d;
}

SegmentationRegion parse_region(const json& r, std::int64_t frame, const std::string& where) {
    SegmentationRegion region;
    region.frame_index = frame;
    if (!r.contains("category") || !r["category"].is_string()) {
        throw Error(ErrorCode::Validation, where + ": missing category");
    }
    region.category = r["category"].get<std::string>();
    const json& polys = r.contains("polygons") ? r["polygons"] : json();
    if (!polys.is_array() || polys.empty()) {
        throw Error(ErrorCode::Validation, where + ": needs at least one polygon");
    }
    for (const json& poly : polys) {
        if (!poly.is_array() || poly.size() < 3) {
            throw Error(ErrorCode::Validation,
                        where + ": polygon needs at least 3 vertices, got " +
                            std::to_string(poly.is_array() ? poly.size() : 0));
        }
        Polygon p;
        for (const json& v : poly) {
            if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                throw Error(ErrorCode::Validation, where + ": vertex must be [x, y]");
            }
            const Point pt{v[0].get<double>(), v[1].get<double>()};
            if (pt.x < 0.0 || pt.y < 0.0) {
                throw Error(ErrorCode::Validation, where + ": negative vertex coordinate");
            }
            p.vertices.push_back(pt);
        }
        region.polygons.push_back(std::move(p));
    }
    region.score = parse_score(r, where);
    return region;
}

}  // namespace

std::string_view to_string(DetectionKind kind) {
    return kind == DetectionKind::Hand ? "hand" : "object";
}

ActionInstance make_action_instance(std::string narration_id, std::string video_id,
                                    std::string participant_id, std::string verb,
                                    std::string noun, std::int64_t start_frame,
                                    std::int64_t stop_frame) {
    if (verb.empty() || noun.empty()) {
        throw Error(ErrorCode::Validation,
                    "action " + narration_id + ": verb and noun must be non-empty");
    }
    if (start_frame < 0 || start_frame >= stop_frame) {
        throw Error(ErrorCode::Validation,
                    "action " + narration_id + ": start_frame " +
                        std::to_string(start_frame) + " must be below stop_frame " +
                        std::to_string(stop_frame));
    }
    ActionInstance a;
    a.narration_id = std::move(narration_id);
    a.video_id = std::move(video_id);
    a.participant_id = std::move(participant_id);
    a.phrase = verb + " " + noun;
    a.verb = std::move(verb);
    a.noun = std::move(noun);
    a.start_frame = start_frame;
    a.stop_frame = stop_frame;
    return a;
}

std::vector<ActionInstance> load_actions(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

    int line = 1;
    std::vector<std::string> fields;
    if (!read_csv_record(in, fields, line)) {
        throw Error(ErrorCode::Schema, path.string() + ": missing header row");
    }
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = i;
    static const char* const required[] = {"narration_id", "participant_id", "video_id",
                                           "start_frame",  "stop_frame",     "verb",
                                           "noun"};
    for (const char* name : required) {
        if (!column.contains(name)) {
            throw Error(ErrorCode::Schema,
                        path.string() + ": missing required column '" + name + "'");
        }
    }

    std::vector<ActionInstance> out;
    while (true) {
        const int record_line = line;
        if (!read_csv_record(in, fields, line)) break;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != column.size()) {
            throw Error(ErrorCode::Parse, path.string() + ": line " +
                                              std::to_string(record_line) + ": expected " +
                                              std::to_string(column.size()) +
                                              " fields, got " + std::to_string(fields.size()));
        }
        const auto get = [&](const char* name) { return fields[column.at(name)]; };
        const auto start = parse_index(get("start_frame"), "start_frame", record_line, path);
        const auto stop = parse_index(get("stop_frame"), "stop_frame", record_line, path);
        try {
            out.push_back(make_action_instance(get("narration_id"), get("video_id"),
                                               get("participant_id"), get("verb"),
                                               get("noun"), start, stop));
        } catch (const Error& e) {
            throw Error(e.code(), path.string() + ": line " + std::to_string(record_line) +
                                      ": " + e.what());
        }
    }
    return out;
}

DetectionTable load_detection_table(const fs::path& path) {
    return load_table<Detection>(path, parse_detection);
}

SegmentationTable load_segmentation_table(const fs::path& path) {
    return load_table<SegmentationRegion>(path, parse_region);
}

std::vector<Detection> load_detections(const fs::path& path, std::int64_t frame_index) {
    auto table = load_detection_table(path);
    const auto it = table.find(frame_index);
    return it == table.end() ? std::vector<Detection>{} : std::move(it->second);
}

std::vector<SegmentationRegion> load_segmentations(const fs::path& path,
                                                   std::int64_t frame_index) {
    auto table = load_segmentation_table(path);
    const auto it = table.find(frame_index);
    return it == table.end() ? std::vector<SegmentationRegion>{} : std::move(it->second);
}

fs::path frame_path(const fs::path& frames_dir, const std::string& video_id,
                    std::int64_t index, const FrameNaming& naming) {
    std::string digits = std::to_string(index);
    if (static_cast<int>(digits.size()) < naming.digits) {
        digits.insert(0, static_cast<std::size_t>(naming.digits) - digits.size(), '0');
    }
    const fs::path stem = frames_dir / video_id / (naming.prefix + digits);
    for (const auto& ext : naming.extensions) {
        fs::path candidate = stem;
        candidate += ext;
        if (fs::exists(candidate)) return candidate;
    }
    fs::path expected = stem;
    expected += naming.extensions.empty() ? std::string{} : naming.extensions.front();
    return expected;
}

FramePair select_frame_pair(const ActionInstance& instance, const fs::path& frames_dir,
                            const FrameNaming& naming) {
    const auto load = [&](std::int64_t index) {
        const fs::path p = frame_path(frames_dir, instance.video_id, index, naming);
        if (!fs::exists(p)) {
            throw Error(ErrorCode::Io, "missing frame file " + p.string() + " for " +
                                           instance.narration_id);
        }
        return read_frame(p);
    };
    FramePair pair{load(instance.start_frame), load(instance.stop_frame)};
    if (dims(pair.start) != dims(pair.end_truth)) {
        throw Error(ErrorCode::DimensionMismatch,
                    instance.narration_id + ": start and end frames differ in size");
    }
    return pair;
}

}  // namespace effectcast
