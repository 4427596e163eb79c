#pragma once

#include <optional>
#include <string>
#include <vector>

#include "effectcast/dataset.hpp"
#include "effectcast/imaging.hpp"

namespace effectcast {

/// Pixel geometry of a contact sheet.
///
/// Row 0 holds the start frame and the ground-truth end frame, row 1 the
/// masks (one per strategy), and each following row one prompt mode with
/// one column per strategy. Every row is a band of 128x128 cells followed
/// by a label strip; 4-pixel gutters surround every cell and strip. The
/// sheet is wide enough for max(2, strategies) cells so the top row always
/// fits both frames.
struct SheetLayout {
    static constexpr int kCell = 128;
    static constexpr int kGutter = 4;
    static constexpr int kLabel = 14;

    int strategies = 0;
    int prompt_modes = 0;

    int rows() const { return 2 + prompt_modes; }
    int columns() const { return strategies; }
    int slot_columns() const { return strategies < 2 ? 2 : strategies; }
    int width() const { return kGutter + slot_columns() * (kCell + kGutter); }
    int height() const { return kGutter + rows() * (kCell + kLabel + kGutter); }

    int cell_x(int column) const { return kGutter + column * (kCell + kGutter); }
    int cell_y(int row) const { return kGutter + row * (kCell + kLabel + kGutter); }
    int label_y(int row) const { return cell_y(row) + kCell; }
};

struct SheetCell {
    std::optional<Frame> output;  // 64x64 backend output; empty renders a placeholder
    std::string error;
};

struct InstanceResults {
    std::string narration_id;
    std::string phrase;
    std::vector<std::string> strategies;    // column labels
    std::vector<std::string> prompt_modes;  // row labels
    std::vector<std::string> prompts;       // one per prompt mode, may be empty
    std::vector<std::optional<Mask>> masks;  // one per strategy, 64x64
    std::vector<std::vector<SheetCell>> cells;  // [prompt mode][strategy]
};

/// Red overlay at 50% blend over mask-true pixels.
Frame overlay_mask(const Frame& frame, const Mask& mask);

/// Draws printable ASCII with the built-in 6x11 bitmap font, clipped to the
/// frame. Returns the x just past the last glyph.
int draw_text(Frame& frame, int x, int y, std::string_view text, Rgb color);

Frame contact_sheet(const InstanceResults& results, const std::optional<FramePair>& frames);

}  // namespace effectcast
