#include "effectcast/sheet.hpp"

#include <algorithm>

#include "effectcast/error.hpp"
#include "font_data.hpp"

namespace effectcast {

namespace {

constexpr Rgb kBackground{24, 24, 24};
constexpr Rgb kLabelColor{230, 230, 230};
constexpr Rgb kPlaceholder{64, 64, 64};
constexpr Rgb kErrorColor{220, 60, 60};

void blit(Frame& dst, const Frame& src, int x0, int y0) {
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) dst.set(x0 + x, y0 + y, src.at(x, y));
    }
}

// Fits any frame into a kCell square: exact multiples of 64 use
// nearest-neighbour, everything else bilinear.
Frame to_cell(const Frame& f) {
    constexpr int cell = SheetLayout::kCell;
    if (f.width() == f.height() && cell % f.width() == 0) {
        return upscale_nearest(f, cell / f.width());
    }
    return resize_frame(f, cell, cell);
}

Mask mask_to_cell(const Mask& m) {
    constexpr int cell = SheetLayout::kCell;
    Mask out(cell, cell);
    for (int y = 0; y < cell; ++y) {
        for (int x = 0; x < cell; ++x) {
            out.set(x, y, m.at(x * m.width() / cell, y * m.height() / cell));
        }
    }
    return out;
}

void draw_placeholder(Frame& sheet, int x0, int y0, std::string_view reason) {
    constexpr int cell = SheetLayout::kCell;
    for (int y = 0; y < cell; ++y) {
        for (int x = 0; x < cell; ++x) sheet.set(x0 + x, y0 + y, kPlaceholder);
    }
    for (int i = 0; i < cell; ++i) {
        sheet.set(x0 + i, y0 + i, kErrorColor);
        sheet.set(x0 + cell - 1 - i, y0 + i, kErrorColor);
    }
    const int text_y = y0 + cell / 2 - detail::kGlyphHeight / 2;
    const std::string label = reason.empty() ? "missing" : std::string(reason);
    draw_text(sheet, x0 + 4, text_y, label.substr(0, (cell - 8) / detail::kGlyphWidth),
              kLabelColor);
}

std::string fit(std::string_view text, int pixels) {
    const auto max_chars = static_cast<std::size_t>(std::max(0, pixels / detail::kGlyphWidth));
    if (text.size() <= max_chars) return std::string(text);
    if (max_chars < 3) return std::string(text.substr(0, max_chars));
    return std::string(text.substr(0, max_chars - 2)) + "..";
}

}  // namespace

Frame overlay_mask(const Frame& frame, const Mask& mask) {
    if (dims(frame) != dims(mask)) {
        throw Error(ErrorCode::DimensionMismatch, "overlay_mask: size mismatch");
    }
    Frame out = frame;
    for (int y = 0; y < frame.height(); ++y) {
        for (int x = 0; x < frame.width(); ++x) {
            if (!mask.at(x, y)) continue;
            const Rgb p = frame.at(x, y);
            out.set(x, y,
                    {static_cast<std::uint8_t>((p.r + 255) / 2),
                     static_cast<std::uint8_t>(p.g / 2), static_cast<std::uint8_t>(p.b / 2)});
        }
    }
    return out;
}

int draw_text(Frame& frame, int x, int y, std::string_view text, Rgb color) {
    for (char c : text) {
        if (c < detail::kFirstGlyph || c > detail::kLastGlyph) c = '?';
        const auto& glyph = detail::kGlyphs[static_cast<std::size_t>(c - detail::kFirstGlyph)];
        for (int row = 0; row < detail::kGlyphHeight; ++row) {
            for (int col = 0; col < detail::kGlyphWidth; ++col) {
                if ((glyph[row] >> (detail::kGlyphWidth - 1 - col) & 1) == 0) continue;
                const int px = x + col;
                const int py = y + row;
                if (px >= 0 && py >= 0 && px < frame.width() && py < frame.height()) {
                    frame.set(px, py, color);
                }
            }
        }
        x += detail::kGlyphWidth;
    }
    return x;
}

Frame contact_sheet(const InstanceResults& results, const std::optional<FramePair>& frames) {
    const SheetLayout layout{static_cast<int>(results.strategies.size()),
                             static_cast<int>(results.prompt_modes.size())};
    Frame sheet(layout.width(), layout.height(), kBackground);
    const int label_offset = (SheetLayout::kLabel - detail::kGlyphHeight) / 2;
    const int cell = SheetLayout::kCell;
    const auto cell_label = [&](int row, int column, std::string_view text) {
        draw_text(sheet, layout.cell_x(column), layout.label_y(row) + label_offset,
                  fit(text, cell), kLabelColor);
    };
    const auto row_label = [&](int row, std::string_view text) {
        draw_text(sheet, layout.cell_x(0), layout.label_y(row) + label_offset,
                  fit(text, layout.width() - 2 * SheetLayout::kGutter), kLabelColor);
    };

    // Row 0: start and ground-truth end frames.
    if (frames) {
        blit(sheet, to_cell(frames->start), layout.cell_x(0), layout.cell_y(0));
        blit(sheet, to_cell(frames->end_truth), layout.cell_x(1), layout.cell_y(0));
    } else {
        draw_placeholder(sheet, layout.cell_x(0), layout.cell_y(0), "no frames");
        draw_placeholder(sheet, layout.cell_x(1), layout.cell_y(0), "no frames");
    }
    cell_label(0, 0, "start: " + results.phrase);
    cell_label(0, 1, "end (truth)");

    // Row 1: masks over the start frame.
    std::optional<Frame> start_cell;
    if (frames) start_cell = resize_frame(frames->start, cell, cell);
    for (int s = 0; s < layout.columns(); ++s) {
        const auto& mask = results.masks.at(static_cast<std::size_t>(s));
        const int x0 = layout.cell_x(s);
        const int y0 = layout.cell_y(1);
        if (mask && start_cell) {
            blit(sheet, overlay_mask(*start_cell, mask_to_cell(*mask)), x0, y0);
        } else {
            draw_placeholder(sheet, x0, y0, mask ? "no frames" : "mask error");
        }
        cell_label(1, s, results.strategies[static_cast<std::size_t>(s)]);
    }

    // Rows 2..: one per prompt mode.
    for (int m = 0; m < layout.prompt_modes; ++m) {
        const int row = 2 + m;
        const auto& row_cells = results.cells.at(static_cast<std::size_t>(m));
        for (int s = 0; s < layout.columns(); ++s) {
            const SheetCell& c = row_cells.at(static_cast<std::size_t>(s));
            if (c.output) {
                blit(sheet, to_cell(*c.output), layout.cell_x(s), layout.cell_y(row));
            } else {
                draw_placeholder(sheet, layout.cell_x(s), layout.cell_y(row),
                                 c.error.empty() ? "error" : c.error);
            }
        }
        const auto& prompt = m < static_cast<int>(results.prompts.size())
                                 ? results.prompts[static_cast<std::size_t>(m)]
                                 : std::string{};
        row_label(row, results.prompt_modes[static_cast<std::size_t>(m)] + ": " +
                           (prompt.empty() ? "(no prompt)" : "\"" + prompt + "\""));
    }
    return sheet;
}

}  // namespace effectcast
