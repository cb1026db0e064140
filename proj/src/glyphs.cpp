#include "mlat/scene.hpp"

#include <array>
#include <cstdint>

namespace mlat {

namespace {

struct Glyph {
  char ch;
  std::array<std::uint8_t, kGlyphRows> rows;  // low 5 bits, MSB = leftmost column
};

constexpr std::array<Glyph, 13> kFont{{
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
}};

const Glyph* find(char ch) {
  for (const auto& g : kFont)
    if (g.ch == ch) return &g;
  return nullptr;
}

}  // namespace

bool has_glyph(char glyph) { return find(glyph) != nullptr; }

bool glyph_cell(char glyph, int row, int col) {
  const Glyph* g = find(glyph);
  if (!g || row < 0 || row >= kGlyphRows || col < 0 || col >= kGlyphCols) return false;
  return (g->rows[row] >> (kGlyphCols - 1 - col)) & 1u;
}

}  // namespace mlat
