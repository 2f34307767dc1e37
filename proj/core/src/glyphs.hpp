//
// Copyright 2026 The SMS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Bitmap digit fonts shared by the dataset synthesizer and the seed generator.

#ifndef SMS_SRC_GLYPHS_HPP_
#define SMS_SRC_GLYPHS_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace sms::glyphs {

// 5 wide x 7 tall, '#' = ink.
inline constexpr std::array<std::array<std::string_view, 7>, 10> kDigit5x7 = {{
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
    {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "},
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
    {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "},
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
    {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "},
}};

// 3 wide x 5 tall.
inline constexpr std::array<std::array<std::string_view, 5>, 10> kDigit3x5 = {{
    {"###", "# #", "# #", "# #", "###"},
    {" # ", "## ", " # ", " # ", "###"},
    {"###", "  #", "###", "#  ", "###"},
    {"###", "  #", " ##", "  #", "###"},
    {"# #", "# #", "###", "  #", "  #"},
    {"###", "#  ", "###", "  #", "###"},
    {"###", "#  ", "###", "# #", "###"},
    {"###", "  #", " # ", " # ", " # "},
    {"###", "# #", "###", "# #", "###"},
    {"###", "# #", "###", "  #", "###"},
}};

// Nearest-neighbour stamps `rows` (glyph of width w, height h) into a
// box of box_w x box_h whose top-left corner is (top, left) on a
// side x side canvas. Pixels falling off the canvas are dropped.
template <std::size_t H>
void stamp(const std::array<std::string_view, H>& rows, int box_w, int box_h,
           int top, int left, int side, std::span<double> canvas,
           double ink = 1.0) {
  const int h = static_cast<int>(H);
  const int w = static_cast<int>(rows[0].size());
  for (int y = 0; y < box_h; ++y) {
    const int gy = y * h / box_h;
    for (int x = 0; x < box_w; ++x) {
      const int gx = x * w / box_w;
      if (rows[static_cast<std::size_t>(gy)][static_cast<std::size_t>(gx)] != '#') continue;
      const int py = top + y;
      const int px = left + x;
      if (py < 0 || px < 0 || py >= side || px >= side) continue;
      canvas[static_cast<std::size_t>(py * side + px)] = ink;
    }
  }
}

}  // namespace sms::glyphs

#endif  // SMS_SRC_GLYPHS_HPP_
