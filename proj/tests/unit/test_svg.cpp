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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <regex>

#include "sms/svg.hpp"

namespace sms {
namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

TEST(Svg, OnePolylinePerSeries) {
  LineChart c;
  c.title = "t";
  c.series = {{"a", {0, 1, 2}, {0.1, 0.5, 0.9}}, {"b", {0, 1, 2}, {1, 1, 0}}};
  const std::string svg = render_line_chart(c);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "class=\"series\""), 2u);
  EXPECT_EQ(count(svg, "class=\"xtick\""), 3u);
  EXPECT_NE(svg.find(">a<"), std::string::npos);
}

TEST(Svg, NaNSplitsThePolyline) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  LineChart c;
  c.series = {{"a", {0, 1, 2, 3, 4}, {0.1, 0.2, nan, 0.4, 0.5}}};
  EXPECT_EQ(count(render_line_chart(c), "class=\"series\""), 2u);
}

TEST(Svg, ManyDistinctXUseSixTicks) {
  Series s{"a", {}, {}};
  for (int i = 0; i < 40; ++i) {
    s.x.push_back(i);
    s.y.push_back(std::sin(i));
  }
  LineChart c;
  c.series = {s};
  EXPECT_EQ(count(render_line_chart(c), "class=\"xtick\""), 6u);
}

TEST(Svg, FlatAndSinglePointSeriesRenderFiniteCoordinates) {
  LineChart c;
  c.series = {{"flat", {0, 1}, {0.5, 0.5}}, {"one", {3}, {2.0}}};
  const std::string svg = render_line_chart(c);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
}

TEST(Svg, EscapesMarkup) {
  LineChart c;
  c.title = "a<b & c";
  c.series = {{"x\"y", {0, 1}, {0, 1}}};
  const std::string svg = render_line_chart(c);
  EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
  EXPECT_EQ(svg.find("a<b"), std::string::npos);
}

}  // namespace
}  // namespace sms
