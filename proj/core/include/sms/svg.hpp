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

#ifndef SMS_SVG_HPP_
#define SMS_SVG_HPP_

#include <string>
#include <vector>

namespace sms {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN entries split the polyline
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 640;
  int height = 400;
};

// One <polyline class="series"> per contiguous run of finite points, one
// <line class="xtick"> per distinct x when there are at most 12 of them
// (6 evenly spaced ticks otherwise), plus axes and a legend.
std::string render_line_chart(const LineChart& chart);

}  // namespace sms

#endif  // SMS_SVG_HPP_
