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

#include "sms/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "sms/error.hpp"

namespace sms {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_line_chart(const LineChart& chart) {
  if (chart.width < 320 || chart.height < 200) {
    throw ParameterError("chart must be at least 320 x 200");
  }
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  std::set<double> xs;
  for (const Series& s : chart.series) {
    if (s.x.size() != s.y.size()) {
      throw DimensionError("series '" + s.name + "' has mismatched x/y lengths");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i])) continue;
      xs.insert(s.x[i]);
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      if (!std::isfinite(s.y[i])) continue;
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (xs.empty()) throw InputError("chart has no points");
  if (!std::isfinite(y_lo)) {
    y_lo = 0.0;
    y_hi = 1.0;
  }
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double pw = chart.width - kLeft - kRight;
  const double ph = chart.height - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(chart.width) + "\" height=\"" + std::to_string(chart.height) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kLeft) + "\" y=\"20\" font-size=\"14\">" + escape(chart.title) +
         "</text>\n";
  const double x0 = kLeft;
  const double x1 = kLeft + pw;
  const double y0 = kTop + ph;
  out += "<line class=\"axis\" x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" +
         num(x1) + "\" y2=\"" + num(y0) + "\" stroke=\"black\"/>\n";
  out += "<line class=\"axis\" x1=\"" + num(x0) + "\" y1=\"" + num(kTop) + "\" x2=\"" +
         num(x0) + "\" y2=\"" + num(y0) + "\" stroke=\"black\"/>\n";

  std::vector<double> ticks;
  if (xs.size() <= 12) {
    ticks.assign(xs.begin(), xs.end());
  } else {
    for (int t = 0; t < 6; ++t) ticks.push_back(x_lo + (x_hi - x_lo) * t / 5.0);
  }
  for (double t : ticks) {
    out += "<line class=\"xtick\" x1=\"" + num(px(t)) + "\" y1=\"" + num(y0) + "\" x2=\"" +
           num(px(t)) + "\" y2=\"" + num(y0 + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(px(t)) + "\" y=\"" + num(y0 + 18) +
           "\" text-anchor=\"middle\">" + label(t) + "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = y_lo + (y_hi - y_lo) * t / 4.0;
    out += "<line class=\"ytick\" x1=\"" + num(x0 - 5) + "\" y1=\"" + num(py(v)) +
           "\" x2=\"" + num(x0) + "\" y2=\"" + num(py(v)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(py(v) + 4) +
           "\" text-anchor=\"end\">" + label(std::round(v * 1000) / 1000) + "</text>\n";
  }
  out += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(chart.height - 10.0) +
         "\" text-anchor=\"middle\">" + escape(chart.x_label) + "</text>\n";
  out += "<text x=\"14\" y=\"" + num(kTop + ph / 2) + "\" transform=\"rotate(-90 14 " +
         num(kTop + ph / 2) + ")\" text-anchor=\"middle\">" + escape(chart.y_label) +
         "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const Series& s = chart.series[k];
    const std::string color = kPalette[k % std::size(kPalette)];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) {
        out += "<polyline class=\"series\" data-name=\"" + escape(s.name) +
               "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"" +
               pts + "\"/>\n";
      }
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += ' ';
      pts += num(px(s.x[i])) + "," + num(py(s.y[i]));
    }
    flush();
    const double ly = kTop + 14.0 * static_cast<double>(k);
    out += "<line x1=\"" + num(x1 + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(x1 + 30) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(x1 + 34) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.name) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace sms
