#pragma once

// Minimal SVG bar chart of mIoU deltas, grouped by fraction.

#include "hsx/bench/table.hpp"

namespace hsx {

inline std::string deltas_svg(const std::vector<ComparisonTable::Delta>& deltas, const std::string& title) {
  std::vector<double> fractions;
  std::vector<std::string> datasets;
  for (const auto& d : deltas) {
    if (std::find(fractions.begin(), fractions.end(), d.fraction) == fractions.end()) fractions.push_back(d.fraction);
    if (std::find(datasets.begin(), datasets.end(), d.dataset) == datasets.end()) datasets.push_back(d.dataset);
  }
  std::sort(fractions.begin(), fractions.end());
  double span = 0.01;
  for (const auto& d : deltas) span = std::max(span, std::fabs(d.delta));

  const double W = 640, H = 360, left = 60, right = 20, top = 40, bottom = 50;
  const double plot_h = H - top - bottom, zero = top + plot_h / 2;
  const double group_w = (W - left - right) / static_cast<double>(std::max<std::size_t>(1, fractions.size()));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, datasets.size()));
  static constexpr const char* kColors[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << zero << "\" x2=\"" << W - right << "\" y2=\"" << zero
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-size=\"10\">+"
     << fixed(100 * span, 1) << "</text>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << top + plot_h + 4 << "\" text-anchor=\"end\" font-size=\"10\">-"
     << fixed(100 * span, 1) << "</text>\n";
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const double gx = left + group_w * static_cast<double>(fi) + group_w * 0.1;
    os << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << H - bottom + 20 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << fixed(100 * fractions[fi], 0) << "%</text>\n";
    for (std::size_t di = 0; di < datasets.size(); ++di) {
      for (const auto& d : deltas) {
        if (d.fraction != fractions[fi] || d.dataset != datasets[di]) continue;
        const double h = std::fabs(d.delta) / span * plot_h / 2;
        const double y = d.delta >= 0 ? zero - h : zero;
        os << "<rect x=\"" << fixed(gx + bar_w * static_cast<double>(di), 2) << "\" y=\"" << fixed(y, 2)
           << "\" width=\"" << fixed(bar_w, 2) << "\" height=\"" << fixed(h, 2) << "\" fill=\"" << kColors[di % 6]
           << "\"/>\n";
      }
    }
  }
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    const double x = left + 110 * static_cast<double>(di);
    os << "<rect x=\"" << x << "\" y=\"" << H - 18 << "\" width=\"10\" height=\"10\" fill=\"" << kColors[di % 6]
       << "\"/><text x=\"" << x + 14 << "\" y=\"" << H - 9 << "\" font-size=\"11\">" << datasets[di] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace hsx
