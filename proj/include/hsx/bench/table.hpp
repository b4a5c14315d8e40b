#pragma once

// Comparison table with average / worst-case aggregate rows and the
// per-fraction mIoU deltas between two approaches.

#include <cstdio>
#include <map>
#include <set>

#include "hsx/metrics/confusion.hpp"

namespace hsx {

struct TableRow {
  std::string dataset, approach, backbone, data;
  double fraction = 1.0;
  double oa = 0, aa = 0, f1 = 0, miou = 0;
};

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

class ComparisonTable {
 public:
  void add(TableRow r) { rows_.push_back(std::move(r)); }
  const std::vector<TableRow>& rows() const { return rows_; }

  /// Dataset rows in insertion order followed, per (approach, fraction),
  /// by an "average" row (arithmetic mean) and a "worst-case" row
  /// (per-metric minimum).
  std::vector<TableRow> with_aggregates() const {
    std::vector<TableRow> out = rows_;
    for (const auto& [approach, fraction] : groups()) {
      TableRow avg, worst;
      std::size_t n = 0;
      for (const auto& r : rows_) {
        if (r.approach != approach || r.fraction != fraction) continue;
        if (n == 0) {
          avg = worst = r;
          avg.oa = avg.aa = avg.f1 = avg.miou = 0;
        }
        avg.oa += r.oa;
        avg.aa += r.aa;
        avg.f1 += r.f1;
        avg.miou += r.miou;
        worst.oa = std::min(worst.oa, r.oa);
        worst.aa = std::min(worst.aa, r.aa);
        worst.f1 = std::min(worst.f1, r.f1);
        worst.miou = std::min(worst.miou, r.miou);
        ++n;
      }
      const double dn = static_cast<double>(n);
      avg.oa /= dn;
      avg.aa /= dn;
      avg.f1 /= dn;
      avg.miou /= dn;
      avg.dataset = "average";
      worst.dataset = "worst-case";
      out.push_back(avg);
      out.push_back(worst);
    }
    return out;
  }

  std::string csv() const {
    std::ostringstream os;
    os << "dataset,approach,backbone,data,fraction,oa,aa,f1,miou\n";
    for (const auto& r : with_aggregates())
      os << r.dataset << ',' << r.approach << ',' << r.backbone << ',' << r.data << ',' << fixed(r.fraction, 2) << ','
         << fixed(r.oa) << ',' << fixed(r.aa) << ',' << fixed(r.f1) << ',' << fixed(r.miou) << '\n';
    return os.str();
  }

  /// Aligned text with metrics in percent.
  std::string text() const {
    const auto rows = with_aggregates();
    std::vector<std::array<std::string, 9>> cells;
    cells.push_back({"dataset", "approach", "backbone", "data", "fraction", "OA", "AA", "F1", "mIoU"});
    for (const auto& r : rows)
      cells.push_back({r.dataset, r.approach, r.backbone, r.data, fixed(r.fraction, 2), fixed(100 * r.oa, 2),
                       fixed(100 * r.aa, 2), fixed(100 * r.f1, 2), fixed(100 * r.miou, 2)});
    std::array<std::size_t, 9> w{};
    for (const auto& c : cells)
      for (std::size_t i = 0; i < 9; ++i) w[i] = std::max(w[i], c[i].size());
    std::ostringstream os;
    for (const auto& c : cells) {
      for (std::size_t i = 0; i < 9; ++i) {
        const bool num = i >= 4;
        const std::string pad(w[i] - c[i].size(), ' ');
        os << (num ? pad + c[i] : c[i] + pad) << (i + 1 < 9 ? "  " : "\n");
      }
    }
    return os.str();
  }

  struct Delta {
    std::string dataset;
    double fraction;
    double delta;  // miou(minuend) - miou(subtrahend)
  };

  /// Per dataset and fraction, mIoU of `minuend` minus mIoU of `subtrahend`.
  std::vector<Delta> deltas(const std::string& minuend, const std::string& subtrahend) const {
    std::vector<Delta> out;
    for (const auto& a : rows_) {
      if (a.approach != minuend) continue;
      for (const auto& b : rows_)
        if (b.approach == subtrahend && b.dataset == a.dataset && b.fraction == a.fraction)
          out.push_back({a.dataset, a.fraction, a.miou - b.miou});
    }
    return out;
  }

  static std::string deltas_csv(const std::vector<Delta>& d) {
    std::ostringstream os;
    os << "dataset,fraction,delta_miou\n";
    for (const auto& x : d) os << x.dataset << ',' << fixed(x.fraction, 2) << ',' << fixed(x.delta) << '\n';
    return os.str();
  }

  /// Parses the CSV emitted by csv(); aggregate rows are dropped.
  static ComparisonTable parse_csv(std::string_view text) {
    ComparisonTable t;
    std::size_t start = 0;
    bool header = true;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      const auto line = text.substr(start, end - start);
      start = end + 1;
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      const auto f = split_list(line);
      if (f.size() != 9) throw Error(ErrorKind::Format, "table row has " + std::to_string(f.size()) + " fields");
      if (f[0] == "average" || f[0] == "worst-case") continue;
      try {
        t.add({f[0], f[1], f[2], f[3], std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7]),
               std::stod(f[8])});
      } catch (const std::exception&) {
        throw Error(ErrorKind::Format, "table row '" + std::string(line) + "' has a non-numeric metric");
      }
    }
    return t;
  }

 private:
  std::vector<std::pair<std::string, double>> groups() const {
    std::vector<std::pair<std::string, double>> g;
    for (const auto& r : rows_) {
      std::pair<std::string, double> k{r.approach, r.fraction};
      if (std::find(g.begin(), g.end(), k) == g.end()) g.push_back(k);
    }
    return g;
  }

  std::vector<TableRow> rows_;
};

}  // namespace hsx
