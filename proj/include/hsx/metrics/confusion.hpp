#pragma once

// Confusion matrix (rows = ground truth, columns = prediction) and the four
// segmentation metrics derived from it.

#include <cstdint>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hsx/core/error.hpp"
#include "hsx/core/labels.hpp"

namespace hsx {

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * k_ + pred]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t row(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += at(k, j);
    return s;
  }
  std::uint64_t col(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += at(i, k);
    return s;
  }
  bool scored(std::size_t k) const { return row(k) + col(k) > 0; }

  /// Adds one map pair. Pixels labelled 65535 are skipped.
  template <class P, class L>
  void accumulate(std::span<const P> pred, std::span<const L> labels) {
    if (pred.size() != labels.size())
      throw Error(ErrorKind::Shape, "prediction has " + std::to_string(pred.size()) + " pixels, labels " +
                                        std::to_string(labels.size()));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const auto t = static_cast<std::uint32_t>(labels[i]);
      if (t == kIgnoreLabel) continue;
      const auto p = static_cast<std::uint32_t>(pred[i]);
      if (t >= k_) throw Error(ErrorKind::Data, "label " + std::to_string(t) + " outside [0, " + std::to_string(k_) + ")");
      if (p >= k_) throw Error(ErrorKind::Data, "prediction " + std::to_string(p) + " outside [0, " + std::to_string(k_) + ")");
      ++at(t, p);
    }
  }
  template <class P, class L>
  void accumulate(const std::vector<P>& pred, const std::vector<L>& labels) {
    accumulate(std::span<const P>(pred), std::span<const L>(labels));
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.k_ != k_) throw Error(ErrorKind::Shape, "merging confusion matrices of different class counts");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct ClassScore {
  double recall = 0, precision = 0, f1 = 0, iou = 0;
  bool scored = false;
};

struct MetricReport {
  double oa = 0, aa = 0, f1 = 0, miou = 0;
  std::vector<ClassScore> per_class;
};

namespace detail {
inline void require_total(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::Evaluation, "no scored pixels");
}
inline double ratio(std::uint64_t a, std::uint64_t b) {
  return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
}
}  // namespace detail

inline std::vector<ClassScore> class_scores(const ConfusionMatrix& cm) {
  std::vector<ClassScore> out(cm.classes());
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const auto tp = cm.at(k, k), row = cm.row(k), col = cm.col(k);
    auto& s = out[k];
    s.scored = row + col > 0;
    s.recall = detail::ratio(tp, row);
    s.precision = detail::ratio(tp, col);
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.iou = detail::ratio(tp, row + col - tp);
  }
  return out;
}

inline double overall_accuracy(const ConfusionMatrix& cm) {
  detail::require_total(cm);
  std::uint64_t tr = 0;
  for (std::size_t k = 0; k < cm.classes(); ++k) tr += cm.at(k, k);
  return detail::ratio(tr, cm.total());
}

namespace detail {
template <class F>
double macro(const ConfusionMatrix& cm, F field) {
  require_total(cm);
  double s = 0;
  std::size_t n = 0;
  for (const auto& c : class_scores(cm))
    if (c.scored) {
      s += field(c);
      ++n;
    }
  return s / static_cast<double>(n);
}
}  // namespace detail

inline double average_accuracy(const ConfusionMatrix& cm) {
  return detail::macro(cm, [](const ClassScore& c) { return c.recall; });
}
inline double macro_f1(const ConfusionMatrix& cm) {
  return detail::macro(cm, [](const ClassScore& c) { return c.f1; });
}
inline double miou(const ConfusionMatrix& cm) {
  return detail::macro(cm, [](const ClassScore& c) { return c.iou; });
}

inline MetricReport report(const ConfusionMatrix& cm) {
  return {overall_accuracy(cm), average_accuracy(cm), macro_f1(cm), miou(cm), class_scores(cm)};
}

inline std::string report_text(const MetricReport& r, const std::vector<std::string>& names = {}) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "OA   " << r.oa << "\nAA   " << r.aa << "\nF1   " << r.f1 << "\nmIoU " << r.miou << '\n';
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    const auto& c = r.per_class[k];
    os << "class " << (k < names.size() ? names[k] : std::to_string(k));
    if (!c.scored) {
      os << "  (not scored)\n";
      continue;
    }
    os << "  recall " << c.recall << "  precision " << c.precision << "  f1 " << c.f1 << "  iou " << c.iou << '\n';
  }
  return os.str();
}

/// One row per class plus a summary row; columns class,recall,precision,f1,iou.
/// Unscored classes have empty metric cells.
inline std::string report_csv(const MetricReport& r, const std::vector<std::string>& names = {}) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "class,recall,precision,f1,iou\n";
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    const auto& c = r.per_class[k];
    os << (k < names.size() ? names[k] : std::to_string(k));
    if (c.scored)
      os << ',' << c.recall << ',' << c.precision << ',' << c.f1 << ',' << c.iou << '\n';
    else
      os << ",,,,\n";
  }
  os << "mean," << r.aa << ",," << r.f1 << ',' << r.miou << '\n';
  os << "overall," << r.oa << ",,,\n";
  return os.str();
}

}  // namespace hsx
