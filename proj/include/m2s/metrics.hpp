#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "m2s/error.hpp"

namespace m2s {

// counts[gt][pred]. Points whose ground truth is in the ignore set are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes, std::set<int> ignore = {0})
      : n_(n_classes), ignore_(std::move(ignore)), counts_(n_classes * n_classes, 0) {
    for (int c : ignore_)
      if (c < 0 || static_cast<std::size_t>(c) >= n_) throw Error(ErrorKind::ClassRangeError, "ignore class out of range");
  }

  std::size_t num_classes() const { return n_; }
  const std::set<int>& ignored() const { return ignore_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_.at(gt * n_ + pred); }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  void accumulate(std::span<const int> pred, std::span<const int> gt) {
    if (pred.size() != gt.size()) throw Error(ErrorKind::ShapeError, "prediction and ground truth lengths differ");
    for (std::size_t i = 0; i < gt.size(); ++i) {
      check(gt[i]);
      check(pred[i]);
      if (ignore_.count(gt[i])) continue;
      ++counts_[static_cast<std::size_t>(gt[i]) * n_ + static_cast<std::size_t>(pred[i])];
    }
  }

  // Shards merge by elementwise addition.
  void merge(const ConfusionMatrix& other) {
    if (other.n_ != n_ || other.ignore_ != ignore_) throw Error(ErrorKind::ShapeError, "incompatible confusion matrices");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  void check(int c) const {
    if (c < 0 || static_cast<std::size_t>(c) >= n_)
      throw Error(ErrorKind::ClassRangeError, "class id " + std::to_string(c) + " outside [0, " + std::to_string(n_) + ")");
  }

  std::size_t n_;
  std::set<int> ignore_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix accumulate_confusion(std::span<const int> pred, std::span<const int> gt, std::size_t n_classes,
                                            const std::set<int>& ignore = {0}) {
  ConfusionMatrix cm(n_classes, ignore);
  cm.accumulate(pred, gt);
  return cm;
}

struct IoUResult {
  // nullopt for ignored classes and classes with TP + FP + FN == 0.
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
};

// IoU_c = TP / (TP + FP + FN); the mean runs over classes with a nonzero
// denominator that are not ignored.
inline IoUResult miou(const ConfusionMatrix& cm) {
  const std::size_t n = cm.num_classes();
  IoUResult out;
  out.per_class.assign(n, std::nullopt);
  double sum = 0.0;
  std::size_t included = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (cm.ignored().count(static_cast<int>(c))) continue;
    const std::uint64_t tp = cm.at(c, c);
    std::uint64_t fp = 0, fn = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == c) continue;
      fp += cm.at(k, c);
      fn += cm.at(c, k);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    out.per_class[c] = iou;
    sum += iou;
    ++included;
  }
  if (included == 0) throw Error(ErrorKind::NoValidClasses, "no class has a nonzero IoU denominator");
  out.mean = sum / static_cast<double>(included);
  return out;
}

// One header line of class names followed by one row of percentages, per-class
// columns first and the mean last. Classes in `skip` (e.g. unlabeled) are not
// shown; undefined IoUs print as "-".
inline std::string format_iou_table(const IoUResult& result, const std::vector<std::string>& class_names,
                                    const std::string& row_name = "result", const std::set<int>& skip = {0}) {
  auto cell = [](const std::string& s) {
    std::string out = s;
    if (out.size() < 8) out.insert(0, 8 - out.size(), ' ');
    return out;
  };
  std::string header = "Methods", row = row_name;
  const std::size_t width = std::max<std::size_t>(header.size(), row.size());
  header.resize(width, ' ');
  row.resize(width, ' ');
  for (std::size_t c = 0; c < result.per_class.size(); ++c) {
    if (skip.count(static_cast<int>(c))) continue;
    const std::string name = c < class_names.size() ? class_names[c] : "class-" + std::to_string(c);
    std::string value = "-";
    if (result.per_class[c]) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *result.per_class[c]);
      value = buf;
    }
    const std::size_t w = std::max<std::size_t>(8, name.size());
    std::string h = name, v = value;
    h.insert(0, w - h.size(), ' ');
    v.insert(0, w - v.size(), ' ');
    header += " | " + h;
    row += " | " + v;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * result.mean);
  header += " | " + cell("mIoU");
  row += " | " + cell(buf);
  return header + "\n" + row + "\n";
}

}  // namespace m2s
