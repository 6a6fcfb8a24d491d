#include "hemera/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "hemera/error.hpp"
#include "text_util.hpp"

namespace hemera {

namespace {

void check_scored(std::span<const double> scores, std::span<const int> labels, bool need_both) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error(ErrorCode::LabelNotBinary, std::to_string(l));
    pos += static_cast<std::size_t>(l);
  }
  if (need_both && (pos == 0 || pos == labels.size()))
    throw Error(ErrorCode::SingleClass, "both classes are required");
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_scored(scores, labels, true);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank-sum with mid-ranks for ties.
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t r = i; r < j; ++r) {
      if (labels[order[r]] == 1) {
        positive_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

YoudenResult youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  check_scored(scores, labels, true);
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> candidates{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 1; i < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i - 1] + sorted[i]));
  candidates.push_back(std::numeric_limits<double>::infinity());

  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  YoudenResult best;
  bool first = true;
  for (double t : candidates) {
    double tp = 0.0, tn = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted = scores[i] >= t;
      if (labels[i] == 1 && predicted) tp += 1.0;
      if (labels[i] == 0 && !predicted) tn += 1.0;
    }
    YoudenResult r{t, tp / n_pos + tn / n_neg - 1.0, tp / n_pos, tn / n_neg};
    // Candidates ascend, so keeping the first of equal (J, sensitivity)
    // pairs yields the lower threshold.
    if (first || r.j > best.j || (r.j == best.j && r.sensitivity > best.sensitivity)) {
      best = r;
      first = false;
    }
  }
  return best;
}

PrfResult prf_at_threshold(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_scored(scores, labels, false);
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i] == 1) tp += 1.0;
    if (predicted && labels[i] == 0) fp += 1.0;
    if (!predicted && labels[i] == 1) fn += 1.0;
  }
  PrfResult r;
  r.precision_undefined = (tp + fp) == 0.0;
  r.precision = r.precision_undefined ? 0.0 : tp / (tp + fp);
  r.recall = (tp + fn) == 0.0 ? 0.0 : tp / (tp + fn);
  r.f1 = (r.precision + r.recall) == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

SummaryStat summarize(std::span<const double> values) {
  SummaryStat s;
  if (values.empty()) return s;
  const double k = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (k - 1.0));
  }
  const double half = 1.96 * s.sd / std::sqrt(k);
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

void write_metrics_report(std::span<const FoldMetrics> folds, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << std::setprecision(10);
  out << "fold\tprecision\trecall\tf1\tauc\n";
  std::vector<double> p, r, f, a;
  for (const auto& m : folds) {
    out << m.fold << '\t' << m.precision << '\t' << m.recall << '\t' << m.f1 << '\t' << m.auc << '\n';
    p.push_back(m.precision);
    r.push_back(m.recall);
    f.push_back(m.f1);
    a.push_back(m.auc);
  }
  const SummaryStat stats[4] = {summarize(p), summarize(r), summarize(f), summarize(a)};
  out << "mean";
  for (const auto& s : stats) out << '\t' << s.mean;
  out << "\nsd";
  for (const auto& s : stats) out << '\t' << s.sd;
  out << "\nci95_low";
  for (const auto& s : stats) out << '\t' << s.ci_low;
  out << "\nci95_high";
  for (const auto& s : stats) out << '\t' << s.ci_high;
  out << '\n';
  detail::check_written(out, path);
}

}  // namespace hemera
