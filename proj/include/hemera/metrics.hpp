#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace hemera {

// Mann-Whitney AUC: P(s+ > s-) + 0.5 P(s+ = s-). Throws SingleClass unless
// both labels are present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct YoudenResult {
  double threshold = 0.0;
  double j = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

// Candidate thresholds are -inf, the midpoints between adjacent distinct
// sorted scores, and +inf; a sample is predicted positive iff
// score >= threshold. Ties in J prefer higher sensitivity, then the lower
// threshold.
YoudenResult youden_threshold(std::span<const double> scores, std::span<const int> labels);

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // no predicted positives
};

PrfResult prf_at_threshold(std::span<const double> scores, std::span<const int> labels, double threshold);

struct FoldMetrics {
  int fold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
};

struct SummaryStat {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single fold
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// mean +/- 1.96 sd / sqrt(k).
SummaryStat summarize(std::span<const double> values);

// Tab-separated fold records followed by mean, sd and 95% CI rows.
void write_metrics_report(std::span<const FoldMetrics> folds, const std::filesystem::path& path);

}  // namespace hemera
