#pragma once

#include <vector>

#include "gtnp/tensor.hpp"

namespace gtnp {

struct ClassMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  int support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<long long>> confusion;  // rows = true, cols = predicted
  int total = 0;
};

// Accuracy, per-class precision/recall/F1, and unweighted macro averages.
// Classes with a zero denominator contribute 0 with a warning.
MetricsReport compute_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& labels, int classes);

struct RocCurve {
  int cls = -1;
  std::vector<double> fpr, tpr;  // starts (0,0), ends (1,1)
  double auc = 0.0;
  bool valid = false;  // false when the class has no positives or negatives
};

// One-vs-rest ROC per class from per-sample probability rows. Threshold
// sweep over distinct scores with equal scores grouped into one step;
// trapezoidal AUC. Classes lacking positives or negatives are marked
// invalid with a warning.
std::vector<RocCurve> roc_auc(const Tensor& scores, const std::vector<int>& labels);

}  // namespace gtnp
