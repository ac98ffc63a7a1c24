// Multi-class evaluation: confusion-matrix metrics and one-vs-rest ROC/AUC.

#include "gtnp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gtnp/errors.hpp"

namespace gtnp {

MetricsReport compute_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& labels, int classes) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw data_error("compute_metrics needs matching non-empty inputs");
  if (classes < 1) throw data_error("compute_metrics needs at least one class");

  MetricsReport rep;
  rep.total = static_cast<int>(labels.size());
  rep.confusion.assign(static_cast<size_t>(classes),
                       std::vector<long long>(static_cast<size_t>(classes), 0));
  for (size_t i = 0; i < labels.size(); ++i) {
    int y = labels[i], p = predictions[i];
    if (y < 0 || y >= classes || p < 0 || p >= classes)
      throw data_error("compute_metrics class index out of range");
    ++rep.confusion[static_cast<size_t>(y)][static_cast<size_t>(p)];
  }

  long long trace = 0;
  for (int c = 0; c < classes; ++c) trace += rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
  rep.accuracy = static_cast<double>(trace) / rep.total;

  rep.per_class.resize(static_cast<size_t>(classes));
  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  for (int c = 0; c < classes; ++c) {
    long long tp = rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
    long long row = 0, col = 0;
    for (int k = 0; k < classes; ++k) {
      row += rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(k)];
      col += rep.confusion[static_cast<size_t>(k)][static_cast<size_t>(c)];
    }
    ClassMetrics& m = rep.per_class[static_cast<size_t>(c)];
    m.support = static_cast<int>(row);
    if (tp + (col - tp) == 0) {
      warn("compute_metrics: class " + std::to_string(c) +
           " never predicted, precision set to 0");
      m.precision = 0.0;
    } else {
      m.precision = static_cast<double>(tp) / col;
    }
    if (row == 0) {
      warn("compute_metrics: class " + std::to_string(c) +
           " has no true samples, recall set to 0");
      m.recall = 0.0;
    } else {
      m.recall = static_cast<double>(tp) / row;
    }
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    sum_p += m.precision;
    sum_r += m.recall;
    sum_f += m.f1;
  }
  rep.macro_precision = sum_p / classes;
  rep.macro_recall = sum_r / classes;
  rep.macro_f1 = sum_f / classes;
  return rep;
}

std::vector<RocCurve> roc_auc(const Tensor& scores, const std::vector<int>& labels) {
  if (scores.ndim() != 2 || static_cast<size_t>(scores.dim(0)) != labels.size())
    throw shape_error("roc_auc score/label mismatch");
  int n = scores.dim(0), classes = scores.dim(1);
  std::vector<RocCurve> curves(static_cast<size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    RocCurve& curve = curves[static_cast<size_t>(c)];
    curve.cls = c;
    long long pos = 0;
    for (int y : labels) pos += y == c ? 1 : 0;
    long long neg = n - pos;
    if (pos == 0 || neg == 0) {
      warn("roc_auc: class " + std::to_string(c) +
           (pos == 0 ? " has no positives" : " has no negatives") + ", curve omitted");
      continue;
    }
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return scores.at(a, c) > scores.at(b, c); });

    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    long long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
      double s = scores.at(order[i], c);
      // sweep one threshold step per distinct score so ties move diagonally
      while (i < order.size() && scores.at(order[i], c) == s) {
        if (labels[static_cast<size_t>(order[i])] == c) ++tp; else ++fp;
        ++i;
      }
      curve.fpr.push_back(static_cast<double>(fp) / neg);
      curve.tpr.push_back(static_cast<double>(tp) / pos);
    }
    double auc = 0.0;
    for (size_t k = 1; k < curve.fpr.size(); ++k)
      auc += (curve.fpr[k] - curve.fpr[k - 1]) * 0.5 * (curve.tpr[k] + curve.tpr[k - 1]);
    curve.auc = auc;
    curve.valid = true;
  }
  return curves;
}

}  // namespace gtnp
