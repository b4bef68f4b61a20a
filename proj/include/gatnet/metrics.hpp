#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gatnet/matrix.hpp"

namespace gatnet {

struct MetricReport {
  std::string metric;            // "accuracy" or "micro_f1"
  double value = 0.0;            // single evaluation, in [0,1]
  uint32_t count = 0;            // nodes (or node-label pairs) scored
  std::vector<double> per_run;   // filled by aggregation
  double mean = 0.0;
  double stddev = 0.0;           // sample (n-1) deviation
};

// Fraction of masked nodes whose argmax logit equals the label.
// Argmax ties resolve to the lowest class index.
template <class T>
MetricReport masked_accuracy(const Matrix<T>& logits, const std::vector<uint32_t>& labels,
                             const std::vector<uint8_t>& mask) {
  if (labels.size() != logits.rows || mask.size() != logits.rows)
    throw ShapeError("masked_accuracy: size mismatch");
  uint32_t total = 0, correct = 0;
  for (uint32_t i = 0; i < logits.rows; ++i) {
    if (!mask[i]) continue;
    const T* z = logits.row(i);
    uint32_t best = 0;
    for (uint32_t c = 1; c < logits.cols; ++c)
      if (z[c] > z[best]) best = c;
    ++total;
    if (best == labels[i]) ++correct;
  }
  if (total == 0) throw ValidationError("masked_accuracy: empty mask");
  MetricReport r;
  r.metric = "accuracy";
  r.count = total;
  r.value = double(correct) / double(total);
  return r;
}

// Micro-averaged F1 over all (node, label) pairs in the mask; a pair is
// predicted positive when sigmoid(logit) >= threshold. With TP=FP=FN=0 the
// score is defined as 1.
template <class T>
MetricReport micro_f1(const Matrix<T>& logits, const std::vector<uint8_t>& label_matrix,
                      const std::vector<uint8_t>& mask, double threshold = 0.5) {
  const uint32_t N = logits.rows, C = logits.cols;
  if (label_matrix.size() != size_t(N) * C || mask.size() != N)
    throw ShapeError("micro_f1: size mismatch");
  // sigmoid(z) >= t  <=>  z >= logit(t)
  const double zthr = std::log(threshold / (1.0 - threshold));
  uint64_t tp = 0, fp = 0, fn = 0;
  uint32_t total = 0;
  for (uint32_t i = 0; i < N; ++i) {
    if (!mask[i]) continue;
    const T* z = logits.row(i);
    const uint8_t* y = &label_matrix[size_t(i) * C];
    total += C;
    for (uint32_t c = 0; c < C; ++c) {
      const bool pred = double(z[c]) >= zthr;
      if (pred && y[c]) ++tp;
      else if (pred && !y[c]) ++fp;
      else if (!pred && y[c]) ++fn;
    }
  }
  if (total == 0) throw ValidationError("micro_f1: empty mask");
  MetricReport r;
  r.metric = "micro_f1";
  r.count = total;
  r.value = (tp + fp + fn) == 0 ? 1.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
  return r;
}

// Mean and sample standard deviation across runs.
MetricReport aggregate_runs(const std::string& metric, const std::vector<double>& per_run);

// JSON object {metric, mean, std, runs, per_run}.
std::string metric_report_json(const MetricReport& r);

}  // namespace gatnet
