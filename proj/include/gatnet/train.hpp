#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "gatnet/metrics.hpp"
#include "gatnet/model.hpp"

namespace gatnet {

struct TrainConfig {
  float lr = 0.005f;
  float l2_lambda = 5e-4f;
  uint32_t max_epochs = 100000;  // early stopping is the real terminator
  uint32_t patience = 100;
  uint64_t seed = 1;
  uint32_t batch_graphs = 2;  // inductive batching
  std::string preset;

  void validate() const {
    if (lr <= 0.0f) throw ConfigError("lr must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (l2_lambda < 0.0f) throw ConfigError("l2_lambda must be >= 0");
    if (batch_graphs < 1) throw ConfigError("batch_graphs must be >= 1");
  }
};

// Adam moments, one pair of tensors per parameter tensor.
template <class T>
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  uint64_t t = 0;
  std::vector<GatLayerParams<T>> m, v;

  static AdamState init(const GatModel<T>& model) {
    AdamState s;
    for (const auto& cfg : model.configs) {
      s.m.push_back(GatLayerParams<T>::zeros_like(cfg));
      s.v.push_back(GatLayerParams<T>::zeros_like(cfg));
    }
    return s;
  }
};

// theta <- theta - lr * mhat / (sqrt(vhat) + eps), bias-corrected.
template <class T>
void adam_step(GatModel<T>& model, std::vector<GatLayerParams<T>>& grads, AdamState<T>& state,
               double lr) {
  if (grads.size() != model.num_layers()) throw ShapeError("adam_step: grad count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));
  for (size_t l = 0; l < model.num_layers(); ++l) {
    std::vector<Matrix<T>*> ps, gs, ms, vs;
    model.params[l].for_each([&](const std::string&, Matrix<T>& x) { ps.push_back(&x); });
    grads[l].for_each([&](const std::string&, Matrix<T>& x) { gs.push_back(&x); });
    state.m[l].for_each([&](const std::string&, Matrix<T>& x) { ms.push_back(&x); });
    state.v[l].for_each([&](const std::string&, Matrix<T>& x) { vs.push_back(&x); });
    if (ps.size() != gs.size()) throw ShapeError("adam_step: tensor count mismatch");
    for (size_t t = 0; t < ps.size(); ++t) {
      if (!ps[t]->same_shape(*gs[t])) throw ShapeError("adam_step: tensor shape mismatch");
      T* p = ps[t]->data.data();
      const T* g = gs[t]->data.data();
      T* m = ms[t]->data.data();
      T* v = vs[t]->data.data();
      const size_t n = ps[t]->size();
      for (size_t i = 0; i < n; ++i) {
        m[i] = T(state.beta1) * m[i] + T(1.0 - state.beta1) * g[i];
        v[i] = T(state.beta2) * v[i] + T(1.0 - state.beta2) * g[i] * g[i];
        const double mhat = double(m[i]) / bc1;
        const double vhat = double(v[i]) / bc2;
        p[i] -= T(lr * mhat / (std::sqrt(vhat) + state.eps));
      }
    }
  }
}

// g <- g + 2*lambda*theta on weight tensors; biases are exempt.
template <class T>
void apply_l2(std::vector<GatLayerParams<T>>& grads, const GatModel<T>& model, double lambda) {
  if (lambda < 0.0) throw ConfigError("apply_l2: lambda must be >= 0");
  if (lambda == 0.0) return;
  for (size_t l = 0; l < model.num_layers(); ++l) {
    std::vector<std::pair<std::string, const Matrix<T>*>> ps;
    model.params[l].for_each([&](const std::string& n, const Matrix<T>& x) {
      ps.emplace_back(n, &x);
    });
    std::vector<Matrix<T>*> gs;
    grads[l].for_each([&](const std::string&, Matrix<T>& x) { gs.push_back(&x); });
    for (size_t t = 0; t < ps.size(); ++t) {
      if (!l2_penalized(ps[t].first)) continue;
      for (size_t i = 0; i < gs[t]->size(); ++i)
        gs[t]->data[i] += T(2.0 * lambda) * ps[t].second->data[i];
    }
  }
}

struct EpochRecord {
  uint32_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;
  double seconds = 0.0;
};

struct TrainOutput {
  GatModel<float> model;  // parameters of the best-validation epoch
  std::vector<EpochRecord> history;
  uint32_t best_epoch = 0;
  double best_val_metric = 0.0;
  double best_val_loss = 0.0;
};

// Patience resets when EITHER the validation loss or the validation metric
// improves on its running best; the returned parameters come from the epoch
// with the best metric (ties: lower loss, then earlier epoch).
struct EarlyStopState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  double best_val_metric = -std::numeric_limits<double>::infinity();
  uint32_t epochs_since_improvement = 0;
  // snapshot selector
  double snap_metric = -std::numeric_limits<double>::infinity();
  double snap_loss = std::numeric_limits<double>::infinity();
  uint32_t snap_epoch = 0;

  // returns true when the snapshot should be refreshed this epoch
  bool update(double val_loss, double val_metric, uint32_t epoch) {
    const bool improved = val_loss < best_val_loss || val_metric > best_val_metric;
    best_val_loss = std::min(best_val_loss, val_loss);
    best_val_metric = std::max(best_val_metric, val_metric);
    epochs_since_improvement = improved ? 0 : epochs_since_improvement + 1;
    if (val_metric > snap_metric || (val_metric == snap_metric && val_loss < snap_loss)) {
      snap_metric = val_metric;
      snap_loss = val_loss;
      snap_epoch = epoch;
      return true;
    }
    return false;
  }
  bool stop(uint32_t patience) const { return epochs_since_improvement >= patience; }
};

namespace detail {

inline double evaluate_metric(const GatModel<float>& model, const Matrix<float>& logits,
                              const GraphBundle& b, const std::vector<uint8_t>& mask) {
  if (model.task == Task::single_label)
    return masked_accuracy(logits, b.labels, mask).value;
  return micro_f1(logits, b.label_matrix, mask).value;
}

inline double evaluate_loss(const GatModel<float>& model, const Matrix<float>& logits,
                            const GraphBundle& b, const std::vector<uint8_t>& mask) {
  if (model.task == Task::single_label)
    return softmax_cross_entropy(logits, b.labels, mask);
  return sigmoid_bce(logits, b.label_matrix, mask);
}

}  // namespace detail

// Full-batch training on one graph: forward over all nodes every epoch, loss
// on the train mask, validation on the val mask.
inline TrainOutput train_transductive(const GraphBundle& bundle,
                                      const std::vector<GatLayerConfig>& configs, Task task,
                                      const TrainConfig& cfg) {
  cfg.validate();
  bundle.validate();
  if (count_mask(bundle.train_mask) == 0) throw ValidationError("train: empty train mask");
  if (count_mask(bundle.val_mask) == 0) throw ValidationError("train: empty val mask");
  if (!bundle.graph.has_self_loops())
    throw ValidationError("train: graph lacks self-loops");

  RngState init_rng(cfg.seed, 1);
  TrainOutput out;
  out.model = GatModel<float>::init(task, configs, init_rng);
  GatModel<float>& model = out.model;
  AdamState<float> adam = AdamState<float>::init(model);
  EarlyStopState stop;
  GatModel<float> snapshot = model;

  std::vector<LayerCache<float>> caches;
  for (uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    RngState drop_rng(cfg.seed, 0x100 + epoch);

    Matrix<float> logits =
        model_forward(model, bundle.features, bundle.graph, drop_rng, Mode::train, &caches);
    Matrix<float> grad_logits;
    double train_loss;
    if (task == Task::single_label)
      train_loss = softmax_cross_entropy(logits, bundle.labels, bundle.train_mask, &grad_logits);
    else
      train_loss = sigmoid_bce(logits, bundle.label_matrix, bundle.train_mask, &grad_logits);

    std::vector<GatLayerParams<float>> grads =
        model_backward(model, caches, grad_logits, bundle.graph);
    apply_l2(grads, model, cfg.l2_lambda);
    adam_step(model, grads, adam, cfg.lr);

    RngState eval_rng(0, 0);
    Matrix<float> eval_logits =
        model_forward(model, bundle.features, bundle.graph, eval_rng, Mode::eval, nullptr);
    const double val_loss = detail::evaluate_loss(model, eval_logits, bundle, bundle.val_mask);
    const double val_metric = detail::evaluate_metric(model, eval_logits, bundle, bundle.val_mask);

    if (stop.update(val_loss, val_metric, epoch)) snapshot = model;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.history.push_back({epoch, train_loss, val_loss, val_metric, secs});
    if (stop.stop(cfg.patience)) break;
  }

  out.model = std::move(snapshot);
  out.best_epoch = stop.snap_epoch;
  out.best_val_metric = stop.snap_metric;
  out.best_val_loss = stop.snap_loss;
  return out;
}

// Inductive training over several fully-supervised graphs: each epoch
// shuffles the graph order, forms disjoint-union batches, and takes one
// optimizer step per batch. Validation pools the metric over held-out graphs.
inline TrainOutput train_inductive(const std::vector<GraphBundle>& train_bundles,
                                   const std::vector<GraphBundle>& val_bundles,
                                   const std::vector<GatLayerConfig>& configs, Task task,
                                   const TrainConfig& cfg) {
  cfg.validate();
  if (train_bundles.empty() || val_bundles.empty())
    throw ValidationError("train_inductive: need at least one train and one val bundle");
  for (const auto& b : train_bundles) {
    b.validate();
    if (b.features.cols != train_bundles[0].features.cols)
      throw ShapeError("train_inductive: feature width mismatch across bundles");
  }

  RngState init_rng(cfg.seed, 1);
  TrainOutput out;
  out.model = GatModel<float>::init(task, configs, init_rng);
  GatModel<float>& model = out.model;
  AdamState<float> adam = AdamState<float>::init(model);
  EarlyStopState stop;
  GatModel<float> snapshot = model;

  std::vector<size_t> order(train_bundles.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<LayerCache<float>> caches;
  for (uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    RngState shuffle_rng(cfg.seed, 0x20000 + epoch);
    shuffle_rng.shuffle(order);
    RngState drop_rng(cfg.seed, 0x100 + epoch);

    double loss_sum = 0.0;
    uint32_t batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_graphs) {
      std::vector<const GraphBundle*> parts;
      for (size_t q = start; q < std::min(order.size(), start + cfg.batch_graphs); ++q)
        parts.push_back(&train_bundles[order[q]]);
      MultiGraphBatch batch = disjoint_union(parts);
      const GraphBundle& u = batch.bundle;
      const std::vector<uint8_t> everyone(u.num_nodes(), 1);  // all nodes supervised

      Matrix<float> logits =
          model_forward(model, u.features, u.graph, drop_rng, Mode::train, &caches);
      Matrix<float> grad_logits;
      double loss;
      if (task == Task::single_label)
        loss = softmax_cross_entropy(logits, u.labels, everyone, &grad_logits);
      else
        loss = sigmoid_bce(logits, u.label_matrix, everyone, &grad_logits);
      loss_sum += loss;
      ++batches;

      std::vector<GatLayerParams<float>> grads = model_backward(model, caches, grad_logits, u.graph);
      apply_l2(grads, model, cfg.l2_lambda);
      adam_step(model, grads, adam, cfg.lr);
    }

    // pooled validation over held-out graphs
    double val_loss_sum = 0.0;
    uint64_t tp = 0, fp = 0, fn = 0;
    uint32_t correct = 0, total = 0;
    for (const GraphBundle& vb : val_bundles) {
      RngState eval_rng(0, 0);
      Matrix<float> logits =
          model_forward(model, vb.features, vb.graph, eval_rng, Mode::eval, nullptr);
      const std::vector<uint8_t> everyone(vb.num_nodes(), 1);
      val_loss_sum += detail::evaluate_loss(model, logits, vb, everyone) * vb.num_nodes();
      if (task == Task::multi_label) {
        for (uint32_t i = 0; i < logits.rows; ++i) {
          const float* z = logits.row(i);
          const uint8_t* y = &vb.label_matrix[size_t(i) * logits.cols];
          for (uint32_t c = 0; c < logits.cols; ++c) {
            const bool pred = z[c] >= 0.0f;  // sigmoid(z) >= 0.5
            if (pred && y[c]) ++tp;
            else if (pred && !y[c]) ++fp;
            else if (!pred && y[c]) ++fn;
          }
        }
      } else {
        MetricReport r = masked_accuracy(logits, vb.labels, everyone);
        correct += uint32_t(r.value * r.count + 0.5);
        total += r.count;
      }
    }
    uint32_t val_nodes = 0;
    for (const auto& vb : val_bundles) val_nodes += vb.num_nodes();
    const double val_loss = val_loss_sum / double(val_nodes);
    const double val_metric =
        task == Task::multi_label
            ? ((tp + fp + fn) == 0 ? 1.0 : 2.0 * double(tp) / double(2 * tp + fp + fn))
            : double(correct) / double(total);

    if (stop.update(val_loss, val_metric, epoch)) snapshot = model;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.history.push_back({epoch, loss_sum / double(batches), val_loss, val_metric, secs});
    if (stop.stop(cfg.patience)) break;
  }

  out.model = std::move(snapshot);
  out.best_epoch = stop.snap_epoch;
  out.best_val_metric = stop.snap_metric;
  out.best_val_loss = stop.snap_loss;
  return out;
}

// One record per epoch: epoch, train_loss, val_loss, val_metric, seconds.
inline void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "epoch,train_loss,val_loss,val_metric,seconds\n";
  out << std::setprecision(10);
  for (const auto& r : history)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_metric << ','
        << r.seconds << '\n';
}

}  // namespace gatnet
