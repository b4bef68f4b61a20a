#pragma once

#include <cstdint>
#include <type_traits>
#include <string>
#include <vector>

#include "gatnet/graph.hpp"
#include "gatnet/layer.hpp"

namespace gatnet {

enum class Task : uint8_t { single_label = 0, multi_label = 1 };

template <class T>
struct GatModel {
  Task task = Task::single_label;
  std::vector<GatLayerConfig> configs;
  std::vector<GatLayerParams<T>> params;

  static GatModel init(Task task, std::vector<GatLayerConfig> configs, RngState& rng) {
    GatModel m;
    m.task = task;
    m.configs = std::move(configs);
    for (size_t l = 0; l < m.configs.size(); ++l) {
      RngState layer_rng = rng.substream(l);
      m.params.push_back(GatLayerParams<T>::glorot(m.configs[l], layer_rng));
    }
    m.validate();
    return m;
  }

  uint32_t in_features() const { return configs.front().in_features; }
  uint32_t out_features() const { return configs.back().output_width(); }
  size_t num_layers() const { return configs.size(); }

  void validate() const {
    if (configs.empty()) throw ConfigError("model: no layers");
    if (params.size() != configs.size()) throw ConfigError("model: params/config count mismatch");
    for (size_t l = 0; l < configs.size(); ++l) {
      configs[l].validate();
      if (l + 1 < configs.size() &&
          configs[l].output_width() != configs[l + 1].in_features)
        throw ConfigError("model: layer " + std::to_string(l) + " output width " +
                          std::to_string(configs[l].output_width()) + " != layer " +
                          std::to_string(l + 1) + " input width " +
                          std::to_string(configs[l + 1].in_features));
    }
    const Activation last = configs.back().activation;
    if (task == Task::single_label && last != Activation::softmax_deferred)
      throw ConfigError("model: single-label task needs a softmax-deferred output layer");
    if (task == Task::multi_label && last != Activation::sigmoid_deferred)
      throw ConfigError("model: multi-label task needs a sigmoid-deferred output layer");
  }

  template <class F>
  void for_each_tensor(F&& fn) {
    for (size_t l = 0; l < params.size(); ++l) {
      std::string prefix = "layer" + std::to_string(l) + ".";
      params[l].for_each([&](const std::string& n, Matrix<T>& m) { fn(prefix + n, m); });
    }
  }
};

template <class T>
using ModelDraws = std::vector<LayerDraws<T>>;

// Runs all layers; returns pre-softmax/pre-sigmoid logits (N x C).
template <class T>
Matrix<T> model_forward(const GatModel<T>& model, const Matrix<T>& features, const CsrGraph& g,
                        RngState& rng, Mode mode,
                        std::type_identity_t<std::vector<LayerCache<T>>>* caches,
                        const std::type_identity_t<ModelDraws<T>>* frozen = nullptr) {
  if (features.cols != model.in_features())
    throw ShapeError("model_forward: feature width " + std::to_string(features.cols) +
                     " != model input " + std::to_string(model.in_features()));
  if (caches) caches->assign(model.num_layers(), LayerCache<T>{});
  Matrix<T> h = features;
  for (size_t l = 0; l < model.num_layers(); ++l) {
    LayerCache<T>* cache = caches ? &(*caches)[l] : nullptr;
    const LayerDraws<T>* draws = frozen ? &(*frozen)[l] : nullptr;
    h = gat_forward(h, model.params[l], model.configs[l], g, rng, mode, cache, draws);
  }
  return h;
}

// Chains layer backwards; returns per-layer parameter gradients. When
// grad_features is non-null it receives d(loss)/d(input features).
template <class T>
std::vector<GatLayerParams<T>> model_backward(const GatModel<T>& model,
                                              const std::vector<LayerCache<T>>& caches,
                                              const Matrix<T>& grad_logits, const CsrGraph& g,
                                              std::type_identity_t<Matrix<T>>* grad_features = nullptr) {
  if (caches.size() != model.num_layers())
    throw ContractError("model_backward: cache count mismatch");
  std::vector<GatLayerParams<T>> grads;
  grads.reserve(model.num_layers());
  for (size_t l = 0; l < model.num_layers(); ++l)
    grads.push_back(GatLayerParams<T>::zeros_like(model.configs[l]));

  Matrix<T> grad = grad_logits;
  for (size_t l = model.num_layers(); l-- > 0;) {
    const bool need_input = l > 0 || grad_features != nullptr;
    Matrix<T> grad_in;
    gat_backward(grad, caches[l], model.params[l], model.configs[l], g, grads[l],
                 need_input ? &grad_in : nullptr);
    grad = std::move(grad_in);
  }
  if (grad_features) *grad_features = std::move(grad);
  return grads;
}

// Mean over masked nodes of -log softmax(logits)[label]. The gradient is
// (softmax - onehot)/|mask| on masked rows and zero elsewhere.
template <class T>
double softmax_cross_entropy(const Matrix<T>& logits, const std::vector<uint32_t>& labels,
                             const std::vector<uint8_t>& mask, Matrix<T>* grad_out = nullptr) {
  const uint32_t N = logits.rows, C = logits.cols;
  if (labels.size() != N || mask.size() != N)
    throw ShapeError("softmax_cross_entropy: label/mask size mismatch");
  uint32_t m = count_mask(mask);
  if (m == 0) throw ValidationError("softmax_cross_entropy: empty mask");
  for (uint32_t i = 0; i < N; ++i)
    if (mask[i] && labels[i] >= C)
      throw DataError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                      " >= classes " + std::to_string(C));

  if (grad_out) *grad_out = Matrix<T>(N, C);
  const T inv_m = T(1) / T(m);
  double loss = 0.0;
  for (uint32_t i = 0; i < N; ++i) {
    if (!mask[i]) continue;
    const T* z = logits.row(i);
    T mx = z[0];
    for (uint32_t c = 1; c < C; ++c) mx = std::max(mx, z[c]);
    T sum = T(0);
    for (uint32_t c = 0; c < C; ++c) sum += std::exp(z[c] - mx);
    const T lse = std::log(sum) + mx;
    loss += double(lse - z[labels[i]]);
    if (grad_out) {
      T* grow = grad_out->row(i);
      for (uint32_t c = 0; c < C; ++c)
        grow[c] = (std::exp(z[c] - mx) / sum - (c == labels[i] ? T(1) : T(0))) * inv_m;
    }
  }
  return loss / double(m);
}

// Mean over masked node-label pairs of the stable binary cross-entropy
// max(z,0) - z*y + log(1 + exp(-|z|)); gradient (sigmoid(z) - y) / (|mask|*C).
template <class T>
double sigmoid_bce(const Matrix<T>& logits, const std::vector<uint8_t>& label_matrix,
                   const std::vector<uint8_t>& mask, Matrix<T>* grad_out = nullptr) {
  const uint32_t N = logits.rows, C = logits.cols;
  if (label_matrix.size() != size_t(N) * C || mask.size() != N)
    throw ShapeError("sigmoid_bce: label/mask size mismatch");
  uint32_t m = count_mask(mask);
  if (m == 0) throw ValidationError("sigmoid_bce: empty mask");

  if (grad_out) *grad_out = Matrix<T>(N, C);
  const T inv = T(1) / (T(m) * T(C));
  double loss = 0.0;
  for (uint32_t i = 0; i < N; ++i) {
    if (!mask[i]) continue;
    const T* z = logits.row(i);
    const uint8_t* y = &label_matrix[size_t(i) * C];
    T* grow = grad_out ? grad_out->row(i) : nullptr;
    for (uint32_t c = 0; c < C; ++c) {
      if (y[c] > 1) throw DataError("sigmoid_bce: non-binary label at node " + std::to_string(i));
      const double zc = double(z[c]);
      loss += std::max(zc, 0.0) - zc * y[c] + std::log1p(std::exp(-std::abs(zc)));
      if (grow) {
        const T sig = T(1) / (T(1) + T(std::exp(-zc)));
        grow[c] = (sig - T(y[c])) * inv;
      }
    }
  }
  return loss / (double(m) * double(C));
}

// ---- presets (src/presets.cpp) ----

struct PresetDefaults {
  Task task = Task::single_label;
  bool inductive = false;
  bool self_only = false;  // replace the graph with self-loops only (MLP baseline)
  float lr = 0.005f;
  float l2_lambda = 0.0f;
};

bool is_known_preset(const std::string& name);
std::vector<std::string> preset_names();
PresetDefaults preset_defaults(const std::string& name);
std::vector<GatLayerConfig> preset_layers(const std::string& name, uint32_t in_features,
                                          uint32_t num_classes);

// ---- checkpoint container (src/checkpoint.cpp) ----

void save_checkpoint(const std::string& path, const GatModel<float>& model);
GatModel<float> load_checkpoint(const std::string& path);

}  // namespace gatnet
