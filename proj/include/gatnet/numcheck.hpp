#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gatnet/model.hpp"

// Independent finite-difference gradient oracle. All math runs in 64-bit;
// single-threaded by contract so results are bitwise reproducible.
namespace gatnet {

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  uint32_t arg_row = 0, arg_col = 0;
  size_t checked = 0;
};

struct GradCheckReport {
  double step = 1e-5;
  double tol = 1e-5;
  double max_rel_err = 0.0;
  std::string worst_tensor;
  bool pass = true;
  std::vector<GradCheckEntry> entries;
  // Smallest |raw attention logit| seen in the checked forward. Central
  // differences are only valid away from the LeakyReLU kink; harnesses
  // should resample instances whose clearance is below ~100x the step.
  double min_kink_clearance = std::numeric_limits<double>::infinity();
};

// Central differences (f(x+d) - f(x-d)) / 2d per coordinate against the
// analytic gradient; relative error |ga-gn| / max(|ga|,|gn|,1e-8). Tensors
// larger than max_coords are subsampled at random. loss_fn must be
// deterministic (verified by double evaluation).
inline GradCheckReport gradcheck(
    const std::vector<std::pair<std::string, Matrix<double>*>>& tensors,
    const std::vector<const Matrix<double>*>& analytic, const std::function<double()>& loss_fn,
    double step = 1e-5, double tol = 1e-5, size_t max_coords = 2000,
    uint64_t subsample_seed = 0) {
  if (tensors.size() != analytic.size())
    throw ContractError("gradcheck: tensor/gradient count mismatch");
  const double f0 = loss_fn();
  if (loss_fn() != f0)
    throw ContractError("gradcheck: loss function is not deterministic "
                        "(freeze dropout masks before checking)");

  GradCheckReport report;
  report.step = step;
  report.tol = tol;
  for (size_t t = 0; t < tensors.size(); ++t) {
    Matrix<double>& m = *tensors[t].second;
    const Matrix<double>& g = *analytic[t];
    if (!m.same_shape(g)) throw ContractError("gradcheck: gradient shape mismatch");

    std::vector<size_t> coords;
    if (m.size() <= max_coords) {
      coords.resize(m.size());
      for (size_t i = 0; i < m.size(); ++i) coords[i] = i;
    } else {
      RngState rng(subsample_seed, 0x6e756d ^ t);
      coords.resize(max_coords);
      for (size_t i = 0; i < max_coords; ++i) coords[i] = size_t(rng.below(m.size()));
    }

    GradCheckEntry entry;
    entry.tensor = tensors[t].first;
    entry.checked = coords.size();
    for (size_t c : coords) {
      const double saved = m.data[c];
      m.data[c] = saved + step;
      const double fp = loss_fn();
      m.data[c] = saved - step;
      const double fm = loss_fn();
      m.data[c] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double analytic_v = g.data[c];
      const double rel = std::abs(analytic_v - numeric) /
                         std::max({std::abs(analytic_v), std::abs(numeric), 1e-8});
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.arg_row = uint32_t(c / m.cols);
        entry.arg_col = uint32_t(c % m.cols);
      }
    }
    if (entry.max_rel_err > report.max_rel_err) {
      report.max_rel_err = entry.max_rel_err;
      report.worst_tensor = entry.tensor;
    }
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

// Convenience wrapper: checks every parameter tensor of a model against the
// loss implied by its task, with dropout draws frozen once up front.
// l2_lambda, when nonzero, adds the weight penalty to both sides.
inline GradCheckReport model_gradcheck(GatModel<double>& model, const Matrix<double>& features,
                                       const CsrGraph& g, const std::vector<uint32_t>& labels,
                                       const std::vector<uint8_t>& label_matrix,
                                       const std::vector<uint8_t>& mask, Mode mode,
                                       uint64_t draw_seed = 7, double l2_lambda = 0.0,
                                       double step = 1e-5, double tol = 1e-5,
                                       size_t max_coords = 2000) {
  model.validate();

  // freeze one set of dropout draws so the loss is deterministic
  ModelDraws<double> draws(model.num_layers());
  if (mode == Mode::train) {
    RngState rng(draw_seed, 0xd70);
    std::vector<LayerCache<double>> caches;
    model_forward(model, features, g, rng, Mode::train, &caches);
    for (size_t l = 0; l < caches.size(); ++l) {
      draws[l].input_mask = caches[l].input_mask;
      draws[l].attn_mask = caches[l].attn_mask;
    }
  }

  RngState unused(0, 0);
  auto loss_fn = [&]() {
    Matrix<double> logits = model_forward(model, features, g, unused, mode, nullptr,
                                          mode == Mode::train ? &draws : nullptr);
    double loss = model.task == Task::single_label
                      ? softmax_cross_entropy(logits, labels, mask)
                      : sigmoid_bce(logits, label_matrix, mask);
    if (l2_lambda != 0.0) {
      double penalty = 0.0;
      model.for_each_tensor([&](const std::string& name, Matrix<double>& m) {
        if (!l2_penalized(name)) return;
        for (double v : m.data) penalty += v * v;
      });
      loss += l2_lambda * penalty;
    }
    return loss;
  };

  // analytic gradients once
  std::vector<LayerCache<double>> caches;
  Matrix<double> logits = model_forward(model, features, g, unused, mode, &caches,
                                        mode == Mode::train ? &draws : nullptr);
  double clearance = std::numeric_limits<double>::infinity();
  for (const auto& cache : caches)
    for (const auto& head_logits : cache.logits)
      for (double raw : head_logits) clearance = std::min(clearance, std::abs(raw));
  Matrix<double> grad_logits;
  if (model.task == Task::single_label)
    softmax_cross_entropy(logits, labels, mask, &grad_logits);
  else
    sigmoid_bce(logits, label_matrix, mask, &grad_logits);
  std::vector<GatLayerParams<double>> grads = model_backward(model, caches, grad_logits, g);
  if (l2_lambda != 0.0) {
    for (size_t l = 0; l < grads.size(); ++l) {
      // add 2*lambda*theta to penalized tensors
      std::vector<Matrix<double>*> gptrs;
      grads[l].for_each([&](const std::string&, Matrix<double>& m) { gptrs.push_back(&m); });
      std::vector<std::pair<std::string, const Matrix<double>*>> pptrs;
      model.params[l].for_each([&](const std::string& n, const Matrix<double>& m) {
        pptrs.emplace_back(n, &m);
      });
      for (size_t t = 0; t < gptrs.size(); ++t) {
        if (!l2_penalized(pptrs[t].first)) continue;
        for (size_t i = 0; i < gptrs[t]->size(); ++i)
          gptrs[t]->data[i] += 2.0 * l2_lambda * pptrs[t].second->data[i];
      }
    }
  }

  std::vector<std::pair<std::string, Matrix<double>*>> tensors;
  model.for_each_tensor([&](const std::string& n, Matrix<double>& m) {
    tensors.emplace_back(n, &m);
  });
  std::vector<const Matrix<double>*> analytic;
  for (size_t l = 0; l < grads.size(); ++l)
    grads[l].for_each([&](const std::string&, const Matrix<double>& m) {
      analytic.push_back(&m);
    });

  GradCheckReport report = gradcheck(tensors, analytic, loss_fn, step, tol, max_coords, draw_seed);
  report.min_kink_clearance = clearance;
  return report;
}

}  // namespace gatnet
