#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gatnet/layer.hpp"
#include "gatnet/numcheck.hpp"
#include "gatnet/reference.hpp"
#include "test_util.hpp"

using namespace gatnet;

namespace {

template <class T>
GatLayerConfig small_config(uint32_t f, uint32_t fp, uint32_t heads) {
  GatLayerConfig cfg;
  cfg.in_features = f;
  cfg.head_features = fp;
  cfg.num_heads = heads;
  return cfg;
}

double max_abs_diff(const MatF& a, const MatD& b) {
  double mx = 0;
  for (size_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(double(a.data[i]) - b.data[i]));
  return mx;
}

MatD widen(const MatF& a) {
  MatD d(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) d.data[i] = a.data[i];
  return d;
}

template <class T>
GatLayerParams<T> widen_params(const GatLayerParams<float>& p) {
  GatLayerParams<T> out;
  for (const auto& m : p.W) out.W.push_back(widen(m));
  for (const auto& m : p.a_src) out.a_src.push_back(widen(m));
  for (const auto& m : p.a_dst) out.a_dst.push_back(widen(m));
  for (const auto& m : p.bias) out.bias.push_back(widen(m));
  if (p.skip_proj.size()) out.skip_proj = widen(p.skip_proj);
  return out;
}

}  // namespace

TEST_SUITE("gat") {

TEST_CASE("zero attention vectors give uniform coefficients") {
  RngState rng(31, 0);
  CsrGraph g = testutil::random_graph(20, 4.0, rng);
  MatF wh = testutil::random_matrix<float>(20, 3, rng);
  MatF zero(3, 1);
  auto alpha = attention_coefficients(wh, zero, zero, g, 0.2f);
  for (uint32_t i = 0; i < g.num_nodes; ++i)
    for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
      CHECK(alpha[e] == doctest::Approx(1.0 / g.degree(i)));
}

TEST_CASE("two-neighbor softmax matches the scalar oracle") {
  // N_0 = {0, 1}; Wh = [1, -1], a_src = 0, a_dst = 1 gives raw logits
  // (1.0, -1.0) and post-LeakyReLU scores (1.0, -0.2)
  CsrGraph g = from_edge_list(2, {{1, 0}}, false, true);
  MatF wh(2, 1);
  wh(0, 0) = 1.0f;
  wh(1, 0) = -1.0f;
  MatF a_src(1, 1), a_dst(1, 1);
  a_dst(0, 0) = 1.0f;
  std::vector<float> raw;
  auto alpha = attention_coefficients(wh, a_src, a_dst, g, 0.2f, &raw);

  CHECK(raw[0] == doctest::Approx(1.0));
  CHECK(raw[1] == doctest::Approx(-1.0));
  const double e1 = std::exp(1.0), e2 = std::exp(-0.2);
  CHECK(double(alpha[0]) == doctest::Approx(e1 / (e1 + e2)).epsilon(1e-5));
  CHECK(double(alpha[1]) == doctest::Approx(e2 / (e1 + e2)).epsilon(1e-5));
  // matches the quoted 5-digit values
  CHECK(double(alpha[0]) == doctest::Approx(0.76852).epsilon(1e-4));
  CHECK(double(alpha[1]) == doctest::Approx(0.23148).epsilon(1e-4));
  // isolated node's self-loop gets exactly 1
  CHECK(alpha[2] == 1.0f);
}

TEST_CASE("identity configuration reproduces the input") {
  CsrGraph g = from_edge_list(1, {}, false, true);
  GatLayerConfig cfg = small_config<float>(3, 3, 1);
  cfg.use_bias = false;
  auto params = GatLayerParams<float>::zeros_like(cfg);
  params.W[0] = MatF::identity(3);
  MatF h(1, 3);
  h.data = {0.5f, -1.25f, 2.0f};
  RngState rng(0, 0);
  MatF out = gat_forward(h, params, cfg, g, rng, Mode::eval, nullptr);
  CHECK(out == h);
}

TEST_CASE("forward matches the dense 64-bit reference across configurations") {
  RngState rng(37, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const uint32_t n = 3 + uint32_t(rng.below(14));
    const uint32_t f = 1 + uint32_t(rng.below(6));
    const uint32_t fp = 1 + uint32_t(rng.below(5));
    const uint32_t heads = 1 + uint32_t(rng.below(3));
    CsrGraph g = testutil::random_graph(n, 3.0, rng, trial % 2 == 0);

    GatLayerConfig cfg = small_config<float>(f, fp, heads);
    cfg.use_bias = trial % 2 == 0;
    cfg.activation = trial % 3 == 0 ? Activation::elu : Activation::none;
    cfg.attention = trial % 5 == 0 ? AttentionKind::constant : AttentionKind::learned;
    if (trial % 4 == 0) {
      cfg.merge = Merge::average;
      cfg.output_layer = true;
      cfg.activation = Activation::none;
    }
    if (trial % 7 == 0) cfg.skip = SkipKind::projected;

    RngState prng(trial, 100);
    auto params = GatLayerParams<float>::glorot(cfg, prng);
    MatF h = testutil::random_matrix<float>(n, f, rng);

    RngState r0(0, 0);
    MatF fast = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
    MatD slow = ref::dense_gat_forward(widen(h), widen_params<double>(params), cfg, g);
    CHECK(max_abs_diff(fast, slow) < 1e-5);
  }
}

TEST_CASE("3-node path against the dense reference") {
  CsrGraph g = from_edge_list(3, {{0, 1}, {1, 2}}, true, true);
  GatLayerConfig cfg = small_config<float>(2, 2, 1);
  cfg.use_bias = false;
  auto params = GatLayerParams<float>::zeros_like(cfg);
  params.W[0](0, 0) = 0.3f;
  params.W[0](0, 1) = -0.1f;
  params.W[0](1, 0) = 0.5f;
  params.W[0](1, 1) = 0.2f;
  params.a_src[0](0, 0) = 0.4f;
  params.a_src[0](1, 0) = -0.3f;
  params.a_dst[0](0, 0) = 0.1f;
  params.a_dst[0](1, 0) = 0.6f;
  MatF h(3, 2);
  h.data = {1.0f, 0.0f, -0.5f, 0.25f, 0.2f, 0.9f};

  RngState r0(0, 0);
  MatF fast = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
  MatD slow = ref::dense_gat_forward(widen(h), widen_params<double>(params), cfg, g);
  CHECK(max_abs_diff(fast, slow) < 1e-5);
}

TEST_CASE("hidden-layer shape 2708x1433 -> 2708x64 with 8 heads of 8") {
  RngState rng(41, 0);
  CsrGraph g = testutil::random_graph(2708, 4.0, rng);
  GatLayerConfig cfg = small_config<float>(1433, 8, 8);
  cfg.activation = Activation::elu;
  RngState prng(1, 2);
  auto params = GatLayerParams<float>::glorot(cfg, prng);
  // sparse bag-of-words-like input
  MatF h(2708, 1433);
  for (uint32_t i = 0; i < h.rows; ++i)
    for (int t = 0; t < 20; ++t) h(i, uint32_t(rng.below(1433))) = 1.0f;
  RngState r0(0, 0);
  MatF out = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
  CHECK(out.rows == 2708);
  CHECK(out.cols == 64);
}

TEST_CASE("constant attention emits uniform coefficients and matches zero-a bitwise") {
  RngState rng(43, 0);
  CsrGraph g = testutil::random_graph(25, 5.0, rng);
  GatLayerConfig cfg = small_config<float>(4, 3, 2);
  RngState prng(2, 3);
  auto params = GatLayerParams<float>::glorot(cfg, prng);
  MatF h = testutil::random_matrix<float>(25, 4, rng);

  GatLayerConfig ccfg = cfg;
  ccfg.attention = AttentionKind::constant;
  RngState r0(0, 0);
  LayerCache<float> cache;
  MatF out_const = gat_forward(h, params, ccfg, g, r0, Mode::eval, &cache);
  for (uint32_t i = 0; i < g.num_nodes; ++i)
    for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
      for (uint32_t k = 0; k < 2; ++k) CHECK(cache.alpha[k][e] == 1.0f / float(g.degree(i)));

  auto zero_a = params;
  for (auto& m : zero_a.a_src) m.fill(0.0f);
  for (auto& m : zero_a.a_dst) m.fill(0.0f);
  MatF out_learned = gat_forward(h, zero_a, cfg, g, r0, Mode::eval, nullptr);
  CHECK(out_const == out_learned);
}

TEST_CASE("constant attention with identity weights averages the neighborhood") {
  CsrGraph g = from_edge_list(3, {{0, 1}, {1, 2}}, true, true);
  GatLayerConfig cfg = small_config<float>(2, 2, 1);
  cfg.attention = AttentionKind::constant;
  cfg.use_bias = false;
  auto params = GatLayerParams<float>::zeros_like(cfg);
  params.W[0] = MatF::identity(2);
  MatF h(3, 2);
  h.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  RngState r0(0, 0);
  MatF out = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
  // node 0: mean of nodes {0,1}; node 1: mean of {0,1,2}; node 2: mean of {1,2}
  CHECK(out(0, 0) == doctest::Approx(2.0));
  CHECK(out(0, 1) == doctest::Approx(3.0));
  CHECK(out(1, 0) == doctest::Approx(3.0));
  CHECK(out(1, 1) == doctest::Approx(4.0));
  CHECK(out(2, 0) == doctest::Approx(4.0));
  CHECK(out(2, 1) == doctest::Approx(5.0));
}

TEST_CASE("alpha rows sum to one over many random instances") {
  RngState rng(47, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const uint32_t n = 2 + uint32_t(rng.below(30));
    CsrGraph g = testutil::random_graph(n, 1 + rng.next_double() * 6, rng, trial % 2 == 0);
    MatF wh = testutil::random_matrix<float>(n, 3, rng, 2.0);
    MatF a_src = testutil::random_matrix<float>(3, 1, rng);
    MatF a_dst = testutil::random_matrix<float>(3, 1, rng);
    auto alpha = attention_coefficients(wh, a_src, a_dst, g, 0.2f);
    for (uint32_t i = 0; i < n; ++i) {
      double sum = 0;
      for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
        CHECK(alpha[e] > 0.0f);
        CHECK(alpha[e] <= 1.0f);
        sum += alpha[e];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("softmax is invariant to per-neighborhood shifts") {
  RngState rng(53, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const uint32_t n = 2 + uint32_t(rng.below(20));
    CsrGraph g = testutil::random_graph(n, 4.0, rng);
    std::vector<float> scores(g.num_edges());
    for (auto& s : scores) s = float(rng.uniform(-5, 5));
    auto base = masked_softmax(scores, g);
    std::vector<float> shifted = scores;
    for (uint32_t i = 0; i < n; ++i) {
      const float c = float(rng.uniform(-10, 10));
      for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) shifted[e] += c;
    }
    auto moved = masked_softmax(shifted, g);
    for (size_t e = 0; e < base.size(); ++e)
      CHECK(double(moved[e]) == doctest::Approx(double(base[e])).epsilon(1e-6));
  }
}

TEST_CASE("permutation equivariance") {
  RngState rng(59, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const uint32_t n = 4 + uint32_t(rng.below(12));
    std::vector<Edge> edges;
    for (uint32_t t = 0; t < n * 3; ++t)
      edges.emplace_back(uint32_t(rng.below(n)), uint32_t(rng.below(n)));
    CsrGraph g = from_edge_list(n, edges, true, true);

    std::vector<uint32_t> perm(n);
    for (uint32_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<Edge> pedges;
    for (auto [s, d] : edges) pedges.emplace_back(perm[s], perm[d]);
    CsrGraph pg = from_edge_list(n, pedges, true, true);

    GatLayerConfig cfg = small_config<float>(3, 4, 2);
    RngState prng(trial, 7);
    auto params = GatLayerParams<float>::glorot(cfg, prng);
    MatF h = testutil::random_matrix<float>(n, 3, rng);
    MatF ph(n, 3);
    for (uint32_t i = 0; i < n; ++i)
      for (uint32_t c = 0; c < 3; ++c) ph(perm[i], c) = h(i, c);

    RngState r0(0, 0);
    MatF out = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
    MatF pout = gat_forward(ph, params, cfg, pg, r0, Mode::eval, nullptr);
    for (uint32_t i = 0; i < n; ++i)
      for (uint32_t c = 0; c < out.cols; ++c)
        CHECK(double(pout(perm[i], c)) == doctest::Approx(double(out(i, c))).epsilon(1e-6));
  }
}

TEST_CASE("masking locality: features outside N_i never change h'_i") {
  RngState rng(61, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const uint32_t n = 5 + uint32_t(rng.below(12));
    CsrGraph g = testutil::random_graph(n, 3.0, rng, false);
    GatLayerConfig cfg = small_config<float>(3, 3, 2);
    RngState prng(trial, 8);
    auto params = GatLayerParams<float>::glorot(cfg, prng);
    MatF h = testutil::random_matrix<float>(n, 3, rng);

    const uint32_t i = uint32_t(rng.below(n));
    uint32_t u = uint32_t(rng.below(n));
    bool in_neighborhood = true;
    for (int tries = 0; tries < 64; ++tries) {
      u = uint32_t(rng.below(n));
      in_neighborhood = false;
      for (uint32_t j : g.neighbors(i)) in_neighborhood |= (j == u);
      if (!in_neighborhood) break;
    }
    if (in_neighborhood) continue;  // dense row, nothing to perturb

    RngState r0(0, 0);
    MatF base = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
    MatF mutated = h;
    for (uint32_t c = 0; c < 3; ++c) mutated(u, c) += float(rng.uniform(0.5, 2.0));
    MatF after = gat_forward(mutated, params, cfg, g, r0, Mode::eval, nullptr);
    for (uint32_t c = 0; c < base.cols; ++c) CHECK(after(i, c) == base(i, c));
  }
}

TEST_CASE("zero upstream gradient produces exactly zero parameter gradients") {
  RngState rng(67, 0);
  CsrGraph g = testutil::random_graph(10, 3.0, rng);
  GatLayerConfig cfg = small_config<float>(4, 3, 2);
  cfg.skip = SkipKind::projected;
  RngState prng(4, 4);
  auto params = GatLayerParams<float>::glorot(cfg, prng);
  MatF h = testutil::random_matrix<float>(10, 4, rng);

  RngState r0(0, 0);
  LayerCache<float> cache;
  gat_forward(h, params, cfg, g, r0, Mode::eval, &cache);
  MatF grad_out(10, cfg.output_width());
  auto grads = GatLayerParams<float>::zeros_like(cfg);
  MatF grad_in;
  gat_backward(grad_out, cache, params, cfg, g, grads, &grad_in);
  grads.for_each([&](const std::string&, MatF& m) {
    for (float v : m.data) CHECK(v == 0.0f);
  });
  for (float v : grad_in.data) CHECK(v == 0.0f);
}

TEST_CASE("constant attention leaves attention vectors with zero gradient") {
  RngState rng(71, 0);
  CsrGraph g = testutil::random_graph(12, 3.0, rng);
  GatLayerConfig cfg = small_config<float>(4, 3, 2);
  cfg.attention = AttentionKind::constant;
  RngState prng(5, 5);
  auto params = GatLayerParams<float>::glorot(cfg, prng);
  MatF h = testutil::random_matrix<float>(12, 4, rng);

  RngState r0(0, 0);
  LayerCache<float> cache;
  gat_forward(h, params, cfg, g, r0, Mode::eval, &cache);
  MatF grad_out = testutil::random_matrix<float>(12, cfg.output_width(), rng);
  auto grads = GatLayerParams<float>::zeros_like(cfg);
  gat_backward(grad_out, cache, params, cfg, g, grads, nullptr);
  for (uint32_t k = 0; k < 2; ++k) {
    for (float v : grads.a_src[k].data) CHECK(v == 0.0f);
    for (float v : grads.a_dst[k].data) CHECK(v == 0.0f);
    bool any_w = false;
    for (float v : grads.W[k].data) any_w |= v != 0.0f;
    CHECK(any_w);
  }
}

TEST_CASE("head independence: zeroing one head's gradient slice zeroes its parameters") {
  RngState rng(73, 0);
  CsrGraph g = testutil::random_graph(9, 3.0, rng);
  GatLayerConfig cfg = small_config<float>(4, 3, 3);
  RngState prng(6, 6);
  auto params = GatLayerParams<float>::glorot(cfg, prng);
  MatF h = testutil::random_matrix<float>(9, 4, rng);

  RngState r0(0, 0);
  LayerCache<float> cache;
  gat_forward(h, params, cfg, g, r0, Mode::eval, &cache);
  MatF grad_out = testutil::random_matrix<float>(9, cfg.output_width(), rng);
  const uint32_t dead_head = 1;
  for (uint32_t i = 0; i < grad_out.rows; ++i)
    for (uint32_t c = dead_head * 3; c < (dead_head + 1) * 3; ++c) grad_out(i, c) = 0.0f;

  auto grads = GatLayerParams<float>::zeros_like(cfg);
  gat_backward(grad_out, cache, params, cfg, g, grads, nullptr);
  for (float v : grads.W[dead_head].data) CHECK(v == 0.0f);
  for (float v : grads.a_src[dead_head].data) CHECK(v == 0.0f);
  for (float v : grads.a_dst[dead_head].data) CHECK(v == 0.0f);
  for (float v : grads.bias[dead_head].data) CHECK(v == 0.0f);
  bool any_live = false;
  for (float v : grads.W[0].data) any_live |= v != 0.0f;
  CHECK(any_live);
}

TEST_CASE("single layer gradients agree with central finite differences") {
  // random 12-node, 2-head layer; loss = sum(out * R)
  RngState rng(79, 0);
  CsrGraph g = testutil::random_graph(12, 3.0, rng);
  GatLayerConfig cfg = small_config<double>(5, 4, 2);
  cfg.activation = Activation::elu;
  cfg.skip = SkipKind::projected;
  RngState prng(7, 7);
  auto params = GatLayerParams<double>::glorot(cfg, prng);
  MatD h = testutil::random_matrix<double>(12, 5, rng);
  MatD r_weights = testutil::random_matrix<double>(12, cfg.output_width(), rng);

  RngState r0(0, 0);
  auto loss_fn = [&]() {
    MatD out = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
    double acc = 0;
    for (size_t i = 0; i < out.size(); ++i) acc += out.data[i] * r_weights.data[i];
    return acc;
  };

  LayerCache<double> cache;
  gat_forward(h, params, cfg, g, r0, Mode::eval, &cache);
  auto grads = GatLayerParams<double>::zeros_like(cfg);
  gat_backward(r_weights, cache, params, cfg, g, grads, nullptr);

  std::vector<std::pair<std::string, MatD*>> tensors;
  params.for_each([&](const std::string& n, MatD& m) { tensors.emplace_back(n, &m); });
  std::vector<const MatD*> analytic;
  grads.for_each([&](const std::string&, const MatD& m) { analytic.push_back(&m); });

  GradCheckReport report = gradcheck(tensors, analytic, loss_fn);
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("attention export rows and per-node sums") {
  RngState rng(83, 0);
  CsrGraph g = testutil::random_graph(15, 4.0, rng);
  GatLayerConfig cfg = small_config<float>(3, 2, 2);
  RngState prng(8, 8);
  auto params = GatLayerParams<float>::glorot(cfg, prng);
  MatF h = testutil::random_matrix<float>(15, 3, rng);

  RngState r0(0, 0);
  LayerCache<float> cache;
  gat_forward(h, params, cfg, g, r0, Mode::eval, &cache);
  std::ostringstream os;
  export_attention(os, g, cache);

  std::istringstream is(os.str());
  std::vector<std::vector<double>> sums(2, std::vector<double>(15, 0.0));
  uint32_t rows = 0;
  uint32_t i, j, k;
  double a;
  while (is >> i >> j >> k >> a) {
    sums[k][i] += a;
    ++rows;
  }
  CHECK(rows == 2 * g.num_edges());
  for (uint32_t head = 0; head < 2; ++head)
    for (uint32_t node = 0; node < 15; ++node)
      CHECK(sums[head][node] == doctest::Approx(1.0).epsilon(1e-5));
}

}  // TEST_SUITE
