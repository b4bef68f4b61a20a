// Benchmark: OpenMP CSR kernels against the serial dense reference, plus
// edge-count scaling and a thread sweep for the production forward path.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "gatnet/layer.hpp"
#include "gatnet/reference.hpp"

using namespace gatnet;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

CsrGraph random_graph(uint32_t n, double avg_degree, RngState& rng) {
  std::vector<Edge> edges;
  const uint32_t per_node = uint32_t(std::max(1.0, avg_degree));
  for (uint32_t i = 0; i < n; ++i)
    for (uint32_t t = 0; t < per_node; ++t) {
      uint32_t j = uint32_t(rng.below(n));
      if (j != i) edges.emplace_back(i, j);
    }
  return from_edge_list(n, edges, false, true);
}

template <class F>
double best_of(int reps, F&& fn) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    fn();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gatnet kernel benchmark"};
  uint32_t features = 32, head_features = 32, heads = 2;
  int reps = 5;
  app.add_option("--features", features, "input feature width");
  app.add_option("--head-features", head_features, "per-head output width");
  app.add_option("--heads", heads, "attention heads");
  app.add_option("--reps", reps, "repetitions (min is reported)");
  CLI11_PARSE(app, argc, argv);

  RngState rng(2026, 0);

  std::printf("== sparse CSR forward (OpenMP) vs serial dense reference ==\n");
  std::printf("%8s %10s %12s %12s %9s\n", "N", "|E|", "sparse ms", "dense ms", "speedup");
  for (uint32_t n : {500u, 1000u, 2000u}) {
    CsrGraph g = random_graph(n, 10.0, rng);
    GatLayerConfig cfg;
    cfg.in_features = features;
    cfg.head_features = head_features;
    cfg.num_heads = heads;
    RngState prng(1, 1);
    auto params = GatLayerParams<float>::glorot(cfg, prng);
    MatF h(n, features);
    for (auto& v : h.data) v = float(2.0 * rng.next_double() - 1.0);
    auto dparams = GatLayerParams<double>::zeros_like(cfg);
    {
      size_t k = 0;
      std::vector<Matrix<double>*> dst;
      dparams.for_each([&](const std::string&, Matrix<double>& m) { dst.push_back(&m); });
      params.for_each([&](const std::string&, const Matrix<float>& m) {
        for (size_t i = 0; i < m.size(); ++i) dst[k]->data[i] = m.data[i];
        ++k;
      });
    }
    MatD hd(n, features);
    for (size_t i = 0; i < h.size(); ++i) hd.data[i] = h.data[i];

    RngState r0(0, 0);
    const double sparse = best_of(reps, [&] {
      MatF out = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
      (void)out;
    });
    const double dense = best_of(std::max(1, reps / 2), [&] {
      MatD out = ref::dense_gat_forward(hd, dparams, cfg, g);
      (void)out;
    });
    std::printf("%8u %10u %12.3f %12.3f %8.1fx\n", n, g.num_edges(), sparse * 1e3, dense * 1e3,
                dense / sparse);
  }

  std::printf("\n== forward wall-time vs |E| at fixed N, F, F' ==\n");
  std::printf("%8s %10s %12s %14s\n", "N", "|E|", "forward ms", "ms per 100k E");
  {
    const uint32_t n = 3000;
    GatLayerConfig cfg;
    cfg.in_features = 16;
    cfg.head_features = 16;
    cfg.num_heads = 1;
    RngState prng(2, 2);
    auto params = GatLayerParams<float>::glorot(cfg, prng);
    MatF h(n, 16);
    for (auto& v : h.data) v = float(2.0 * rng.next_double() - 1.0);
    for (uint32_t scale : {1u, 2u, 4u, 8u}) {
      CsrGraph g = random_graph(n, 16.0 * scale, rng);
      RngState r0(0, 0);
      const double t = best_of(reps, [&] {
        MatF out = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
        (void)out;
      });
      std::printf("%8u %10u %12.3f %14.3f\n", n, g.num_edges(), t * 1e3,
                  t * 1e3 / (g.num_edges() / 1e5));
    }
  }

#ifdef _OPENMP
  std::printf("\n== thread sweep on the production forward ==\n");
  std::printf("%8s %12s\n", "threads", "forward ms");
  {
    const uint32_t n = 4000;
    CsrGraph g = random_graph(n, 32.0, rng);
    GatLayerConfig cfg;
    cfg.in_features = 64;
    cfg.head_features = 64;
    cfg.num_heads = 2;
    RngState prng(3, 3);
    auto params = GatLayerParams<float>::glorot(cfg, prng);
    MatF h(n, 64);
    for (auto& v : h.data) v = float(2.0 * rng.next_double() - 1.0);
    const int max_threads = omp_get_max_threads();
    for (int t = 1; t <= max_threads; t *= 2) {
      omp_set_num_threads(t);
      RngState r0(0, 0);
      const double secs = best_of(reps, [&] {
        MatF out = gat_forward(h, params, cfg, g, r0, Mode::eval, nullptr);
        (void)out;
      });
      std::printf("%8d %12.3f\n", t, secs * 1e3);
    }
    omp_set_num_threads(max_threads);
  }
#endif
  return 0;
}
