// gat: train / evaluate / inspect graph-attention models from the command line.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "gatnet/data.hpp"
#include "gatnet/metrics.hpp"
#include "gatnet/numcheck.hpp"
#include "gatnet/train.hpp"

using nlohmann::json;
using namespace gatnet;

namespace {

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

struct RunConfig {
  std::string preset;
  std::string dataset;  // transductive
  std::vector<std::string> train_datasets, val_datasets, test_datasets;  // inductive
  uint32_t runs = 1;
  uint64_t seed = 1;
  std::string out_dir = "runs";
  int threads = 1;
  TrainConfig train;
  bool has_lr = false, has_l2 = false;
};

// Strict parse: unknown keys are rejected so a saved config always means
// what it meant when it ran.
RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const std::vector<std::string> known = {
      "preset",       "dataset",    "train_datasets", "val_datasets", "test_datasets",
      "runs",         "seed",       "out_dir",        "threads",      "lr",
      "l2_lambda",    "patience",   "max_epochs",     "batch_graphs"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("config key '" + it.key() + "' is not recognized");
  }

  RunConfig cfg;
  cfg.preset = j.value("preset", "");
  cfg.dataset = j.value("dataset", "");
  if (j.contains("train_datasets")) cfg.train_datasets = j["train_datasets"].get<std::vector<std::string>>();
  if (j.contains("val_datasets")) cfg.val_datasets = j["val_datasets"].get<std::vector<std::string>>();
  if (j.contains("test_datasets")) cfg.test_datasets = j["test_datasets"].get<std::vector<std::string>>();
  cfg.runs = j.value("runs", 1u);
  cfg.seed = j.value("seed", uint64_t(1));
  cfg.out_dir = j.value("out_dir", std::string("runs"));
  cfg.threads = j.value("threads", 1);
  if (j.contains("lr")) {
    cfg.train.lr = j["lr"].get<float>();
    cfg.has_lr = true;
  }
  if (j.contains("l2_lambda")) {
    cfg.train.l2_lambda = j["l2_lambda"].get<float>();
    cfg.has_l2 = true;
  }
  cfg.train.patience = j.value("patience", 100u);
  cfg.train.max_epochs = j.value("max_epochs", 100000u);
  cfg.train.batch_graphs = j.value("batch_graphs", 2u);
  return cfg;
}

GraphBundle load_for_preset(const std::string& path, const PresetDefaults& defaults) {
  GraphBundle b = load_bundle(path);
  if (defaults.self_only) {
    b.graph = self_only_graph(b.num_nodes());
    std::cerr << "preset forces self-loop-only neighborhoods (per-node MLP)\n";
  }
  return b;
}

double pooled_micro_f1(const GatModel<float>& model, const std::vector<GraphBundle>& bundles) {
  uint64_t tp = 0, fp = 0, fn = 0;
  for (const GraphBundle& b : bundles) {
    RngState r0(0, 0);
    MatF logits = model_forward(model, b.features, b.graph, r0, Mode::eval, nullptr);
    for (uint32_t i = 0; i < logits.rows; ++i) {
      const float* z = logits.row(i);
      const uint8_t* y = &b.label_matrix[size_t(i) * logits.cols];
      for (uint32_t c = 0; c < logits.cols; ++c) {
        const bool pred = z[c] >= 0.0f;
        if (pred && y[c]) ++tp;
        else if (pred && !y[c]) ++fp;
        else if (!pred && y[c]) ++fn;
      }
    }
  }
  return (tp + fp + fn) == 0 ? 1.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
}

int cmd_train(const std::string& config_path, uint32_t runs_override, int64_t seed_override,
              const std::string& out_override, const std::string& preset_override,
              int threads_override) {
  RunConfig cfg = parse_run_config(config_path);
  if (runs_override) cfg.runs = runs_override;
  if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (!preset_override.empty()) cfg.preset = preset_override;
  if (threads_override > 0) cfg.threads = threads_override;
  if (cfg.preset.empty() || !is_known_preset(cfg.preset))
    throw ConfigError("config needs a known 'preset'");
  if (cfg.runs == 0) throw ConfigError("runs must be >= 1");
  set_threads(cfg.threads);

  const PresetDefaults defaults = preset_defaults(cfg.preset);
  if (!cfg.has_lr) cfg.train.lr = defaults.lr;
  if (!cfg.has_l2) cfg.train.l2_lambda = defaults.l2_lambda;
  cfg.train.preset = cfg.preset;

  // load every dataset before any artifact is written
  GraphBundle bundle;
  std::vector<GraphBundle> train_bundles, val_bundles, test_bundles;
  uint32_t in_features = 0, classes = 0;
  if (defaults.inductive) {
    if (cfg.train_datasets.empty() || cfg.val_datasets.empty())
      throw ConfigError("inductive preset needs train_datasets and val_datasets");
    for (const auto& p : cfg.train_datasets) train_bundles.push_back(load_for_preset(p, defaults));
    for (const auto& p : cfg.val_datasets) val_bundles.push_back(load_for_preset(p, defaults));
    for (const auto& p : cfg.test_datasets) test_bundles.push_back(load_for_preset(p, defaults));
    in_features = train_bundles[0].features.cols;
    classes = train_bundles[0].num_classes;
  } else {
    if (cfg.dataset.empty()) throw ConfigError("transductive preset needs 'dataset'");
    bundle = load_for_preset(cfg.dataset, defaults);
    in_features = bundle.features.cols;
    classes = bundle.num_classes;
  }
  const std::vector<GatLayerConfig> layers = preset_layers(cfg.preset, in_features, classes);

  std::filesystem::create_directories(cfg.out_dir);
  std::vector<double> per_run;
  for (uint32_t r = 0; r < cfg.runs; ++r) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + r;  // run seeds derive as seed + run index
    std::cerr << "run " << (r + 1) << "/" << cfg.runs << " (seed " << tc.seed << ")\n";

    TrainOutput out;
    double test_metric = 0.0;
    if (defaults.inductive) {
      out = train_inductive(train_bundles, val_bundles, layers, defaults.task, tc);
      test_metric = pooled_micro_f1(out.model, test_bundles.empty() ? val_bundles : test_bundles);
    } else {
      out = train_transductive(bundle, layers, defaults.task, tc);
      RngState r0(0, 0);
      MatF logits = model_forward(out.model, bundle.features, bundle.graph, r0, Mode::eval, nullptr);
      test_metric = defaults.task == Task::single_label
                        ? masked_accuracy(logits, bundle.labels, bundle.test_mask).value
                        : micro_f1(logits, bundle.label_matrix, bundle.test_mask).value;
    }
    per_run.push_back(test_metric);
    std::cerr << "  stopped after " << out.history.size() << " epochs, best epoch "
              << out.best_epoch << ", val " << out.best_val_metric << ", test " << test_metric
              << "\n";

    const std::string tag = "_run" + std::to_string(r);
    write_history_csv(cfg.out_dir + "/history" + tag + ".csv", out.history);
    save_checkpoint(cfg.out_dir + "/checkpoint" + tag + ".gatw", out.model);
  }

  MetricReport agg = aggregate_runs(
      defaults.task == Task::single_label ? "accuracy" : "micro_f1", per_run);
  const std::string report = metric_report_json(agg);
  std::ofstream(cfg.out_dir + "/results.json") << report << "\n";
  std::cout << report << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, int threads) {
  set_threads(threads);
  GatModel<float> model = load_checkpoint(checkpoint);
  GraphBundle b = load_bundle(data);
  if (b.features.cols != model.in_features())
    throw ConfigError("checkpoint expects " + std::to_string(model.in_features()) +
                      " input features, bundle has " + std::to_string(b.features.cols));
  RngState r0(0, 0);
  MatF logits = model_forward(model, b.features, b.graph, r0, Mode::eval, nullptr);
  // test mask when present, otherwise the whole graph (inductive evaluation)
  std::vector<uint8_t> mask = b.test_mask;
  if (count_mask(mask) == 0) mask.assign(b.num_nodes(), 1);
  MetricReport rep = model.task == Task::single_label
                         ? masked_accuracy(logits, b.labels, mask)
                         : micro_f1(logits, b.label_matrix, mask);
  std::cout << metric_report_json(rep) << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& preset, uint64_t seed, double step, double tol) {
  // scaled-down model with the preset's topology (heads, merge, skip,
  // attention kind); finite differences in 64-bit
  const PresetDefaults defaults = preset_defaults(preset);
  std::vector<GatLayerConfig> layers = preset_layers(preset, 10, 3);
  for (auto& l : layers) {
    l.head_features = std::min(l.head_features, 5u);
    l.input_dropout = 0.0f;
    l.attn_dropout = 0.0f;
  }
  for (size_t l = 1; l < layers.size(); ++l)
    layers[l].in_features = layers[l - 1].output_width();
  if (defaults.task == Task::multi_label) layers.back().head_features = 3;

  RngState rng(seed, 0);
  CsrGraph g = [&rng]() {
    std::vector<Edge> edges;
    for (uint32_t t = 0; t < 36; ++t)
      edges.emplace_back(uint32_t(rng.below(12)), uint32_t(rng.below(12)));
    return from_edge_list(12, edges, true, true);
  }();
  MatD h(12, 10);
  for (auto& v : h.data) v = 2.0 * rng.next_double() - 1.0;
  std::vector<uint32_t> labels(12);
  for (auto& l : labels) l = uint32_t(rng.below(3));
  std::vector<uint8_t> label_matrix(12 * 3, 0);
  for (uint32_t i = 0; i < 12; ++i) label_matrix[i * 3 + labels[i]] = 1;
  std::vector<uint8_t> mask(12, 1);

  RngState init(seed, 1);
  GatModel<double> model = GatModel<double>::init(defaults.task, layers, init);
  GradCheckReport report = model_gradcheck(model, h, g, labels, label_matrix, mask, Mode::eval,
                                           seed, 0.0, step, tol);

  std::cout << "gradcheck preset=" << preset << " step=" << step << " tol=" << tol << "\n";
  for (const auto& e : report.entries) {
    std::cout << "  " << e.tensor << ": max rel err " << e.max_rel_err << " over " << e.checked
              << " coords";
    if (e.max_rel_err == 0.0) std::cout << " (zero gradient)";
    std::cout << "\n";
  }
  std::cout << (report.pass ? "PASS" : "FAIL") << " max rel err " << report.max_rel_err << " ("
            << report.worst_tensor << ")\n";
  return report.pass ? 0 : 1;
}

int cmd_export_attention(const std::string& checkpoint, const std::string& data,
                         const std::string& out_path, uint32_t layer) {
  GatModel<float> model = load_checkpoint(checkpoint);
  GraphBundle b = load_bundle(data);
  if (layer >= model.num_layers())
    throw ConfigError("layer " + std::to_string(layer) + " out of range");
  RngState r0(0, 0);
  std::vector<LayerCache<float>> caches;
  model_forward(model, b.features, b.graph, r0, Mode::eval, &caches);
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot open '" + out_path + "' for writing");
  export_attention(out, b.graph, caches[layer]);
  std::cerr << "wrote " << model.configs[layer].num_heads * size_t(b.graph.num_edges())
            << " records to " << out_path << "\n";
  return 0;
}

int cmd_synth(const std::string& kind, uint32_t nodes, uint32_t features, uint32_t classes,
              double degree, double noise, uint64_t seed, uint32_t graphs,
              const std::string& out) {
  SyntheticSpec spec;
  if (kind == "neighbor-vote") spec.kind = SyntheticKind::neighbor_vote;
  else if (kind == "planted-classes") spec.kind = SyntheticKind::planted_classes;
  else throw ConfigError("unknown generator '" + kind + "'");
  spec.nodes = nodes;
  spec.features = features;
  spec.classes = classes;
  spec.avg_degree = degree;
  spec.noise = noise;

  for (uint32_t i = 0; i < graphs; ++i) {
    spec.seed = seed + i;
    GraphBundle b = generate_synthetic(spec);
    std::string path = out;
    if (graphs > 1) {
      const size_t dot = path.rfind(".gatb");
      path = (dot == std::string::npos ? path : path.substr(0, dot)) + "_" + std::to_string(i) +
             ".gatb";
    }
    save_bundle(path, b);
    std::cerr << "wrote " << path << " (N=" << b.num_nodes() << ", |E|=" << b.graph.num_edges()
              << ")\n";
  }
  return 0;
}

int cmd_import(const std::string& edges, const std::string& features, const std::string& labels,
               const std::string& masks, const std::string& out, bool directed,
               uint32_t num_nodes) {
  ImportOptions opt;
  opt.symmetrize = !directed;
  opt.num_nodes = num_nodes;
  GraphBundle b = import_text(edges, features, labels, masks, opt);
  save_bundle(out, b);
  std::cerr << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph attention network trainer"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a preset on a dataset per a JSON run config");
  std::string config_path, out_override, preset_override;
  uint32_t runs_override = 0;
  int64_t seed_override = -1;
  int threads_override = 0;
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--runs", runs_override, "override run count");
  train->add_option("--seed", seed_override, "override base seed");
  train->add_option("--out", out_override, "override output directory");
  train->add_option("--preset", preset_override, "override preset name");
  train->add_option("--threads", threads_override,
                    "OpenMP threads (results may differ from the single-thread run bitwise)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a bundle");
  std::string ckpt_path, data_path;
  int eval_threads = 1;
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_path, "bundle file")->required();
  eval->add_option("--threads", eval_threads, "OpenMP threads");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of analytic gradients");
  std::string gc_preset = "cora-citeseer";
  uint64_t gc_seed = 1;
  double gc_step = 1e-5, gc_tol = 1e-5;
  gc->add_option("--preset", gc_preset, "preset topology to check");
  gc->add_option("--seed", gc_seed, "seed");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--tol", gc_tol, "max relative error tolerance");

  // export-attention
  auto* exa = app.add_subcommand("export-attention", "write per-edge attention records");
  std::string exa_ckpt, exa_data, exa_out = "attention.tsv";
  uint32_t exa_layer = 0;
  exa->add_option("--checkpoint", exa_ckpt, "checkpoint file")->required();
  exa->add_option("--data", exa_data, "bundle file")->required();
  exa->add_option("--out", exa_out, "output path");
  exa->add_option("--layer", exa_layer, "layer index");

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic bundles");
  std::string sy_kind = "planted-classes", sy_out = "synthetic.gatb";
  uint32_t sy_nodes = 200, sy_features = 8, sy_classes = 4, sy_graphs = 1;
  double sy_degree = 8.0, sy_noise = 0.1;
  uint64_t sy_seed = 1;
  synth->add_option("--kind", sy_kind, "neighbor-vote | planted-classes");
  synth->add_option("--nodes", sy_nodes, "nodes per graph");
  synth->add_option("--features", sy_features, "feature width");
  synth->add_option("--classes", sy_classes, "classes");
  synth->add_option("--degree", sy_degree, "average degree");
  synth->add_option("--noise", sy_noise, "feature noise level");
  synth->add_option("--seed", sy_seed, "seed");
  synth->add_option("--graphs", sy_graphs, "number of graphs to emit");
  synth->add_option("--out", sy_out, "output path (.gatb)");

  // import
  auto* imp = app.add_subcommand("import", "convert text dumps into a bundle");
  std::string im_edges, im_features, im_labels, im_masks, im_out = "imported.gatb";
  bool im_directed = false;
  uint32_t im_nodes = 0;
  imp->add_option("--edges", im_edges, "edge list (src<TAB>dst per line)")->required();
  imp->add_option("--features", im_features, "feature rows")->required();
  imp->add_option("--labels", im_labels, "labels")->required();
  imp->add_option("--masks", im_masks, "three lines of ids: train, val, test")->required();
  imp->add_option("--out", im_out, "output path");
  imp->add_flag("--directed", im_directed, "keep edges directed (no symmetrization)");
  imp->add_option("--num-nodes", im_nodes, "override node count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(config_path, runs_override, seed_override, out_override, preset_override,
                       threads_override);
    if (eval->parsed()) return cmd_eval(ckpt_path, data_path, eval_threads);
    if (gc->parsed()) return cmd_gradcheck(gc_preset, gc_seed, gc_step, gc_tol);
    if (exa->parsed()) return cmd_export_attention(exa_ckpt, exa_data, exa_out, exa_layer);
    if (synth->parsed())
      return cmd_synth(sy_kind, sy_nodes, sy_features, sy_classes, sy_degree, sy_noise, sy_seed,
                       sy_graphs, sy_out);
    if (imp->parsed())
      return cmd_import(im_edges, im_features, im_labels, im_masks, im_out, im_directed, im_nodes);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
