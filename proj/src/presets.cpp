#include "gatnet/model.hpp"

namespace gatnet {

namespace {

GatLayerConfig hidden_layer(uint32_t in, uint32_t fp, uint32_t heads, float p_in, float p_att) {
  GatLayerConfig c;
  c.in_features = in;
  c.head_features = fp;
  c.num_heads = heads;
  c.merge = Merge::concat;
  c.activation = Activation::elu;
  c.input_dropout = p_in;
  c.attn_dropout = p_att;
  return c;
}

GatLayerConfig output_layer(uint32_t in, uint32_t classes, uint32_t heads, Merge merge,
                            Activation act, float p_in, float p_att) {
  GatLayerConfig c;
  c.in_features = in;
  c.head_features = classes;
  c.num_heads = heads;
  c.merge = merge;
  c.activation = act;
  c.input_dropout = p_in;
  c.attn_dropout = p_att;
  c.output_layer = true;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"cora-citeseer", "pubmed",        "ppi",       "const-ppi",  "mlp-baseline",
          "ppi-small",     "const-ppi-small", "synth",   "const-synth"};
}

bool is_known_preset(const std::string& name) {
  for (const auto& n : preset_names())
    if (n == name) return true;
  return false;
}

PresetDefaults preset_defaults(const std::string& name) {
  PresetDefaults d;
  if (name == "cora-citeseer" || name == "mlp-baseline") {
    d.lr = 0.005f;
    d.l2_lambda = 5e-4f;
  } else if (name == "pubmed") {
    d.lr = 0.01f;
    d.l2_lambda = 1e-3f;
  } else if (name == "ppi" || name == "const-ppi" || name == "ppi-small" ||
             name == "const-ppi-small") {
    d.task = Task::multi_label;
    d.inductive = true;
    d.lr = 0.005f;
    d.l2_lambda = 0.0f;
  } else if (name == "synth" || name == "const-synth") {
    d.lr = 0.01f;
    d.l2_lambda = 5e-4f;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  d.self_only = name == "mlp-baseline";
  return d;
}

std::vector<GatLayerConfig> preset_layers(const std::string& name, uint32_t in_features,
                                          uint32_t num_classes) {
  std::vector<GatLayerConfig> layers;
  if (name == "cora-citeseer" || name == "mlp-baseline") {
    // two layers: 8 heads x 8 features + ELU, then one softmax head; dropout
    // 0.6 on both layers' inputs and on the attention coefficients
    layers.push_back(hidden_layer(in_features, 8, 8, 0.6f, 0.6f));
    layers.push_back(output_layer(64, num_classes, 1, Merge::concat,
                                  Activation::softmax_deferred, 0.6f, 0.6f));
  } else if (name == "pubmed") {
    // as above with 8 averaged output heads
    layers.push_back(hidden_layer(in_features, 8, 8, 0.6f, 0.6f));
    layers.push_back(output_layer(64, num_classes, 8, Merge::average,
                                  Activation::softmax_deferred, 0.6f, 0.6f));
  } else if (name == "ppi" || name == "const-ppi" || name == "ppi-small" ||
             name == "const-ppi-small") {
    const uint32_t fp = (name == "ppi" || name == "const-ppi") ? 256 : 64;
    layers.push_back(hidden_layer(in_features, fp, 4, 0.0f, 0.0f));
    GatLayerConfig mid = hidden_layer(4 * fp, fp, 4, 0.0f, 0.0f);
    mid.skip = SkipKind::identity;  // residual across the intermediate layer
    layers.push_back(mid);
    layers.push_back(output_layer(4 * fp, num_classes, 6, Merge::average,
                                  Activation::sigmoid_deferred, 0.0f, 0.0f));
    if (name == "const-ppi" || name == "const-ppi-small")
      for (auto& l : layers) l.attention = AttentionKind::constant;
  } else if (name == "synth" || name == "const-synth") {
    layers.push_back(hidden_layer(in_features, 8, 4, 0.2f, 0.2f));
    layers.push_back(output_layer(32, num_classes, 1, Merge::concat,
                                  Activation::softmax_deferred, 0.2f, 0.2f));
    if (name == "const-synth")
      for (auto& l : layers) l.attention = AttentionKind::constant;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return layers;
}

}  // namespace gatnet
