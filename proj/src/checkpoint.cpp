#include "gatnet/model.hpp"

#include "binio.hpp"

// Checkpoint container: magic "GATW", version, layer count, then per layer a
// fixed config record followed by the parameter tensors as little-endian
// 32-bit floats in declaration order (per head W, a_src, a_dst, bias; then
// the skip projection). Round-trips bit-exactly.
namespace gatnet {

namespace {
constexpr char kMagic[4] = {'G', 'A', 'T', 'W'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const GatModel<float>& model) {
  model.validate();
  binio::Writer w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(uint32_t(model.num_layers()));
  w.u8(uint8_t(model.task));
  for (size_t l = 0; l < model.num_layers(); ++l) {
    const GatLayerConfig& c = model.configs[l];
    w.u32(c.in_features);
    w.u32(c.head_features);
    w.u32(c.num_heads);
    w.u8(uint8_t(c.merge));
    w.u8(uint8_t(c.attention));
    w.u8(uint8_t(c.activation));
    w.u8(uint8_t(c.skip));
    w.u8(c.use_bias ? 1 : 0);
    w.u8(c.output_layer ? 1 : 0);
    w.f32(c.leaky_slope);
    w.f32(c.input_dropout);
    w.f32(c.attn_dropout);
    model.params[l].for_each([&](const std::string&, const Matrix<float>& m) {
      w.f32_array(m.data.data(), m.size());
    });
  }
  w.close();
}

GatModel<float> load_checkpoint(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic(kMagic, "checkpoint");
  const uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), r.offset - 4);
  const uint32_t layers = r.u32("layer count");
  if (layers == 0 || layers > 1024)
    throw FormatError("implausible layer count " + std::to_string(layers), r.offset - 4);
  const uint8_t task = r.u8("task");
  if (task > 1) throw FormatError("bad task id", r.offset - 1);

  GatModel<float> model;
  model.task = Task(task);
  for (uint32_t l = 0; l < layers; ++l) {
    GatLayerConfig c;
    c.in_features = r.u32("in_features");
    c.head_features = r.u32("head_features");
    c.num_heads = r.u32("num_heads");
    const uint8_t merge = r.u8("merge");
    const uint8_t attention = r.u8("attention");
    const uint8_t activation = r.u8("activation");
    const uint8_t skip = r.u8("skip");
    if (merge > 1 || attention > 1 || activation > 3 || skip > 2)
      throw FormatError("bad enum value in layer config", r.offset - 1);
    c.merge = Merge(merge);
    c.attention = AttentionKind(attention);
    c.activation = Activation(activation);
    c.skip = SkipKind(skip);
    c.use_bias = r.u8("use_bias") != 0;
    c.output_layer = r.u8("output_layer") != 0;
    c.leaky_slope = r.f32("leaky_slope");
    c.input_dropout = r.f32("input_dropout");
    c.attn_dropout = r.f32("attn_dropout");
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw FormatError(std::string("invalid layer config: ") + e.what(), r.offset);
    }
    GatLayerParams<float> p = GatLayerParams<float>::zeros_like(c);
    p.for_each([&](const std::string& name, Matrix<float>& m) {
      r.f32_array(m.data.data(), m.size(), name.c_str());
    });
    model.configs.push_back(c);
    model.params.push_back(std::move(p));
  }
  r.expect_end();
  model.validate();
  return model;
}

}  // namespace gatnet
