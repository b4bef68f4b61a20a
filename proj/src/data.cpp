#include "gatnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "binio.hpp"
#include "gatnet/rng.hpp"

namespace gatnet {

namespace {
constexpr char kMagic[4] = {'G', 'A', 'T', 'B'};
constexpr uint32_t kVersion = 1;

std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& mask) {
  std::vector<uint8_t> out((mask.size() + 7) / 8, 0);
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[i / 8] |= uint8_t(1u << (i % 8));
  return out;
}

std::vector<uint8_t> unpack_bits(const std::vector<uint8_t>& bytes, size_t n) {
  std::vector<uint8_t> out(n, 0);
  for (size_t i = 0; i < n; ++i)
    out[i] = (bytes[i / 8] >> (i % 8)) & 1u;
  return out;
}
}  // namespace

void save_bundle(const std::string& path, const GraphBundle& bundle) {
  bundle.validate();
  const uint32_t n = bundle.num_nodes();
  binio::Writer w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  uint32_t flags = 0;
  if (bundle.directed) flags |= 1u;
  if (bundle.multilabel) flags |= 2u;
  w.u32(flags);
  w.u32(n);
  w.u32(bundle.raw_edge_count);
  w.u32(bundle.features.cols);
  w.u32(bundle.num_classes);
  w.u32(bundle.graph.num_edges());
  w.u32_array(bundle.graph.row_offsets.data(), bundle.graph.row_offsets.size());
  w.u32_array(bundle.graph.col_indices.data(), bundle.graph.col_indices.size());
  w.f32_array(bundle.features.data.data(), bundle.features.size());
  if (bundle.multilabel)
    w.bytes(bundle.label_matrix.data(), bundle.label_matrix.size());
  else
    w.u32_array(bundle.labels.data(), bundle.labels.size());
  for (const auto* m : {&bundle.train_mask, &bundle.val_mask, &bundle.test_mask}) {
    std::vector<uint8_t> packed = pack_bits(*m);
    w.bytes(packed.data(), packed.size());
  }
  w.close();
}

GraphBundle load_bundle(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic(kMagic, "bundle");
  const uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError("unsupported bundle version " + std::to_string(version), r.offset - 4);
  const uint32_t flags = r.u32("flags");
  if (flags & ~3u) throw FormatError("unknown flag bits", r.offset - 4);

  GraphBundle b;
  b.directed = flags & 1u;
  b.multilabel = flags & 2u;
  const uint32_t n = r.u32("node count");
  b.raw_edge_count = r.u32("raw edge count");
  const uint32_t f = r.u32("feature count");
  b.num_classes = r.u32("class count");
  const uint32_t e = r.u32("edge count");
  if (n == 0) throw FormatError("empty graph", r.offset);

  b.graph.num_nodes = n;
  b.graph.row_offsets.resize(size_t(n) + 1);
  r.u32_array(b.graph.row_offsets.data(), b.graph.row_offsets.size(), "row offsets");
  b.graph.col_indices.resize(e);
  r.u32_array(b.graph.col_indices.data(), e, "column indices");
  b.features = MatF(n, f);
  r.f32_array(b.features.data.data(), b.features.size(), "features");
  if (b.multilabel) {
    b.label_matrix.resize(size_t(n) * b.num_classes);
    r.bytes(b.label_matrix.data(), b.label_matrix.size(), "label matrix");
  } else {
    b.labels.resize(n);
    r.u32_array(b.labels.data(), n, "labels");
  }
  const size_t mask_bytes = (size_t(n) + 7) / 8;
  for (auto* m : {&b.train_mask, &b.val_mask, &b.test_mask}) {
    std::vector<uint8_t> packed(mask_bytes);
    r.bytes(packed.data(), packed.size(), "mask bitset");
    *m = unpack_bits(packed, n);
  }
  r.expect_end();
  try {
    b.graph.build_reverse();
    b.validate();
  } catch (const std::runtime_error& err) {
    throw FormatError(std::string("bundle fails validation: ") + err.what(), r.offset);
  }
  std::cerr << "loaded " << path << ": N=" << n << " F=" << f << " C=" << b.num_classes
            << " raw edges=" << b.raw_edge_count << " processed edges=" << e
            << " (with self-loops, " << (b.directed ? "directed" : "symmetrized") << ")\n";
  return b;
}

std::vector<Edge> read_edge_list(const std::string& path, uint32_t* max_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list '" + path + "'");
  std::vector<Edge> edges;
  uint32_t mx = 0;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    uint32_t s = 0, d = 0;
    const char* begin = line.data() + start;
    const char* end = line.data() + line.size();
    auto res = std::from_chars(begin, end, s);
    if (res.ec != std::errc{})
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed source id");
    const char* p = res.ptr;
    while (p < end && (*p == '\t' || *p == ' ')) ++p;
    res = std::from_chars(p, end, d);
    if (res.ec != std::errc{})
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed destination id");
    edges.emplace_back(s, d);
    mx = std::max({mx, s, d});
  }
  if (max_id) *max_id = mx;
  return edges;
}

namespace {

MatF read_feature_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open features '" + path + "'");
  std::vector<std::vector<float>> rows;
  std::string line;
  size_t lineno = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<float> row;
    row.reserve(width);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p >= end) break;
      float v;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{})
        throw DataError(path + ":" + std::to_string(lineno) + ": malformed float");
      row.push_back(v);
      p = res.ptr;
    }
    if (row.empty()) continue;
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(width) + " values, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no feature rows");
  MatF m(uint32_t(rows.size()), uint32_t(width));
  for (uint32_t i = 0; i < m.rows; ++i)
    std::copy(rows[i].begin(), rows[i].end(), m.row(i));
  return m;
}

void read_labels(const std::string& path, uint32_t n, std::vector<uint32_t>& single,
                 std::vector<uint8_t>& multi, bool& multilabel, uint32_t& num_classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels '" + path + "'");
  std::vector<std::vector<uint32_t>> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<uint32_t> row;
    std::istringstream ss(line);
    int64_t v;
    while (ss >> v) {
      if (v < 0) throw DataError(path + ":" + std::to_string(lineno) + ": negative label");
      row.push_back(uint32_t(v));
    }
    if (!ss.eof()) throw DataError(path + ":" + std::to_string(lineno) + ": malformed label");
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.size() != n)
    throw DataError(path + ": " + std::to_string(rows.size()) + " label rows for " +
                    std::to_string(n) + " nodes");
  multilabel = rows[0].size() > 1;
  if (multilabel) {
    num_classes = uint32_t(rows[0].size());
    multi.assign(size_t(n) * num_classes, 0);
    for (uint32_t i = 0; i < n; ++i) {
      if (rows[i].size() != num_classes)
        throw DataError(path + ": inconsistent label width at row " + std::to_string(i + 1));
      for (uint32_t c = 0; c < num_classes; ++c) {
        if (rows[i][c] > 1)
          throw DataError(path + ": non-binary entry in multi-label row " + std::to_string(i + 1));
        multi[size_t(i) * num_classes + c] = uint8_t(rows[i][c]);
      }
    }
  } else {
    single.resize(n);
    uint32_t mx = 0;
    for (uint32_t i = 0; i < n; ++i) {
      single[i] = rows[i][0];
      mx = std::max(mx, rows[i][0]);
    }
    num_classes = mx + 1;
  }
}

void read_masks(const std::string& path, uint32_t n, std::vector<uint8_t>& train,
                std::vector<uint8_t>& val, std::vector<uint8_t>& test) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open masks '" + path + "'");
  std::vector<std::vector<uint8_t>*> out = {&train, &val, &test};
  const char* names[3] = {"train", "val", "test"};
  std::string line;
  size_t got = 0, lineno = 0;
  while (std::getline(in, line) && got < 3) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    out[got]->assign(n, 0);
    std::istringstream ss(line);
    int64_t id;
    while (ss >> id) {
      if (id < 0 || uint64_t(id) >= n)
        throw DataError(path + ":" + std::to_string(lineno) + ": " + names[got] +
                        " id out of range: " + std::to_string(id));
      (*out[got])[size_t(id)] = 1;
    }
    if (!ss.eof()) throw DataError(path + ":" + std::to_string(lineno) + ": malformed id");
    ++got;
  }
  if (got != 3)
    throw DataError(path + ": expected 3 id lines (train, val, test), got " + std::to_string(got));
}

}  // namespace

GraphBundle import_text(const std::string& edges_path, const std::string& features_path,
                        const std::string& labels_path, const std::string& masks_path,
                        const ImportOptions& opt) {
  uint32_t max_id = 0;
  std::vector<Edge> edges = read_edge_list(edges_path, &max_id);

  GraphBundle b;
  b.features = read_feature_rows(features_path);
  uint32_t n = opt.num_nodes ? opt.num_nodes : b.features.rows;
  if (b.features.rows != n)
    throw DataError(features_path + ": " + std::to_string(b.features.rows) + " rows for " +
                    std::to_string(n) + " nodes");
  if (!edges.empty() && max_id >= n)
    throw DataError(edges_path + ": node id " + std::to_string(max_id) + " exceeds node count " +
                    std::to_string(n));

  b.raw_edge_count = uint32_t(edges.size());
  b.directed = !opt.symmetrize;
  b.graph = from_edge_list(n, edges, opt.symmetrize, /*add_self_loops=*/true);
  read_labels(labels_path, n, b.labels, b.label_matrix, b.multilabel, b.num_classes);
  read_masks(masks_path, n, b.train_mask, b.val_mask, b.test_mask);
  b.validate();
  std::cerr << "imported " << edges_path << ": N=" << n << " F=" << b.features.cols
            << " C=" << b.num_classes << " raw edges=" << b.raw_edge_count
            << " processed edges=" << b.graph.num_edges() << " (with self-loops, "
            << (b.directed ? "directed" : "symmetrized") << ")\n";
  return b;
}

void SyntheticSpec::validate() const {
  if (nodes < classes) throw ValidationError("synthetic: need at least one node per class");
  if (classes < 2) throw ValidationError("synthetic: need >= 2 classes");
  if (avg_degree < 1.0) throw ValidationError("synthetic: avg_degree must be >= 1");
  if (kind == SyntheticKind::neighbor_vote && features < classes + 1)
    throw ValidationError("synthetic: neighbor-vote needs features >= classes + 1");
  if (kind == SyntheticKind::planted_classes && features < classes)
    throw ValidationError("synthetic: planted-classes needs features >= classes");
}

namespace {

void random_split_masks(GraphBundle& b, RngState rng) {
  const uint32_t n = b.num_nodes();
  std::vector<uint32_t> ids(n);
  for (uint32_t i = 0; i < n; ++i) ids[i] = i;
  rng.shuffle(ids);
  b.train_mask.assign(n, 0);
  b.val_mask.assign(n, 0);
  b.test_mask.assign(n, 0);
  const uint32_t n_train = n / 2, n_val = n / 4;
  for (uint32_t i = 0; i < n; ++i) {
    if (i < n_train) b.train_mask[ids[i]] = 1;
    else if (i < n_train + n_val) b.val_mask[ids[i]] = 1;
    else b.test_mask[ids[i]] = 1;
  }
}

GraphBundle make_neighbor_vote(const SyntheticSpec& spec) {
  const uint32_t n = spec.nodes, C = spec.classes, F = spec.features;
  RngState rng(spec.seed, 0x5e1);

  // ~30% carriers, classes assigned round-robin for exact balance
  const uint32_t num_carriers = std::max(C, uint32_t(n * 0.3));
  std::vector<uint32_t> perm(n);
  for (uint32_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<uint8_t> is_carrier(n, 0);
  std::vector<uint32_t> carriers(perm.begin(), perm.begin() + num_carriers);
  std::vector<uint32_t> payload(n);
  for (uint32_t r = 0; r < num_carriers; ++r) {
    is_carrier[carriers[r]] = 1;
    payload[carriers[r]] = r % C;
  }
  for (uint32_t i = 0; i < n; ++i)
    if (!is_carrier[i]) payload[i] = uint32_t(rng.below(C));  // decoy payload

  // each node reads its label from one designated carrier; carriers read
  // their own payload (the self-loop supplies that edge)
  std::vector<uint32_t> labels(n);
  std::vector<Edge> edges;
  const uint32_t extra = uint32_t(std::max(0.0, spec.avg_degree - 1.0));
  uint32_t next_carrier = 0;
  for (uint32_t i = 0; i < n; ++i) {
    if (is_carrier[i]) {
      labels[i] = payload[i];
    } else {
      // cycle through carriers so label classes stay balanced
      uint32_t c = carriers[next_carrier++ % num_carriers];
      edges.emplace_back(c, i);  // carrier joins N_i
      labels[i] = payload[c];
    }
    for (uint32_t t = 0; t < extra; ++t) {
      uint32_t j = uint32_t(rng.below(n));
      while (j == i || is_carrier[j]) j = uint32_t(rng.below(n));
      edges.emplace_back(j, i);  // decoy neighbor
    }
  }

  GraphBundle b;
  b.raw_edge_count = uint32_t(edges.size());
  b.directed = true;
  b.graph = from_edge_list(n, edges, /*symmetrize=*/false, /*add_self_loops=*/true);
  b.labels = std::move(labels);
  b.num_classes = C;
  b.features = MatF(n, F);
  for (uint32_t i = 0; i < n; ++i) {
    float* row = b.features.row(i);
    row[payload[i]] = 1.0f;                    // payload one-hot (decoy or real)
    row[C] = is_carrier[i] ? 1.0f : 0.0f;      // carrier flag
    if (spec.noise > 0.0)
      for (uint32_t f = 0; f < F; ++f) row[f] += float(spec.noise * rng.normal());
  }
  random_split_masks(b, rng.substream(0x3a5));
  b.validate();
  return b;
}

GraphBundle make_planted_classes(const SyntheticSpec& spec) {
  const uint32_t n = spec.nodes, C = spec.classes, F = spec.features;
  RngState rng(spec.seed, 0x91a);

  std::vector<uint32_t> labels(n);
  for (uint32_t i = 0; i < n; ++i) labels[i] = i % C;  // exact balance
  rng.shuffle(labels);

  std::vector<std::vector<uint32_t>> by_class(C);
  for (uint32_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

  const double p_same = 0.7;
  std::vector<Edge> edges;
  const uint32_t degree = uint32_t(std::max(1.0, spec.avg_degree / 2.0));  // symmetrized later
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t t = 0; t < degree; ++t) {
      uint32_t j;
      if (rng.next_double() < p_same) {
        const auto& pool = by_class[labels[i]];
        j = pool[rng.below(pool.size())];
      } else {
        j = uint32_t(rng.below(n));
      }
      if (j != i) edges.emplace_back(i, j);
    }
  }

  GraphBundle b;
  b.raw_edge_count = uint32_t(edges.size());
  b.directed = false;
  b.graph = from_edge_list(n, edges, /*symmetrize=*/true, /*add_self_loops=*/true);
  b.labels = std::move(labels);
  b.num_classes = C;
  b.features = MatF(n, F);
  for (uint32_t i = 0; i < n; ++i) {
    float* row = b.features.row(i);
    row[b.labels[i]] = 1.0f;
    for (uint32_t f = 0; f < F; ++f) row[f] += float(spec.noise * rng.normal());
  }
  random_split_masks(b, rng.substream(0x3a5));
  b.validate();
  return b;
}

}  // namespace

GraphBundle generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  return spec.kind == SyntheticKind::neighbor_vote ? make_neighbor_vote(spec)
                                                   : make_planted_classes(spec);
}

}  // namespace gatnet
