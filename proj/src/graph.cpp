#include "gatnet/graph.hpp"

#include <algorithm>
#include <numeric>

#include "gatnet/errors.hpp"

namespace gatnet {

bool CsrGraph::has_self_loops() const {
  for (uint32_t i = 0; i < num_nodes; ++i) {
    bool found = false;
    for (uint32_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e)
      if (col_indices[e] == i) { found = true; break; }
    if (!found) return false;
  }
  return true;
}

void CsrGraph::validate() const {
  if (row_offsets.size() != size_t(num_nodes) + 1)
    throw ValidationError("csr: row_offsets size mismatch");
  if (row_offsets.front() != 0)
    throw ValidationError("csr: row_offsets[0] != 0");
  if (row_offsets.back() != col_indices.size())
    throw ValidationError("csr: row_offsets[N] != |E|");
  for (uint32_t i = 0; i < num_nodes; ++i) {
    if (row_offsets[i + 1] < row_offsets[i])
      throw ValidationError("csr: row_offsets not nondecreasing at row " + std::to_string(i));
    for (uint32_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
      if (col_indices[e] >= num_nodes)
        throw ValidationError("csr: column index out of range at row " + std::to_string(i));
      if (e > row_offsets[i] && col_indices[e] <= col_indices[e - 1])
        throw ValidationError("csr: row " + std::to_string(i) + " not strictly increasing");
    }
  }
}

void CsrGraph::build_reverse() {
  const uint32_t E = num_edges();
  std::vector<uint32_t> counts(num_nodes, 0);
  for (uint32_t e = 0; e < E; ++e) counts[col_indices[e]]++;
  in_offsets.assign(num_nodes + 1, 0);
  for (uint32_t j = 0; j < num_nodes; ++j) in_offsets[j + 1] = in_offsets[j] + counts[j];
  in_dst.resize(E);
  in_edge.resize(E);
  std::vector<uint32_t> cursor(in_offsets.begin(), in_offsets.end() - 1);
  for (uint32_t i = 0; i < num_nodes; ++i) {
    for (uint32_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
      uint32_t j = col_indices[e];
      in_dst[cursor[j]] = i;
      in_edge[cursor[j]] = e;
      cursor[j]++;
    }
  }
}

CsrGraph from_edge_list(uint32_t num_nodes, const std::vector<Edge>& edges,
                        bool symmetrize, bool add_self_loops) {
  for (const auto& [s, d] : edges)
    if (s >= num_nodes || d >= num_nodes)
      throw ValidationError("edge endpoint (" + std::to_string(s) + "," + std::to_string(d) +
                            ") out of range for " + std::to_string(num_nodes) + " nodes");

  std::vector<std::vector<uint32_t>> rows(num_nodes);
  for (const auto& [s, d] : edges) {
    rows[d].push_back(s);
    if (symmetrize) rows[s].push_back(d);
  }
  if (add_self_loops)
    for (uint32_t i = 0; i < num_nodes; ++i) rows[i].push_back(i);

  CsrGraph g;
  g.num_nodes = num_nodes;
  g.row_offsets.assign(num_nodes + 1, 0);
  size_t total = 0;
  for (uint32_t i = 0; i < num_nodes; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    total += r.size();
    g.row_offsets[i + 1] = uint32_t(total);
  }
  g.col_indices.reserve(total);
  for (auto& r : rows) g.col_indices.insert(g.col_indices.end(), r.begin(), r.end());
  g.build_reverse();
  return g;
}

CsrGraph self_only_graph(uint32_t num_nodes) {
  return from_edge_list(num_nodes, {}, false, true);
}

std::vector<Edge> to_edge_list(const CsrGraph& g) {
  std::vector<Edge> out;
  out.reserve(g.num_edges());
  for (uint32_t i = 0; i < g.num_nodes; ++i)
    for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
      out.emplace_back(g.col_indices[e], i);
  return out;
}

void GraphBundle::validate() const {
  graph.validate();
  const uint32_t n = graph.num_nodes;
  if (features.rows != n)
    throw ValidationError("bundle: features rows " + std::to_string(features.rows) +
                          " != nodes " + std::to_string(n));
  if (num_classes == 0) throw ValidationError("bundle: num_classes == 0");
  if (multilabel) {
    if (label_matrix.size() != size_t(n) * num_classes)
      throw ValidationError("bundle: label matrix size mismatch");
    for (uint8_t v : label_matrix)
      if (v > 1) throw DataError("bundle: non-binary entry in label matrix");
  } else {
    if (labels.size() != n) throw ValidationError("bundle: labels size mismatch");
    for (uint32_t c : labels)
      if (c >= num_classes)
        throw DataError("bundle: label id " + std::to_string(c) + " >= classes " +
                        std::to_string(num_classes));
  }
  if (train_mask.size() != n || val_mask.size() != n || test_mask.size() != n)
    throw ValidationError("bundle: mask size mismatch");
  for (uint32_t i = 0; i < n; ++i)
    if (int(train_mask[i] != 0) + int(val_mask[i] != 0) + int(test_mask[i] != 0) > 1)
      throw ValidationError("bundle: masks overlap at node " + std::to_string(i));
}

MultiGraphBatch disjoint_union(const std::vector<const GraphBundle*>& parts) {
  if (parts.empty()) throw ValidationError("disjoint_union: no bundles");
  const GraphBundle& first = *parts[0];
  for (const GraphBundle* p : parts) {
    if (p->features.cols != first.features.cols)
      throw ShapeError("disjoint_union: feature width mismatch");
    if (p->multilabel != first.multilabel || p->num_classes != first.num_classes)
      throw ShapeError("disjoint_union: label arity mismatch");
  }

  MultiGraphBatch batch;
  GraphBundle& u = batch.bundle;
  u.multilabel = first.multilabel;
  u.num_classes = first.num_classes;
  u.directed = first.directed;

  uint32_t total_nodes = 0;
  size_t total_edges = 0;
  batch.boundaries.push_back(0);
  for (const GraphBundle* p : parts) {
    total_nodes += p->num_nodes();
    total_edges += p->graph.num_edges();
    batch.boundaries.push_back(total_nodes);
    u.raw_edge_count += p->raw_edge_count;
  }

  u.graph.num_nodes = total_nodes;
  u.graph.row_offsets.assign(size_t(total_nodes) + 1, 0);
  u.graph.col_indices.reserve(total_edges);
  u.features = MatF(total_nodes, first.features.cols);
  if (u.multilabel)
    u.label_matrix.reserve(size_t(total_nodes) * u.num_classes);
  else
    u.labels.reserve(total_nodes);

  uint32_t offset = 0;
  for (const GraphBundle* p : parts) {
    const CsrGraph& g = p->graph;
    for (uint32_t i = 0; i < g.num_nodes; ++i) {
      for (uint32_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
        u.graph.col_indices.push_back(g.col_indices[e] + offset);
      u.graph.row_offsets[offset + i + 1] = uint32_t(u.graph.col_indices.size());
    }
    std::copy(p->features.data.begin(), p->features.data.end(),
              u.features.data.begin() + size_t(offset) * u.features.cols);
    if (u.multilabel)
      u.label_matrix.insert(u.label_matrix.end(), p->label_matrix.begin(), p->label_matrix.end());
    else
      u.labels.insert(u.labels.end(), p->labels.begin(), p->labels.end());
    u.train_mask.insert(u.train_mask.end(), p->train_mask.begin(), p->train_mask.end());
    u.val_mask.insert(u.val_mask.end(), p->val_mask.begin(), p->val_mask.end());
    u.test_mask.insert(u.test_mask.end(), p->test_mask.begin(), p->test_mask.end());
    offset += g.num_nodes;
  }
  u.graph.build_reverse();
  return batch;
}

}  // namespace gatnet
