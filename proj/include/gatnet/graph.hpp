#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gatnet/matrix.hpp"

namespace gatnet {

// Immutable sparse adjacency in CSR form. Row i lists the nodes j whose
// messages reach i (the neighborhood N_i); within each row the indices are
// strictly increasing and deduplicated. Construction also builds the reverse
// adjacency, annotated with forward edge ids, so backward passes can gather
// per-source contributions deterministically instead of scattering.
struct CsrGraph {
  uint32_t num_nodes = 0;
  std::vector<uint32_t> row_offsets{0};
  std::vector<uint32_t> col_indices;

  // Reverse adjacency: for node j, the destinations i with j in N_i plus the
  // index of the forward edge (i <- j) in col_indices order.
  std::vector<uint32_t> in_offsets{0};
  std::vector<uint32_t> in_dst;
  std::vector<uint32_t> in_edge;

  uint32_t num_edges() const { return uint32_t(col_indices.size()); }
  uint32_t degree(uint32_t i) const { return row_offsets[i + 1] - row_offsets[i]; }
  std::span<const uint32_t> neighbors(uint32_t i) const {
    return {col_indices.data() + row_offsets[i], size_t(degree(i))};
  }

  bool has_self_loops() const;
  void validate() const;    // throws ValidationError on broken invariants
  void build_reverse();
};

using Edge = std::pair<uint32_t, uint32_t>;  // (src, dst): src joins N_dst

CsrGraph from_edge_list(uint32_t num_nodes, const std::vector<Edge>& edges,
                        bool symmetrize, bool add_self_loops);

// Graph whose only edges are self-loops; N_i = {i} for every node.
CsrGraph self_only_graph(uint32_t num_nodes);

// Re-extract the edge set (src, dst) in CSR order.
std::vector<Edge> to_edge_list(const CsrGraph& g);

// One graph plus everything needed to train on it.
struct GraphBundle {
  CsrGraph graph;
  MatF features;                      // N x F
  std::vector<uint32_t> labels;       // single-label: N class ids
  std::vector<uint8_t> label_matrix;  // multi-label: N*C with 0/1 entries
  bool multilabel = false;
  uint32_t num_classes = 0;
  std::vector<uint8_t> train_mask, val_mask, test_mask;  // N entries, 0/1
  bool directed = false;
  uint32_t raw_edge_count = 0;        // edge count of the source file, pre-processing

  uint32_t num_nodes() const { return graph.num_nodes; }
  void validate() const;
};

// Disjoint union of several bundles; node ids are offset per constituent.
struct MultiGraphBatch {
  GraphBundle bundle;
  std::vector<uint32_t> boundaries;  // size parts+1: node offset of each graph, then total
};

MultiGraphBatch disjoint_union(const std::vector<const GraphBundle*>& parts);

inline uint32_t count_mask(const std::vector<uint8_t>& mask) {
  uint32_t n = 0;
  for (uint8_t b : mask) n += b ? 1 : 0;
  return n;
}

}  // namespace gatnet
