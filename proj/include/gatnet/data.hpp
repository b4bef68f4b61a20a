#pragma once

#include <string>
#include <vector>

#include "gatnet/graph.hpp"

namespace gatnet {

// Versioned binary bundle container (magic "GATB", little-endian throughout):
// header, CSR arrays as u32, features as f32 row-major, labels as u32 class
// ids or N*C bytes, then three mask bitsets. save/load round-trips bitwise.
void save_bundle(const std::string& path, const GraphBundle& bundle);
GraphBundle load_bundle(const std::string& path);

// Text edge list: one `src<TAB>dst` pair per line, 0-based decimal ids,
// `#` starts a comment line. Returns edges and the max id seen.
std::vector<Edge> read_edge_list(const std::string& path, uint32_t* max_id = nullptr);

struct ImportOptions {
  bool symmetrize = true;   // citation graphs: edges are undirected
  uint32_t num_nodes = 0;   // 0 = infer from files
};

// Bridge from text dumps:
//   edges:    src<TAB>dst per line (# comments)
//   features: one node per line, F space-separated decimal floats
//   labels:   one node per line; a single class id, or C space-separated 0/1
//             entries for multi-label data
//   masks:    three lines of space-separated node ids: train, val, test
GraphBundle import_text(const std::string& edges_path, const std::string& features_path,
                        const std::string& labels_path, const std::string& masks_path,
                        const ImportOptions& opt = {});

enum class SyntheticKind { neighbor_vote, planted_classes };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::planted_classes;
  uint32_t nodes = 200;
  uint32_t features = 8;
  uint32_t classes = 4;
  double avg_degree = 8.0;
  double noise = 0.1;
  uint64_t seed = 1;

  void validate() const;
};

// neighbor-vote: every node's label is carried by the features of exactly one
// designated (flagged) neighbor; the rest of the neighborhood is decoy
// payload. Uniform aggregation mixes the decoys in, attention can single out
// the carrier. planted-classes: community graph with class-correlated
// features. Both are deterministic in the spec seed.
GraphBundle generate_synthetic(const SyntheticSpec& spec);

}  // namespace gatnet
