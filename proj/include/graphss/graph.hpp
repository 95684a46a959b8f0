#pragma once
// Graph data model and basic graph machinery: CSR adjacency (symmetric,
// binary, no self-loops), dense feature matrix, optional latent labels used
// for evaluation only; symmetric degree normalization; stochastic-block-model
// generator; train/val/test partitioning.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphss/error.hpp"
#include "graphss/rng.hpp"

namespace graphss {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Graph {
  int num_nodes = 0;
  int num_classes = 0;
  std::vector<int> adj_offsets;    // size num_nodes + 1
  std::vector<int> adj_targets;    // sorted per row; both directions stored
  Mat features;                    // num_nodes x num_features
  std::vector<int> latent_labels;  // empty when unknown; entries in [0, K)

  int num_features() const { return static_cast<int>(features.cols()); }
  int degree(int v) const { return adj_offsets[v + 1] - adj_offsets[v]; }
  std::span<const int> neighbors(int v) const {
    return {adj_targets.data() + adj_offsets[v],
            static_cast<std::size_t>(degree(v))};
  }
  bool has_edge(int u, int v) const {
    const auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }
  std::int64_t num_directed_edges() const {
    return static_cast<std::int64_t>(adj_targets.size());
  }
};

// Builds a Graph from an undirected edge list (each edge given once or both
// ways; duplicates collapse). Validates the type invariants.
inline Graph build_graph(int num_nodes, int num_classes,
                         const std::vector<std::pair<int, int>>& edges,
                         Mat features, std::vector<int> latent_labels = {}) {
  if (num_nodes <= 0) throw ValidationError("graph: num_nodes must be positive");
  if (num_classes <= 0) throw ValidationError("graph: num_classes must be positive");
  if (features.rows() != num_nodes)
    throw ValidationError("graph: feature matrix has " +
                          std::to_string(features.rows()) + " rows, expected " +
                          std::to_string(num_nodes));
  if (!features.allFinite())
    throw ValidationError("graph: features contain non-finite values");
  if (!latent_labels.empty()) {
    if (static_cast<int>(latent_labels.size()) != num_nodes)
      throw ValidationError("graph: latent label vector length mismatch");
    for (int z : latent_labels)
      if (z < 0 || z >= num_classes)
        throw ValidationError("graph: latent label out of range [0, K)");
  }

  std::vector<std::vector<int>> adj(num_nodes);
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw ValidationError("graph: edge endpoint out of range");
    if (u == v) throw ValidationError("graph: self-loop not permitted");
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  Graph g;
  g.num_nodes = num_nodes;
  g.num_classes = num_classes;
  g.features = std::move(features);
  g.latent_labels = std::move(latent_labels);
  g.adj_offsets.assign(num_nodes + 1, 0);
  for (int v = 0; v < num_nodes; ++v) {
    auto& row = adj[v];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.adj_offsets[v + 1] = g.adj_offsets[v] + static_cast<int>(row.size());
  }
  g.adj_targets.reserve(g.adj_offsets.back());
  for (const auto& row : adj)
    g.adj_targets.insert(g.adj_targets.end(), row.begin(), row.end());
  return g;
}

struct NormalizedAdjacency {
  SpMat matrix;  // D^{-1/2} (A + I) D^{-1/2} with D the self-loop-augmented degrees
};

// Entry (i,j) is 1/sqrt((deg(i)+1)(deg(j)+1)) for j adjacent to i or j == i.
// Symmetric by construction; every entry in (0, 1].
inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
  const int n = g.num_nodes;
  std::vector<double> inv_sqrt(n);
  for (int v = 0; v < n; ++v)
    inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(g.num_directed_edges()) + n);
  for (int v = 0; v < n; ++v) {
    trips.emplace_back(v, v, inv_sqrt[v] * inv_sqrt[v]);
    for (int u : g.neighbors(v)) trips.emplace_back(v, u, inv_sqrt[v] * inv_sqrt[u]);
  }
  NormalizedAdjacency norm;
  norm.matrix.resize(n, n);
  norm.matrix.setFromTriplets(trips.begin(), trips.end());
  norm.matrix.makeCompressed();
  return norm;
}

// Stochastic block model. Nodes are assigned to blocks round-robin
// (node i -> block i % num_blocks); each of the d/num_blocks feature columns
// owned by the node's block is on with probability q_on, all others with
// q_off. Latent labels are the block ids. Deterministic given the seed: edge
// coins are drawn for i<j pairs in ascending order, feature coins row-major.
inline Graph generate_sbm(int num_nodes, int num_blocks, double p_in, double p_out,
                          int num_features, double q_on, double q_off,
                          std::uint64_t seed) {
  auto check_prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError(std::string("generate_sbm: ") + name + " outside [0,1]");
  };
  check_prob(p_in, "p_in");
  check_prob(p_out, "p_out");
  check_prob(q_on, "q_on");
  check_prob(q_off, "q_off");
  if (num_nodes <= 0 || num_blocks <= 0 || num_features <= 0)
    throw ValidationError("generate_sbm: sizes must be positive");
  if (!(p_in > p_out)) throw ValidationError("generate_sbm: requires p_in > p_out");
  if (!(q_on > q_off)) throw ValidationError("generate_sbm: requires q_on > q_off");

  Rng rng(seed);
  std::vector<int> block(num_nodes);
  for (int i = 0; i < num_nodes; ++i) block[i] = i % num_blocks;

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < num_nodes; ++i)
    for (int j = i + 1; j < num_nodes; ++j)
      if (rng.next_unit() < (block[i] == block[j] ? p_in : p_out))
        edges.emplace_back(i, j);

  const int cols_per_block = num_features / num_blocks;
  Mat features = Mat::Zero(num_nodes, num_features);
  for (int i = 0; i < num_nodes; ++i) {
    const int own_begin = block[i] * cols_per_block;
    const int own_end = own_begin + cols_per_block;
    for (int f = 0; f < num_features; ++f) {
      const double q = (f >= own_begin && f < own_end) ? q_on : q_off;
      if (rng.next_unit() < q) features(i, f) = 1.0;
    }
  }
  return build_graph(num_nodes, num_blocks, edges, std::move(features), block);
}

struct Partition {
  std::vector<int> train_ids, val_ids, test_ids;  // each sorted ascending
};

// Uniform shuffle by seed, then split at floor(cumulative_fraction * N)
// boundaries. The boundary rule reproduces exact sizes like
// (1083, 541, 1084) for N=2708 at fractions (0.4, 0.2, 0.4).
inline Partition partition_nodes(const Graph& g,
                                 const std::array<double, 3>& fractions,
                                 std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ValidationError("partition_nodes: fraction < 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("partition_nodes: fractions must sum to 1");

  std::vector<int> order(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::array<int, 4> bounds{0, 0, 0, g.num_nodes};
  double cum = 0.0;
  for (int i = 0; i < 2; ++i) {
    cum += fractions[static_cast<std::size_t>(i)];
    bounds[i + 1] = static_cast<int>(
        std::floor(cum * static_cast<double>(g.num_nodes) + 1e-7));
  }
  Partition p;
  p.train_ids.assign(order.begin() + bounds[0], order.begin() + bounds[1]);
  p.val_ids.assign(order.begin() + bounds[1], order.begin() + bounds[2]);
  p.test_ids.assign(order.begin() + bounds[2], order.begin() + bounds[3]);
  std::sort(p.train_ids.begin(), p.train_ids.end());
  std::sort(p.val_ids.begin(), p.val_ids.end());
  std::sort(p.test_ids.begin(), p.test_ids.end());
  return p;
}

}  // namespace graphss
