#pragma once
// Dynamic graph perturbation machinery: label-noise injection (simulated
// manual annotation), sampling of dynamic test subgraphs, and the greedy
// link-and-feature (L&F) evasion attack.
//
// The evaluation graph of a dynamic subgraph is the induced graph on
// (context nodes ∪ sampled test nodes); context nodes (the train partition)
// keep their edges and are visible to propagation but are never attacked,
// inferred, or scored.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "graphss/classifier.hpp"
#include "graphss/graph.hpp"

namespace graphss {

struct NoisyLabels {
  std::vector<int> values;       // length N
  double noise_ratio = 0.0;
  std::vector<int> flipped_ids;  // ascending; exactly round(nr * N) entries
};

// Uniformly chooses round(nr*N) nodes and replaces each label with a uniform
// draw from the K-1 other classes. Deterministic given the seed.
inline NoisyLabels inject_label_noise(const std::vector<int>& latent, double noise_ratio,
                                      int num_classes, std::uint64_t seed) {
  if (!(noise_ratio >= 0.0 && noise_ratio <= 1.0))
    throw ValidationError("inject_label_noise: noise_ratio outside [0,1]");
  const int n = static_cast<int>(latent.size());
  const int flips = static_cast<int>(std::llround(noise_ratio * n));
  if (flips > 0 && num_classes < 2)
    throw ValidationError("inject_label_noise: need K >= 2 to flip labels");

  NoisyLabels out;
  out.values = latent;
  out.noise_ratio = noise_ratio;

  Rng rng(seed);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  out.flipped_ids.assign(order.begin(), order.begin() + flips);
  std::sort(out.flipped_ids.begin(), out.flipped_ids.end());
  for (int id : out.flipped_ids) {
    const int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1)));
    out.values[id] = r >= latent[id] ? r + 1 : r;
  }
  return out;
}

struct AttackLogEntry {
  int victim = 0;       // full-graph node id
  std::string kind;     // "edge" | "feature"
  int target = 0;       // node id for edges, feature index for features
  std::string op;       // "add" | "remove" | "toggle" | "shift"
  double score = 0.0;   // surrogate-loss increase achieved by the flip
};

struct DynamicSubgraph {
  std::vector<int> node_ids;   // sampled test ids (full-graph), ascending
  Graph view;                  // induced evaluation graph
  std::vector<int> view_ids;   // full-graph id of each view node, ascending
  std::vector<int> targets;    // view-local indices of node_ids
  bool perturbed = false;
  std::vector<AttackLogEntry> attack_log;
  int shortfall = 0;           // requested flips that had no distinct candidate
};

// The evaluation graph is the induced graph on the sampled nodes plus their
// edges into the context (train) nodes; context nodes carry only those
// crossing edges, and context nodes without a crossing edge are left out.
// Edges to the rest of the test partition are severed.
inline DynamicSubgraph build_eval_view(const Graph& full,
                                       const std::vector<int>& context_ids,
                                       const std::vector<int>& sub_ids) {
  std::vector<char> in_sub(static_cast<std::size_t>(full.num_nodes), 0);
  std::vector<char> in_context(static_cast<std::size_t>(full.num_nodes), 0);
  for (int id : sub_ids) in_sub[static_cast<std::size_t>(id)] = 1;
  for (int id : context_ids) in_context[static_cast<std::size_t>(id)] = 1;

  DynamicSubgraph sg;
  sg.node_ids = sub_ids;
  sg.view_ids = sub_ids;
  for (int v : sub_ids)
    for (int u : full.neighbors(v))
      if (in_context[static_cast<std::size_t>(u)]) {
        sg.view_ids.push_back(u);
        in_context[static_cast<std::size_t>(u)] = 0;  // once
      }
  std::sort(sg.view_ids.begin(), sg.view_ids.end());

  std::vector<int> local(static_cast<std::size_t>(full.num_nodes), -1);
  for (std::size_t i = 0; i < sg.view_ids.size(); ++i)
    local[static_cast<std::size_t>(sg.view_ids[i])] = static_cast<int>(i);

  const int nv = static_cast<int>(sg.view_ids.size());
  std::vector<std::pair<int, int>> edges;
  Mat features(nv, full.num_features());
  std::vector<int> latent;
  if (!full.latent_labels.empty()) latent.resize(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) {
    const int v = sg.view_ids[static_cast<std::size_t>(i)];
    features.row(i) = full.features.row(v);
    if (!latent.empty()) latent[static_cast<std::size_t>(i)] = full.latent_labels[v];
    if (!in_sub[static_cast<std::size_t>(v)]) continue;  // edges keyed off sampled nodes
    for (int u : full.neighbors(v)) {
      if (local[static_cast<std::size_t>(u)] < 0) continue;
      if (in_sub[static_cast<std::size_t>(u)] && v >= u) continue;  // dedup induced pairs
      edges.emplace_back(i, local[static_cast<std::size_t>(u)]);
    }
  }
  sg.view = build_graph(nv, full.num_classes, edges, std::move(features), std::move(latent));
  sg.targets.reserve(sub_ids.size());
  for (int id : sub_ids) sg.targets.push_back(local[static_cast<std::size_t>(id)]);
  std::sort(sg.targets.begin(), sg.targets.end());
  return sg;
}

// `count` independent uniform samples of round(fraction*|test|) test nodes,
// without replacement inside a subgraph; subgraph i uses seed+i (i = 1..count).
inline std::vector<DynamicSubgraph> sample_subgraphs(const Graph& graph,
                                                     const std::vector<int>& test_ids,
                                                     const std::vector<int>& context_ids,
                                                     double fraction, int count,
                                                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValidationError("sample_subgraphs: fraction outside (0,1]");
  if (count <= 0) throw ValidationError("sample_subgraphs: count must be positive");
  const int size = static_cast<int>(
      std::llround(fraction * static_cast<double>(test_ids.size())));
  if (size < 1)
    throw ValidationError("sample_subgraphs: fraction selects no nodes");

  std::vector<DynamicSubgraph> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    Rng rng(seed + static_cast<std::uint64_t>(i));
    std::vector<int> pool = test_ids;
    rng.shuffle(pool);
    std::vector<int> picked(pool.begin(), pool.begin() + size);
    std::sort(picked.begin(), picked.end());
    out.push_back(build_eval_view(graph, context_ids, picked));
  }
  return out;
}

struct AttackConfig {
  int n_pert = 2;              // edge flips per victim
  int feature_multiplier = 10; // feature flips = n_pert * feature_multiplier
  double epsilon = 1.0;        // shift magnitude for continuous features
  std::uint64_t seed = 0;      // recorded for manifests; greedy itself is deterministic
};

namespace detail {

// Evaluates the linear surrogate's logits for a single node on the mutable
// attacked graph, optionally under a hypothetical single edge flip or a
// feature-row override. The surrogate is softmax(A_hat^hops X W_sur) with
// ReLU dropped, so node n's logits are (A_hat^hops e_n)^T (X W_sur), which a
// short frontier expansion computes exactly.
class SurrogateEval {
 public:
  SurrogateEval(std::vector<std::vector<int>>& adj, Mat& y1, int hops)
      : adj_(adj), y1_(y1), hops_(hops), coeff_(adj.size(), 0.0),
        next_(adj.size(), 0.0) {}

  struct EdgeFlip {
    int victim = -1, other = -1;
    bool add = false;
    bool active() const { return victim >= 0; }
  };

  // feature_row: when non-null, replaces y1 row `n` in the readout.
  Vec logits(int n, const EdgeFlip& flip, const Eigen::RowVectorXd* feature_row) {
    expand(n, flip);
    Vec out = Vec::Zero(y1_.cols());
    for (int i : touched_) {
      if (feature_row != nullptr && i == n)
        out += coeff_[i] * feature_row->transpose();
      else
        out += coeff_[i] * y1_.row(i).transpose();
      coeff_[i] = 0.0;
    }
    return out;
  }

  // Coefficient of node n's own feature row in its surrogate logits.
  double coeff_on_self(int n) {
    expand(n, EdgeFlip{});
    double self = 0.0;
    for (int i : touched_) {
      if (i == n) self = coeff_[i];
      coeff_[i] = 0.0;
    }
    return self;
  }

 private:
  // Leaves A_hat^hops e_n in coeff_ (indices listed in touched_). All
  // contributions are strictly positive, so next_[j] == 0 reliably marks
  // untouched entries.
  void expand(int n, const EdgeFlip& flip) {
    touched_.clear();
    coeff_[n] = 1.0;
    touched_.push_back(n);
    for (int hop = 0; hop < hops_; ++hop) {
      next_touched_.clear();
      for (int i : touched_) {
        const double ci = coeff_[i];
        const double wi = inv_sqrt_deg(i, flip);
        for_each_tilde_neighbor(i, flip, [&](int j) {
          if (next_[j] == 0.0) next_touched_.push_back(j);
          next_[j] += ci * wi * inv_sqrt_deg(j, flip);
        });
      }
      for (int i : touched_) coeff_[i] = 0.0;
      std::swap(coeff_, next_);
      std::swap(touched_, next_touched_);
    }
  }

  double inv_sqrt_deg(int x, const EdgeFlip& flip) const {
    double d = static_cast<double>(adj_[x].size()) + 1.0;
    if (flip.active() && (x == flip.victim || x == flip.other)) d += flip.add ? 1.0 : -1.0;
    return 1.0 / std::sqrt(d);
  }

  template <typename Fn>
  void for_each_tilde_neighbor(int i, const EdgeFlip& flip, Fn&& fn) const {
    fn(i);  // self-loop from A + I
    const bool removing = flip.active() && !flip.add;
    for (int j : adj_[i]) {
      if (removing && ((i == flip.victim && j == flip.other) ||
                       (i == flip.other && j == flip.victim)))
        continue;
      fn(j);
    }
    if (flip.active() && flip.add) {
      if (i == flip.victim) fn(flip.other);
      if (i == flip.other) fn(flip.victim);
    }
  }

  std::vector<std::vector<int>>& adj_;
  Mat& y1_;
  int hops_;
  std::vector<double> coeff_, next_;
  std::vector<int> touched_, next_touched_;
};

inline double surrogate_loss(const Vec& logits, int label) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum()) - logits(label);
}

}  // namespace detail

// Greedy L&F evasion attack. Every sampled test node is a victim; victims are
// processed in ascending node id and each receives n_pert edge flips followed
// by n_pert*feature_multiplier feature flips, each flip chosen by exhaustive
// single-flip enumeration to maximize the increase of the surrogate loss
// -ln p_surr[n][y_pred(n)]. y_pred is the victim classifier's prediction on
// the clean evaluation graph; classifier weights are never touched (evasion).
// Edge endpoints are restricted to the evaluation graph; ties break toward
// the lowest candidate index.
inline void attack_lf(DynamicSubgraph& sg, const ClassifierParams& victim_params,
                      const AttackConfig& cfg) {
  if (cfg.n_pert < 0) throw ValidationError("attack_lf: n_pert must be >= 0");
  if (cfg.n_pert == 0) return;

  const Graph& view = sg.view;
  const int nv = view.num_nodes;
  const int d = view.num_features();
  const int k = view.num_classes;

  // Clean-graph predictions fix the attack objective per victim.
  const PredictionBundle clean = forward(victim_params, normalize_adjacency(view),
                                         view.features);

  const Mat w_sur = victim_params.variant == Variant::gcn
                        ? Mat(victim_params.weights[0] * victim_params.weights[1])
                        : victim_params.weights[0];
  const int hops = victim_params.variant == Variant::gcn ? 2 : victim_params.sgc_hops;

  const bool binary_features =
      ((view.features.array() == 0.0) || (view.features.array() == 1.0)).all();

  std::vector<std::vector<int>> adj(nv);
  for (int v = 0; v < nv; ++v) {
    const auto nb = view.neighbors(v);
    adj[v].assign(nb.begin(), nb.end());
  }
  Mat features = view.features;
  Mat y1 = features * w_sur;  // per-node surrogate readout, updated on feature flips

  detail::SurrogateEval eval(adj, y1, hops);
  using EdgeFlip = detail::SurrogateEval::EdgeFlip;

  auto apply_edge = [&](int a, int b, bool add) {
    auto toggle = [&](std::vector<int>& row, int x) {
      auto it = std::lower_bound(row.begin(), row.end(), x);
      if (add)
        row.insert(it, x);
      else
        row.erase(it);
    };
    toggle(adj[a], b);
    toggle(adj[b], a);
  };

  for (int n : sg.targets) {
    const int y = clean.labels[static_cast<std::size_t>(n)];

    // Edge phase.
    const int edge_budget = std::min(cfg.n_pert, nv - 1);
    sg.shortfall += cfg.n_pert - edge_budget;
    for (int step = 0; step < edge_budget; ++step) {
      const double base = detail::surrogate_loss(eval.logits(n, EdgeFlip{}, nullptr), y);
      double best_gain = -std::numeric_limits<double>::infinity();
      int best_u = -1;
      bool best_add = false;
      for (int u = 0; u < nv; ++u) {
        if (u == n) continue;
        const bool present = std::binary_search(adj[n].begin(), adj[n].end(), u);
        EdgeFlip flip{n, u, !present};
        const double gain = detail::surrogate_loss(eval.logits(n, flip, nullptr), y) - base;
        if (gain > best_gain) {
          best_gain = gain;
          best_u = u;
          best_add = !present;
        }
      }
      apply_edge(n, best_u, best_add);
      sg.attack_log.push_back({sg.view_ids[n], "edge", sg.view_ids[best_u],
                               best_add ? "add" : "remove", best_gain});
    }

    // Feature phase.
    const int feature_budget = std::min(cfg.n_pert * cfg.feature_multiplier, d);
    sg.shortfall += cfg.n_pert * cfg.feature_multiplier - feature_budget;
    for (int step = 0; step < feature_budget; ++step) {
      const Vec base_logits = eval.logits(n, EdgeFlip{}, nullptr);
      const double base = detail::surrogate_loss(base_logits, y);
      Vec grad_sign_vec;  // continuous mode: d loss / d x_{n,f} up to the positive self coefficient
      if (!binary_features) {
        Vec p = (base_logits.array() - base_logits.maxCoeff()).exp();
        p /= p.sum();
        p(y) -= 1.0;
        grad_sign_vec = w_sur * p;
      }
      double best_gain = -std::numeric_limits<double>::infinity();
      int best_f = -1;
      double best_value = 0.0;
      Eigen::RowVectorXd candidate_row(k);
      for (int f = 0; f < d; ++f) {
        double new_value;
        if (binary_features) {
          new_value = features(n, f) == 0.0 ? 1.0 : 0.0;
        } else {
          new_value = features(n, f) + (grad_sign_vec(f) >= 0.0 ? cfg.epsilon : -cfg.epsilon);
        }
        candidate_row = y1.row(n) + (new_value - features(n, f)) * w_sur.row(f);
        const double gain =
            detail::surrogate_loss(eval.logits(n, EdgeFlip{}, &candidate_row), y) - base;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_value = new_value;
        }
      }
      features(n, best_f) = best_value;
      y1.row(n) = features.row(n) * w_sur;
      sg.attack_log.push_back({sg.view_ids[n], "feature", best_f,
                               binary_features ? "toggle" : "shift", best_gain});
    }
  }

  std::vector<std::pair<int, int>> edges;
  for (int v = 0; v < nv; ++v)
    for (int u : adj[v])
      if (v < u) edges.emplace_back(v, u);
  std::vector<int> latent = view.latent_labels;
  sg.view = build_graph(nv, k, edges, std::move(features), std::move(latent));
  sg.perturbed = true;
}

}  // namespace graphss
