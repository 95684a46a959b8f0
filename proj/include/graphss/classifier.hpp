#pragma once
// Node classifiers with explicit analytic gradients, trained full-batch by
// Adam on 64-bit floats.
//
//   GCN (two layers):  probs = row_softmax( A_hat * relu(A_hat X W0) * W1 )
//   SGC:               probs = row_softmax( A_hat^hops X W )
//
// A_hat is the symmetric normalized adjacency. No biases, no dropout, no
// weight decay. The propagated input (A_hat X, resp. A_hat^hops X) is
// computed once per graph and reused across epochs; the multiplication
// order is pinned so repeated calls are bit-identical.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphss/graph.hpp"

namespace graphss {

enum class Variant { gcn, sgc };

inline std::string variant_name(Variant v) { return v == Variant::gcn ? "gcn" : "sgc"; }
inline Variant variant_from_name(const std::string& s) {
  if (s == "gcn") return Variant::gcn;
  if (s == "sgc") return Variant::sgc;
  throw ValidationError("unknown classifier variant '" + s + "'");
}

struct ClassifierParams {
  Variant variant = Variant::gcn;
  std::vector<Mat> weights;  // GCN: {W0 (d x h), W1 (h x K)}; SGC: {W (d x K)}
  int sgc_hops = 2;

  int num_classes() const { return static_cast<int>(weights.back().cols()); }
  int num_features() const { return static_cast<int>(weights.front().rows()); }
};

struct PredictionBundle {
  Mat probs;                // N x K, rows sum to 1
  std::vector<int> labels;  // argmax per row, lowest index wins ties
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int hidden = 200;
  int sgc_hops = 2;
  std::uint64_t seed = 0;
};

// Glorot-uniform init, bound sqrt(6 / (fan_in + fan_out)); entries drawn
// row-major, matrices in declaration order.
inline ClassifierParams init_params(Variant variant, int num_features,
                                    int num_classes, const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  auto glorot = [&](int rows, int cols) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    Mat w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = (2.0 * rng.next_unit() - 1.0) * bound;
    return w;
  };
  ClassifierParams p;
  p.variant = variant;
  p.sgc_hops = cfg.sgc_hops;
  if (variant == Variant::gcn) {
    p.weights.push_back(glorot(num_features, cfg.hidden));
    p.weights.push_back(glorot(cfg.hidden, num_classes));
  } else {
    p.weights.push_back(glorot(num_features, num_classes));
  }
  return p;
}

// A_hat^hops X, multiplying from the left one hop at a time.
inline Mat propagate(const NormalizedAdjacency& norm, const Mat& features, int hops) {
  Mat prop = features;
  for (int h = 0; h < hops; ++h) prop = norm.matrix * prop;
  return prop;
}

namespace detail {

// Row-wise log-softmax via the log-sum-exp shift; never under/overflows on
// finite logits.
inline Mat log_softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

inline std::vector<int> argmax_rows(const Mat& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < m.cols(); ++k)
      if (m(i, k) > m(i, best)) best = static_cast<int>(k);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

struct ForwardPass {
  Mat hidden;   // GCN only: relu(prop * W0)
  Mat logits;   // pre-softmax
  Mat log_probs;
};

inline ForwardPass forward_pass(const ClassifierParams& p,
                                const NormalizedAdjacency& norm, const Mat& prop) {
  ForwardPass fp;
  if (p.variant == Variant::gcn) {
    Mat pre = prop * p.weights[0];
    if (!pre.allFinite()) throw RuntimeFailure("forward: non-finite value in hidden layer");
    fp.hidden = pre.cwiseMax(0.0);
    fp.logits = (norm.matrix * fp.hidden) * p.weights[1];
  } else {
    fp.logits = prop * p.weights[0];
  }
  if (!fp.logits.allFinite())
    throw RuntimeFailure("forward: non-finite value in output layer");
  fp.log_probs = log_softmax_rows(fp.logits);
  return fp;
}

}  // namespace detail

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Mat> grads;  // same shapes as ClassifierParams::weights
};

namespace detail {

// Mean cross-entropy over the masked nodes plus its exact gradient w.r.t.
// every weight matrix, derived by hand from the forward definition.
inline LossAndGrads loss_and_gradients_from_prop(const ClassifierParams& p,
                                                 const NormalizedAdjacency& norm,
                                                 const Mat& prop,
                                                 const std::vector<int>& labels,
                                                 const std::vector<int>& mask) {
  if (mask.empty()) throw ValidationError("loss_and_gradients: empty mask");
  const int k = p.num_classes();
  for (int n : mask) {
    if (n < 0 || n >= prop.rows())
      throw ValidationError("loss_and_gradients: mask id out of range");
    if (labels[static_cast<std::size_t>(n)] < 0 ||
        labels[static_cast<std::size_t>(n)] >= k)
      throw ValidationError("loss_and_gradients: label out of range on mask");
  }

  const ForwardPass fp = forward_pass(p, norm, prop);
  const double inv_m = 1.0 / static_cast<double>(mask.size());

  double loss = 0.0;
  for (int n : mask) loss -= fp.log_probs(n, labels[static_cast<std::size_t>(n)]);
  loss *= inv_m;

  // dL/dlogits: (softmax - onehot)/|mask| on masked rows, zero elsewhere.
  Mat dlogits = Mat::Zero(prop.rows(), k);
  for (int n : mask) {
    dlogits.row(n) = fp.log_probs.row(n).array().exp() * inv_m;
    dlogits(n, labels[static_cast<std::size_t>(n)]) -= inv_m;
  }

  LossAndGrads out;
  out.loss = loss;
  if (p.variant == Variant::gcn) {
    const Mat spread = norm.matrix * fp.hidden;        // N x h
    Mat dw1 = spread.transpose() * dlogits;            // h x K
    Mat dspread = dlogits * p.weights[1].transpose();  // N x h
    Mat dhidden = norm.matrix * dspread;               // A_hat symmetric
    Mat dpre = (fp.hidden.array() > 0.0).cast<double>() * dhidden.array();
    Mat dw0 = prop.transpose() * dpre;                 // d x h
    out.grads.push_back(std::move(dw0));
    out.grads.push_back(std::move(dw1));
  } else {
    out.grads.push_back(prop.transpose() * dlogits);   // d x K
  }
  return out;
}

}  // namespace detail

inline PredictionBundle forward(const ClassifierParams& p,
                                const NormalizedAdjacency& norm, const Mat& features) {
  const Mat prop = propagate(norm, features, p.variant == Variant::gcn ? 1 : p.sgc_hops);
  const auto fp = detail::forward_pass(p, norm, prop);
  PredictionBundle b;
  b.probs = fp.log_probs.array().exp();
  b.labels = detail::argmax_rows(b.probs);
  return b;
}

inline LossAndGrads loss_and_gradients(const ClassifierParams& p,
                                       const NormalizedAdjacency& norm,
                                       const Mat& features,
                                       const std::vector<int>& labels,
                                       const std::vector<int>& mask) {
  const Mat prop = propagate(norm, features, p.variant == Variant::gcn ? 1 : p.sgc_hops);
  return detail::loss_and_gradients_from_prop(p, norm, prop, labels, mask);
}

// Owns the classifier parameters plus Adam state; the optimizer state carries
// across retrain_step calls. One session per classifier instance, single
// threaded.
class TrainSession {
 public:
  TrainSession(const Graph& graph, Variant variant, const TrainConfig& cfg)
      : cfg_(cfg),
        norm_(normalize_adjacency(graph)),
        params_(init_params(variant, graph.num_features(), graph.num_classes, cfg)) {
    init_state(graph);
  }

  // Continue from existing parameters (e.g. on an evaluation graph).
  TrainSession(const Graph& graph, ClassifierParams params, const TrainConfig& cfg)
      : cfg_(cfg), norm_(normalize_adjacency(graph)), params_(std::move(params)) {
    if (params_.num_features() != graph.num_features())
      throw ValidationError("TrainSession: feature dimension mismatch");
    init_state(graph);
  }

  // config.epochs full-batch Adam steps on the mask. Aborts on divergence,
  // reporting the last epoch with a finite loss.
  void train(const std::vector<int>& mask, const std::vector<int>& labels) {
    for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      const double loss = retrain_step(mask, labels, cfg_.learning_rate);
      if (!std::isfinite(loss))
        throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch) +
                             "; last finite epoch " + std::to_string(epoch - 1));
      last_loss_ = loss;
    }
  }

  // One full-batch Adam step on the given nodes; returns the pre-step loss.
  double retrain_step(const std::vector<int>& node_ids, const std::vector<int>& labels,
                      double learning_rate) {
    auto lg = detail::loss_and_gradients_from_prop(params_, norm_, prop_, labels, node_ids);
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, adam_t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, adam_t_);
    for (std::size_t i = 0; i < params_.weights.size(); ++i) {
      adam_m_[i] = cfg_.beta1 * adam_m_[i] + (1.0 - cfg_.beta1) * lg.grads[i];
      adam_v_[i] = cfg_.beta2 * adam_v_[i].array() +
                   (1.0 - cfg_.beta2) * lg.grads[i].array().square();
      params_.weights[i].array() -=
          learning_rate * (adam_m_[i].array() / bc1) /
          ((adam_v_[i].array() / bc2).sqrt() + cfg_.adam_eps);
    }
    return lg.loss;
  }

  PredictionBundle predict() const {
    const auto fp = detail::forward_pass(params_, norm_, prop_);
    PredictionBundle b;
    b.probs = fp.log_probs.array().exp();
    b.labels = detail::argmax_rows(b.probs);
    return b;
  }

  double loss_on(const std::vector<int>& mask, const std::vector<int>& labels) const {
    return detail::loss_and_gradients_from_prop(params_, norm_, prop_, labels, mask).loss;
  }

  const ClassifierParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  double last_loss() const { return last_loss_; }

 private:
  void init_state(const Graph& graph) {
    prop_ = propagate(norm_, graph.features,
                      params_.variant == Variant::gcn ? 1 : params_.sgc_hops);
    for (const Mat& w : params_.weights) {
      adam_m_.push_back(Mat::Zero(w.rows(), w.cols()));
      adam_v_.push_back(Mat::Zero(w.rows(), w.cols()));
    }
  }

  TrainConfig cfg_;
  NormalizedAdjacency norm_;
  ClassifierParams params_;
  Mat prop_;
  std::vector<Mat> adam_m_, adam_v_;
  long adam_t_ = 0;
  double last_loss_ = 0.0;
};

inline ClassifierParams train(const Graph& graph, const std::vector<int>& train_ids,
                              const std::vector<int>& labels, Variant variant,
                              const TrainConfig& cfg) {
  for (int n : train_ids)
    if (labels[static_cast<std::size_t>(n)] < 0)
      throw ValidationError("train: labels must cover train ids");
  TrainSession session(graph, variant, cfg);
  session.train(train_ids, labels);
  return session.params();
}

// Checkpoint format: one JSON header line, then the weight matrices as raw
// little-endian 64-bit floats, row-major within each matrix, in declaration
// order.
inline void save_checkpoint(const ClassifierParams& p, std::uint64_t seed, int epoch,
                            const std::string& path) {
  nlohmann::json header{{"variant", variant_name(p.variant)},
                        {"sgc_hops", p.sgc_hops},
                        {"seed", seed},
                        {"epoch", epoch}};
  auto shapes = nlohmann::json::array();
  for (const Mat& w : p.weights)
    shapes.push_back({static_cast<int>(w.rows()), static_cast<int>(w.cols())});
  header["shapes"] = shapes;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << header.dump() << "\n";
  for (const Mat& w : p.weights)
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double v = w(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
}

struct Checkpoint {
  ClassifierParams params;
  std::uint64_t seed = 0;
  int epoch = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw ValidationError(path + ": missing checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const std::exception& e) {
    throw ValidationError(path + ": bad checkpoint header: " + e.what());
  }
  Checkpoint ck;
  ck.params.variant = variant_from_name(header.at("variant").get<std::string>());
  ck.params.sgc_hops = header.at("sgc_hops").get<int>();
  ck.seed = header.at("seed").get<std::uint64_t>();
  ck.epoch = header.at("epoch").get<int>();
  for (const auto& shape : header.at("shapes")) {
    const int rows = shape[0].get<int>();
    const int cols = shape[1].get<int>();
    Mat w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        if (!in) throw ValidationError(path + ": truncated weight block");
        w(r, c) = v;
      }
    ck.params.weights.push_back(std::move(w));
  }
  return ck;
}

}  // namespace graphss
