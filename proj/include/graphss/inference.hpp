#pragma once
// Bayesian self-supervised label-transition inference.
//
// A K x K confusion table C counts co-occurrences of the currently inferred
// label z_n and the observed noisy label y_n. With a Dirichlet(alpha) prior
// on each transition row, the collapsed per-node conditional is
//
//   P(z_n = k | rest)  ∝  probs[n][k] * (alpha[y_n] + C^{-n}[k][y_n])
//                                     / sum_k' (alpha[k'] + C^{-n}[k][k'])
//
// where C^{-n} excludes node n's current assignment. A sweep resamples every
// node in ascending order against either the frozen warm-up transition
// (posterior-mean rows built on the train graph) or the live leave-one-out
// counts. Weights are computed in log space with a max shift.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "graphss/classifier.hpp"
#include "graphss/graph.hpp"

namespace graphss {

struct ConfusionCounts {
  int num_classes = 0;
  std::vector<long long> table;  // K*K row-major; rows = inferred, cols = noisy

  explicit ConfusionCounts(int k = 0) : num_classes(k), table(static_cast<std::size_t>(k) * k, 0) {}
  long long& at(int z, int y) { return table[static_cast<std::size_t>(z) * num_classes + y]; }
  long long at(int z, int y) const { return table[static_cast<std::size_t>(z) * num_classes + y]; }
  long long row_sum(int z) const {
    long long s = 0;
    for (int y = 0; y < num_classes; ++y) s += at(z, y);
    return s;
  }
  long long total() const {
    long long s = 0;
    for (long long v : table) s += v;
    return s;
  }
};

struct TransitionModel {
  Vec alpha;              // K positive reals
  ConfusionCounts counts;

  // Posterior-mean transition rows: row k = (alpha + C_k.) / sum(alpha + C_k.).
  Mat rows() const {
    const int k = counts.num_classes;
    Mat out(k, k);
    for (int z = 0; z < k; ++z) {
      double denom = 0.0;
      for (int y = 0; y < k; ++y) denom += alpha(y) + static_cast<double>(counts.at(z, y));
      for (int y = 0; y < k; ++y)
        out(z, y) = (alpha(y) + static_cast<double>(counts.at(z, y))) / denom;
    }
    return out;
  }
};

inline void check_alpha(const Vec& alpha) {
  if (alpha.size() == 0) throw ValidationError("transition: alpha is empty");
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    if (!(alpha(i) > 0.0)) throw ValidationError("transition: alpha entries must be > 0");
}

// Warm-up transition from train-graph predictions vs. manual labels:
// counts[k][k'] = #{n : prediction = k, manual label = k'}.
inline TransitionModel warmup_transition(const std::vector<int>& predictions,
                                         const std::vector<int>& manual_labels,
                                         const Vec& alpha) {
  check_alpha(alpha);
  if (predictions.empty()) throw ValidationError("warmup_transition: empty input");
  if (predictions.size() != manual_labels.size())
    throw ValidationError("warmup_transition: length mismatch");
  const int k = static_cast<int>(alpha.size());
  TransitionModel model{alpha, ConfusionCounts(k)};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] < 0 || predictions[i] >= k || manual_labels[i] < 0 ||
        manual_labels[i] >= k)
      throw ValidationError("warmup_transition: label out of range");
    ++model.counts.at(predictions[i], manual_labels[i]);
  }
  return model;
}

// Normalized collapsed-Gibbs conditional for one node given leave-one-out
// counts. The P(y_n | v_n) denominator is constant in z_n and dropped.
inline Vec gibbs_conditional(const Vec& class_probs_n, int y_n,
                             const ConfusionCounts& counts_excl_n, const Vec& alpha) {
  check_alpha(alpha);
  const int k = static_cast<int>(alpha.size());
  const double alpha_sum = alpha.sum();
  Vec logw(k);
  bool any = false;
  for (int z = 0; z < k; ++z) {
    const double p = class_probs_n(z);
    if (p > 0.0) {
      any = true;
      logw(z) = std::log(p) +
                std::log(alpha(y_n) + static_cast<double>(counts_excl_n.at(z, y_n))) -
                std::log(alpha_sum + static_cast<double>(counts_excl_n.row_sum(z)));
    } else {
      logw(z) = -std::numeric_limits<double>::infinity();
    }
  }
  if (!any) throw RuntimeFailure("gibbs_conditional: class probabilities all zero");
  const double m = logw.maxCoeff();
  Vec w = (logw.array() - m).exp();
  return w / w.sum();
}

enum class InferenceMode { defense, alert };

struct InferenceState {
  std::vector<int> assignments;          // current z_n per target
  std::vector<long long> sample_counts;  // targets x K, post-warm-up tallies
  long long epoch = 0;
  InferenceMode mode = InferenceMode::defense;
  int ws = 40;
  int epochs = 100;
  int retrain_budget = 60;

  long long sample_count(int n, int k, int num_classes) const {
    return sample_counts[static_cast<std::size_t>(n) * num_classes + k];
  }
};

// One sweep over all targets in ascending order. `dynamic.counts` is kept
// consistent (decrement before sampling, increment after); with use_warmup
// the weights come from the frozen warm-up rows instead of the live counts.
// Post-warm-up epochs tally one sample per node into sample_counts.
inline void gibbs_sweep(InferenceState& state, const Mat& probs,
                        const std::vector<int>& noisy_labels, TransitionModel& dynamic,
                        bool use_warmup, const Mat& warmup_rows, Rng& rng) {
  const int k = dynamic.counts.num_classes;
  const int n_targets = static_cast<int>(state.assignments.size());
  if (probs.rows() != n_targets || probs.cols() != k)
    throw ValidationError("gibbs_sweep: probability matrix shape mismatch");

  state.epoch += 1;
  const bool tally = state.epoch > state.ws;
  const double alpha_sum = dynamic.alpha.sum();
  Vec logw(k), w(k);

  for (int n = 0; n < n_targets; ++n) {
    const int y = noisy_labels[static_cast<std::size_t>(n)];
    --dynamic.counts.at(state.assignments[static_cast<std::size_t>(n)], y);

    bool any = false;
    for (int z = 0; z < k; ++z) {
      const double p = probs(n, z);
      if (p > 0.0) {
        any = true;
        if (use_warmup) {
          logw(z) = std::log(p) + std::log(warmup_rows(z, y));
        } else {
          logw(z) =
              std::log(p) +
              std::log(dynamic.alpha(y) + static_cast<double>(dynamic.counts.at(z, y))) -
              std::log(alpha_sum + static_cast<double>(dynamic.counts.row_sum(z)));
        }
      } else {
        logw(z) = -std::numeric_limits<double>::infinity();
      }
    }
    if (!any) throw RuntimeFailure("gibbs_sweep: class probabilities all zero");
    const double m = logw.maxCoeff();
    w = (logw.array() - m).exp();
    const int z_new = rng.pick_weighted({w.data(), static_cast<std::size_t>(k)});

    state.assignments[static_cast<std::size_t>(n)] = z_new;
    ++dynamic.counts.at(z_new, y);
    if (tally) ++state.sample_counts[static_cast<std::size_t>(n) * k + z_new];
  }
}

struct InferenceSettings {
  int ws = 40;
  int epochs = 100;
  int retrain = 60;               // total retraining-step budget
  double alpha = 1.0;
  double learning_rate = 1e-3;
  bool refresh_auto_labels = false;  // keep Y_a frozen by default
  // Ablation switch: freeze the transition at its initial uniform state for
  // the whole run (no warm-up rows, no live-count updates), so sampling
  // follows the classifier distribution alone.
  bool fixed_phi = false;
  // Defense mode continues the dynamic transition from the warm-up
  // posterior: its rows are smoothed by alpha plus the warm-up counts and
  // the live test-graph counts update them. Without this anchor the dynamic
  // phase is label-switching invariant and drifts to whatever the (possibly
  // perturbed) classifier distribution prefers; alert mode exploits exactly
  // that drift as its detection signal, so the anchor never applies there.
  bool warmup_prior = true;
};

struct TraceRecord {
  long long epoch = 0;
  bool warmup_phase = false;
  double accuracy_vs_latent = -1.0;  // -1 when latent labels unavailable
  Mat transition_rows;
  bool retrained = false;
};

using TraceFn = std::function<void(const TraceRecord&)>;

struct InferenceResult {
  std::vector<int> inferred;     // mode of post-warm-up samples per target
  std::vector<int> last_sample;  // final assignment, kept for ablation
  std::vector<int> auto_labels;  // Y_a as used (stored per-node self-information)
  TransitionModel dynamic;
  InferenceState state;
  Mat final_probs;               // targets x K after the last refresh
  ClassifierParams final_params;
};

// Full inference run on an evaluation graph. `auto_labels` are the stored
// noisy labels Y_a of the target nodes: the classifier's predictions recorded
// when the nodes were first labeled, before any perturbation of the view.
// They are the per-node self-information anchoring the transition model;
// the categorical distribution P is recomputed from the current (possibly
// perturbed) view and refreshed after retraining, while Y_a stays frozen.
// Assignments start at Y_a. Epochs 1..WS sample against the frozen warm-up
// transition, later epochs against the live counts. In defense mode each
// post-warm-up epoch spends one retraining step (Adam, on the target nodes
// with the current assignments as labels) while budget remains, then
// refreshes the probabilities; alert mode never touches the classifier. The
// inferred label is the per-node mode of the post-warm-up samples, ties to
// the lowest class.
inline InferenceResult run_inference(const Graph& view, const std::vector<int>& targets,
                                     const ClassifierParams& classifier,
                                     const std::vector<int>& auto_labels,
                                     InferenceMode mode, const InferenceSettings& settings,
                                     const TransitionModel& warmup, Rng& rng,
                                     const TraceFn& trace = nullptr) {
  if (settings.ws >= settings.epochs)
    throw ValidationError("run_inference: WS must be < Epochs");
  if (settings.ws < 0) throw ValidationError("run_inference: WS must be >= 0");
  if (targets.empty()) throw ValidationError("run_inference: no target nodes");
  if (auto_labels.size() != targets.size())
    throw ValidationError("run_inference: auto label count mismatch");
  const int k = view.num_classes;
  if (warmup.counts.num_classes != k)
    throw ValidationError("run_inference: warm-up transition class count mismatch");
  for (int y : auto_labels)
    if (y < 0 || y >= k) throw ValidationError("run_inference: auto label out of range");

  TrainConfig retrain_cfg;
  retrain_cfg.learning_rate = settings.learning_rate;
  TrainSession session(view, classifier, retrain_cfg);

  const int n_targets = static_cast<int>(targets.size());
  PredictionBundle bundle = session.predict();

  InferenceResult res;
  res.auto_labels = auto_labels;
  Mat probs(n_targets, k);
  for (int i = 0; i < n_targets; ++i)
    probs.row(i) = bundle.probs.row(targets[static_cast<std::size_t>(i)]);

  InferenceState state;
  state.mode = mode;
  state.ws = settings.ws;
  state.epochs = settings.epochs;
  state.retrain_budget = settings.retrain;
  state.assignments = res.auto_labels;
  state.sample_counts.assign(static_cast<std::size_t>(n_targets) * k, 0);

  Vec alpha = Vec::Constant(k, settings.alpha);
  check_alpha(alpha);
  TransitionModel dynamic{alpha, ConfusionCounts(k)};
  const bool anchored = settings.warmup_prior && mode == InferenceMode::defense &&
                        !settings.fixed_phi;
  if (anchored) dynamic.counts = warmup.counts;  // pseudo-count anchor
  const ConfusionCounts count_baseline = dynamic.counts;
  for (int i = 0; i < n_targets; ++i)
    ++dynamic.counts.at(state.assignments[static_cast<std::size_t>(i)],
                        res.auto_labels[static_cast<std::size_t>(i)]);

  // fixed_phi samples against uniform rows for the whole run.
  const Mat warmup_rows =
      settings.fixed_phi ? Mat(((alpha / alpha.sum()).transpose()).replicate(k, 1))
                         : warmup.rows();
  std::vector<int> noisy = res.auto_labels;
  std::vector<int> view_labels(static_cast<std::size_t>(view.num_nodes), -1);
  int retrain_done = 0;

  for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
    const bool warm = settings.fixed_phi || epoch <= settings.ws;
    gibbs_sweep(state, probs, noisy, dynamic, warm, warmup_rows, rng);

    bool retrained = false;
    if (mode == InferenceMode::defense && epoch > settings.ws &&
        retrain_done < settings.retrain) {
      for (int i = 0; i < n_targets; ++i)
        view_labels[static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])] =
            state.assignments[static_cast<std::size_t>(i)];
      session.retrain_step(targets, view_labels, settings.learning_rate);
      ++retrain_done;
      retrained = true;
      bundle = session.predict();
      for (int i = 0; i < n_targets; ++i)
        probs.row(i) = bundle.probs.row(targets[static_cast<std::size_t>(i)]);
      if (settings.refresh_auto_labels) {
        for (int i = 0; i < n_targets; ++i)
          noisy[static_cast<std::size_t>(i)] =
              bundle.labels[static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])];
        // Counts pair assignments with the observed labels; rebuild them
        // against the refreshed Y_a.
        dynamic.counts = count_baseline;
        for (int i = 0; i < n_targets; ++i)
          ++dynamic.counts.at(state.assignments[static_cast<std::size_t>(i)],
                              noisy[static_cast<std::size_t>(i)]);
      }
    }

    if (trace) {
      TraceRecord rec;
      rec.epoch = epoch;
      rec.warmup_phase = warm;
      rec.transition_rows = dynamic.rows();
      rec.retrained = retrained;
      if (!view.latent_labels.empty()) {
        int correct = 0;
        for (int i = 0; i < n_targets; ++i)
          correct += state.assignments[static_cast<std::size_t>(i)] ==
                     view.latent_labels[static_cast<std::size_t>(
                         targets[static_cast<std::size_t>(i)])];
        rec.accuracy_vs_latent = static_cast<double>(correct) / n_targets;
      }
      trace(rec);
    }
  }

  res.inferred.resize(n_targets);
  for (int i = 0; i < n_targets; ++i) {
    int best = 0;
    for (int z = 1; z < k; ++z)
      if (state.sample_count(i, z, k) > state.sample_count(i, best, k)) best = z;
    res.inferred[static_cast<std::size_t>(i)] = best;
  }
  res.last_sample = state.assignments;
  res.dynamic = std::move(dynamic);
  res.state = std::move(state);
  res.final_probs = std::move(probs);
  res.final_params = session.params();
  return res;
}

// Mean total-variation distance between transition rows; 0 iff equal, at
// most 1, higher = more drift from the warm-up behaviour.
inline double alert_score_rows(const Mat& dynamic_rows, const Mat& warmup_rows) {
  if (dynamic_rows.rows() != warmup_rows.rows() ||
      dynamic_rows.cols() != warmup_rows.cols())
    throw ValidationError("alert_score: shape mismatch");
  double total = 0.0;
  for (Eigen::Index r = 0; r < dynamic_rows.rows(); ++r)
    total += 0.5 * (dynamic_rows.row(r) - warmup_rows.row(r)).cwiseAbs().sum();
  return total / static_cast<double>(dynamic_rows.rows());
}

inline double alert_score(const TransitionModel& dynamic, const TransitionModel& warmup) {
  if (dynamic.counts.num_classes != warmup.counts.num_classes)
    throw ValidationError("alert_score: class count mismatch");
  return alert_score_rows(dynamic.rows(), warmup.rows());
}

// Secondary alert statistic: fraction of targets whose transitioned label
// disagrees with Y_a.
inline double disagreement_rate(const std::vector<int>& inferred,
                                const std::vector<int>& auto_labels) {
  if (inferred.size() != auto_labels.size() || inferred.empty())
    throw ValidationError("disagreement_rate: length mismatch");
  int diff = 0;
  for (std::size_t i = 0; i < inferred.size(); ++i) diff += inferred[i] != auto_labels[i];
  return static_cast<double>(diff) / static_cast<double>(inferred.size());
}

}  // namespace graphss
