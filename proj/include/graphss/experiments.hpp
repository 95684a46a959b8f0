#pragma once
// Experiment drivers: the defense protocol (Original / Attack / GraphSS over
// a group of dynamic subgraphs), the alert protocol (transition-drift ROC),
// the WS x Retrain validation sweep, the 2x2 ablation, and runtime scaling.
// Every driver derives all of its randomness from one master seed through
// named child streams, so reports are reproducible bit for bit.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "graphss/config.hpp"
#include "graphss/inference.hpp"
#include "graphss/metrics.hpp"
#include "graphss/perturb.hpp"

namespace graphss {

namespace detail {

// Runs fn(0..count-1); trial results must be written into per-index slots.
inline void parallel_for_indexed(int count, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(jobs, count);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace detail

struct Pipeline {
  Graph graph;
  Partition part;
  NoisyLabels noisy;
  ClassifierParams params;
  PredictionBundle full_bundle;  // forward pass on the full (training-time) graph
  TransitionModel warmup;
};

// Shared front half of every experiment: obtain the graph, partition it,
// inject label noise, train (or load) the classifier, and build the warm-up
// transition from train-node predictions vs. the manual labels.
inline Pipeline prepare_pipeline(const ExperimentConfig& cfg, std::uint64_t master) {
  Pipeline p;
  if (cfg.dataset.kind == "files") {
    const auto paths = cfg.resolved_paths();
    p.graph = load_graph(paths.edges, paths.features, paths.labels, paths.meta);
  } else {
    const auto& s = cfg.dataset.sbm;
    p.graph = generate_sbm(s.num_nodes, s.num_blocks, s.p_in, s.p_out, s.num_features,
                           s.q_on, s.q_off, derive_seed(master, "sbm"));
  }
  p.part = partition_nodes(
      p.graph, {cfg.partition.train, cfg.partition.val, cfg.partition.test},
      derive_seed(master, "partition"));
  p.noisy = inject_label_noise(p.graph.latent_labels, cfg.noise_ratio,
                               p.graph.num_classes, derive_seed(master, "noise"));
  if (!cfg.checkpoint.empty()) {
    p.params = load_checkpoint(cfg.checkpoint).params;
    if (p.params.num_features() != p.graph.num_features())
      throw ValidationError("checkpoint feature dimension does not match dataset");
  } else {
    p.params = train(p.graph, p.part.train_ids, p.noisy.values, cfg.variant(),
                     cfg.train_config(derive_seed(master, "train")));
  }
  p.full_bundle = forward(p.params, normalize_adjacency(p.graph), p.graph.features);

  std::vector<int> train_pred, train_manual;
  train_pred.reserve(p.part.train_ids.size());
  train_manual.reserve(p.part.train_ids.size());
  for (int n : p.part.train_ids) {
    train_pred.push_back(p.full_bundle.labels[static_cast<std::size_t>(n)]);
    train_manual.push_back(p.noisy.values[static_cast<std::size_t>(n)]);
  }
  p.warmup = warmup_transition(train_pred, train_manual,
                               Vec::Constant(p.graph.num_classes, cfg.inference.alpha));
  return p;
}

inline std::vector<int> gather(const std::vector<int>& values, const std::vector<int>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (int n : ids) out.push_back(values[static_cast<std::size_t>(n)]);
  return out;
}

inline double accuracy_at(const std::vector<int>& predicted_at_targets,
                          const Graph& view, const std::vector<int>& targets) {
  int correct = 0;
  for (std::size_t i = 0; i < targets.size(); ++i)
    correct += predicted_at_targets[i] ==
               view.latent_labels[static_cast<std::size_t>(targets[i])];
  return static_cast<double>(correct) / static_cast<double>(targets.size());
}

struct DefenseSubgraphResult {
  int index = 0;
  double original = 0.0, attacked = 0.0, defended = 0.0;
  MetricsReport original_metrics, attacked_metrics, defended_metrics;
  int shortfall = 0;
  std::vector<AttackLogEntry> attack_log;
};

struct DefenseReport {
  std::vector<DefenseSubgraphResult> subgraphs;
  double original_mean = 0, original_sd = 0;
  double attacked_mean = 0, attacked_sd = 0;
  double defended_mean = 0, defended_sd = 0;
  Eigen::MatrixXi confusion_original, confusion_attacked, confusion_defended;  // pooled
};

using TraceFactory = std::function<TraceFn(int subgraph_index)>;

inline DefenseReport run_defense_experiment(const ExperimentConfig& cfg,
                                            std::uint64_t master,
                                            const TraceFactory& trace_factory = nullptr) {
  const Pipeline pipe = prepare_pipeline(cfg, master);
  auto subs = sample_subgraphs(pipe.graph, pipe.part.test_ids, pipe.part.train_ids,
                               cfg.subgraph.fraction, cfg.subgraph.count,
                               derive_seed(master, "subgraphs"));

  DefenseReport report;
  report.subgraphs.resize(subs.size());
  const int k = pipe.graph.num_classes;
  detail::parallel_for_indexed(
      static_cast<int>(subs.size()), cfg.jobs, [&](int i) {
        DynamicSubgraph& sg = subs[static_cast<std::size_t>(i)];
        DefenseSubgraphResult out;
        out.index = i;
        const std::vector<int> latent = gather(sg.view.latent_labels, sg.targets);

        const PredictionBundle clean =
            forward(pipe.params, normalize_adjacency(sg.view), sg.view.features);
        out.original_metrics = compute_metrics(gather(clean.labels, sg.targets), latent, k);
        out.original = out.original_metrics.accuracy;

        AttackConfig atk{cfg.attack.n_pert, cfg.attack.feature_multiplier,
                         cfg.attack.epsilon,
                         derive_seed(master, "attack", static_cast<std::uint64_t>(i))};
        attack_lf(sg, pipe.params, atk);
        out.shortfall = sg.shortfall;
        out.attack_log = sg.attack_log;

        const PredictionBundle attacked =
            forward(pipe.params, normalize_adjacency(sg.view), sg.view.features);
        out.attacked_metrics = compute_metrics(gather(attacked.labels, sg.targets), latent, k);
        out.attacked = out.attacked_metrics.accuracy;

        Rng rng(derive_seed(master, "inference", static_cast<std::uint64_t>(i)));
        const auto t0 = std::chrono::steady_clock::now();
        const InferenceResult res = run_inference(
            sg.view, sg.targets, pipe.params, gather(pipe.full_bundle.labels, sg.node_ids),
            InferenceMode::defense, cfg.inference_settings(), pipe.warmup, rng,
            trace_factory ? trace_factory(i) : TraceFn{});
        const auto t1 = std::chrono::steady_clock::now();
        out.defended_metrics = compute_metrics(res.inferred, latent, k);
        out.defended = out.defended_metrics.accuracy;
        out.defended_metrics.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
        out.defended_metrics.unit_runtime = out.defended_metrics.runtime_seconds /
                                            (static_cast<double>(sg.targets.size()) / 100.0);
        report.subgraphs[static_cast<std::size_t>(i)] = std::move(out);
      });

  std::vector<double> orig, att, def;
  report.confusion_original = Eigen::MatrixXi::Zero(k, k);
  report.confusion_attacked = Eigen::MatrixXi::Zero(k, k);
  report.confusion_defended = Eigen::MatrixXi::Zero(k, k);
  for (const auto& s : report.subgraphs) {
    orig.push_back(s.original);
    att.push_back(s.attacked);
    def.push_back(s.defended);
    report.confusion_original += s.original_metrics.confusion;
    report.confusion_attacked += s.attacked_metrics.confusion;
    report.confusion_defended += s.defended_metrics.confusion;
  }
  report.original_mean = mean_of(orig);
  report.original_sd = sample_sd(orig);
  report.attacked_mean = mean_of(att);
  report.attacked_sd = sample_sd(att);
  report.defended_mean = mean_of(def);
  report.defended_sd = sample_sd(def);
  return report;
}

struct AlertItem {
  int outer = 0;
  int subgraph = 0;
  bool perturbed = false;
  double score_tv = 0.0;        // mean TV drift of dynamic phi from warm-up phi'
  double score_disagree = 0.0;  // secondary: inferred vs Y_a disagreement rate
};

struct AlertReport {
  std::vector<AlertItem> items;
  RocReport roc_tv;
  double auc_tv = 0.0;
  double auc_disagree = 0.0;
};

// Alert protocol: per outer seed, build a fresh pipeline, sample
// alert.n_graphs subgraphs, perturb a random subset of alert.n_perturbed of
// them, run alert-mode inference (no retraining) on each, and score the
// drift of the final dynamic transition from the warm-up transition. Scores
// pool across outer seeds into one ROC.
inline AlertReport run_alert_experiment(const ExperimentConfig& cfg, std::uint64_t master) {
  AlertReport report;
  InferenceSettings settings = cfg.inference_settings();
  for (int outer = 0; outer < cfg.alert.outer_seeds; ++outer) {
    const std::uint64_t m = derive_seed(master, "alert-outer", static_cast<std::uint64_t>(outer));
    const Pipeline pipe = prepare_pipeline(cfg, m);
    auto subs = sample_subgraphs(pipe.graph, pipe.part.test_ids, pipe.part.train_ids,
                                 cfg.subgraph.fraction, cfg.alert.n_graphs,
                                 derive_seed(m, "subgraphs"));

    std::vector<int> order(subs.size());
    for (std::size_t i = 0; i < subs.size(); ++i) order[i] = static_cast<int>(i);
    Rng select(derive_seed(m, "alert-select"));
    select.shuffle(order);
    std::vector<bool> perturb(subs.size(), false);
    for (int i = 0; i < cfg.alert.n_perturbed && i < static_cast<int>(subs.size()); ++i)
      perturb[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

    std::vector<AlertItem> items(subs.size());
    detail::parallel_for_indexed(
        static_cast<int>(subs.size()), cfg.jobs, [&](int i) {
          DynamicSubgraph& sg = subs[static_cast<std::size_t>(i)];
          if (perturb[static_cast<std::size_t>(i)]) {
            AttackConfig atk{cfg.attack.n_pert, cfg.attack.feature_multiplier,
                             cfg.attack.epsilon,
                             derive_seed(m, "attack", static_cast<std::uint64_t>(i))};
            attack_lf(sg, pipe.params, atk);
          }
          Rng rng(derive_seed(m, "inference", static_cast<std::uint64_t>(i)));
          const InferenceResult res = run_inference(
              sg.view, sg.targets, pipe.params, gather(pipe.full_bundle.labels, sg.node_ids),
              InferenceMode::alert, settings, pipe.warmup, rng);
          AlertItem item;
          item.outer = outer;
          item.subgraph = i;
          item.perturbed = perturb[static_cast<std::size_t>(i)];
          item.score_tv = alert_score(res.dynamic, pipe.warmup);
          item.score_disagree = disagreement_rate(res.inferred, res.auto_labels);
          items[static_cast<std::size_t>(i)] = item;
        });
    report.items.insert(report.items.end(), items.begin(), items.end());
  }

  std::vector<std::pair<double, bool>> tv_pairs, disagree_pairs;
  for (const auto& item : report.items) {
    tv_pairs.emplace_back(item.score_tv, item.perturbed);
    disagree_pairs.emplace_back(item.score_disagree, item.perturbed);
  }
  report.roc_tv = roc_auc(tv_pairs);
  report.auc_tv = report.roc_tv.auc;
  report.auc_disagree = roc_auc(disagree_pairs).auc;
  return report;
}

struct SweepRow {
  int ws = 0;
  int retrain = 0;
  bool valid = true;  // false when ws >= inference.epochs
  double accuracy = 0.0;
};

// Grid search over (WS, Retrain) with defense-mode inference on the attacked
// validation partition.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, std::uint64_t master) {
  if (cfg.sweep.ws_grid.empty() || cfg.sweep.retrain_grid.empty())
    throw ValidationError("run_sweep: empty grid");
  const Pipeline pipe = prepare_pipeline(cfg, master);
  DynamicSubgraph view = build_eval_view(pipe.graph, pipe.part.train_ids, pipe.part.val_ids);
  AttackConfig atk{cfg.attack.n_pert, cfg.attack.feature_multiplier, cfg.attack.epsilon,
                   derive_seed(master, "attack")};
  attack_lf(view, pipe.params, atk);
  const std::vector<int> latent = gather(view.view.latent_labels, view.targets);

  std::vector<SweepRow> rows;
  for (int ws : cfg.sweep.ws_grid)
    for (int retrain : cfg.sweep.retrain_grid)
      rows.push_back({ws, retrain, ws < cfg.inference.epochs, 0.0});

  detail::parallel_for_indexed(
      static_cast<int>(rows.size()), cfg.jobs, [&](int i) {
        SweepRow& row = rows[static_cast<std::size_t>(i)];
        if (!row.valid) return;
        InferenceSettings settings = cfg.inference_settings();
        settings.ws = row.ws;
        settings.retrain = row.retrain;
        Rng rng(derive_seed(master, "inference", static_cast<std::uint64_t>(i)));
        const InferenceResult res = run_inference(
            view.view, view.targets, pipe.params, gather(pipe.full_bundle.labels, view.node_ids),
            InferenceMode::defense, settings, pipe.warmup, rng);
        row.accuracy = accuracy_at(res.inferred, view.view, view.targets);
      });
  return rows;
}

struct AblationReport {
  // Mean defended accuracy per cell across the subgraph group.
  double fixed_phi_no_retrain = 0.0;
  double fixed_phi_retrain = 0.0;
  double dynamic_phi_no_retrain = 0.0;
  double dynamic_phi_retrain = 0.0;
  double attacked_mean = 0.0;
};

// 2x2 ablation {fixed phi' all epochs, dynamic phi} x {retrain, no retrain}
// on the attacked subgraph group; all four cells of a subgraph share one
// inference seed.
inline AblationReport run_ablation(const ExperimentConfig& cfg, std::uint64_t master) {
  const Pipeline pipe = prepare_pipeline(cfg, master);
  auto subs = sample_subgraphs(pipe.graph, pipe.part.test_ids, pipe.part.train_ids,
                               cfg.subgraph.fraction, cfg.subgraph.count,
                               derive_seed(master, "subgraphs"));
  std::vector<std::array<double, 4>> cells(subs.size());
  std::vector<double> attacked(subs.size());

  detail::parallel_for_indexed(
      static_cast<int>(subs.size()), cfg.jobs, [&](int i) {
        DynamicSubgraph& sg = subs[static_cast<std::size_t>(i)];
        AttackConfig atk{cfg.attack.n_pert, cfg.attack.feature_multiplier,
                         cfg.attack.epsilon,
                         derive_seed(master, "attack", static_cast<std::uint64_t>(i))};
        attack_lf(sg, pipe.params, atk);
        const PredictionBundle bundle =
            forward(pipe.params, normalize_adjacency(sg.view), sg.view.features);
        attacked[static_cast<std::size_t>(i)] =
            accuracy_at(gather(bundle.labels, sg.targets), sg.view, sg.targets);
        const std::uint64_t cell_seed =
            derive_seed(master, "inference", static_cast<std::uint64_t>(i));
        int cell = 0;
        for (bool dynamic_phi : {false, true}) {
          for (bool retrain_on : {false, true}) {
            InferenceSettings settings = cfg.inference_settings();
            settings.fixed_phi = !dynamic_phi;
            settings.retrain = retrain_on ? cfg.inference.retrain : 0;
            Rng rng(cell_seed);
            const InferenceResult res = run_inference(
                sg.view, sg.targets, pipe.params, gather(pipe.full_bundle.labels, sg.node_ids),
                InferenceMode::defense, settings, pipe.warmup, rng);
            cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(cell++)] =
                accuracy_at(res.inferred, sg.view, sg.targets);
          }
        }
      });

  auto mean_cell = [&](int c) {
    double s = 0.0;
    for (const auto& row : cells) s += row[static_cast<std::size_t>(c)];
    return s / static_cast<double>(cells.size());
  };
  AblationReport report;
  report.fixed_phi_no_retrain = mean_cell(0);
  report.fixed_phi_retrain = mean_cell(1);
  report.dynamic_phi_no_retrain = mean_cell(2);
  report.dynamic_phi_retrain = mean_cell(3);
  report.attacked_mean = mean_of(attacked);
  return report;
}

struct RuntimeRow {
  int size = 0;
  int n_targets = 0;
  double defense_avg = 0.0, defense_unit = 0.0;
  double alert_avg = 0.0, alert_unit = 0.0;
};

// Wall-clock of one inference run (defense and alert) per subgraph, averaged
// over runtime.reps attacked subgraphs per size. SBM density is rescaled so
// the expected degree stays constant across sizes; unit runtime is seconds
// per 100 target nodes. With inference.epochs == 0 only the forward pass is
// timed.
inline std::vector<RuntimeRow> measure_runtime(const ExperimentConfig& cfg,
                                               std::uint64_t master) {
  if (cfg.dataset.kind != "sbm")
    throw ValidationError("measure_runtime: requires an SBM dataset spec");
  std::vector<RuntimeRow> rows;
  for (int size : cfg.runtime.sizes) {
    ExperimentConfig scaled = cfg;
    const double factor = static_cast<double>(cfg.dataset.sbm.num_nodes) /
                          static_cast<double>(size);
    scaled.dataset.sbm.num_nodes = size;
    scaled.dataset.sbm.p_in = std::min(1.0, cfg.dataset.sbm.p_in * factor);
    scaled.dataset.sbm.p_out = std::min(1.0, cfg.dataset.sbm.p_out * factor);
    scaled.subgraph.count = cfg.runtime.reps;

    const std::uint64_t m = derive_seed(master, "runtime", static_cast<std::uint64_t>(size));
    const Pipeline pipe = prepare_pipeline(scaled, m);
    auto subs = sample_subgraphs(pipe.graph, pipe.part.test_ids, pipe.part.train_ids,
                                 scaled.subgraph.fraction, scaled.subgraph.count,
                                 derive_seed(m, "subgraphs"));
    RuntimeRow row;
    row.size = size;
    row.n_targets = static_cast<int>(subs.front().targets.size());

    std::vector<double> defense_times, alert_times;
    for (std::size_t i = 0; i < subs.size(); ++i) {
      DynamicSubgraph& sg = subs[i];
      AttackConfig atk{scaled.attack.n_pert, scaled.attack.feature_multiplier,
                       scaled.attack.epsilon, derive_seed(m, "attack", i)};
      attack_lf(sg, pipe.params, atk);

      if (cfg.inference.epochs == 0) {
        for (auto* bucket : {&defense_times, &alert_times}) {
          const auto t0 = std::chrono::steady_clock::now();
          const PredictionBundle b =
              forward(pipe.params, normalize_adjacency(sg.view), sg.view.features);
          (void)b;
          const auto t1 = std::chrono::steady_clock::now();
          bucket->push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        continue;
      }

      for (InferenceMode mode : {InferenceMode::defense, InferenceMode::alert}) {
        Rng rng(derive_seed(m, "inference", i));
        const auto t0 = std::chrono::steady_clock::now();
        const InferenceResult res = run_inference(
            sg.view, sg.targets, pipe.params, gather(pipe.full_bundle.labels, sg.node_ids),
            mode, cfg.inference_settings(), pipe.warmup, rng);
        const auto t1 = std::chrono::steady_clock::now();
        (void)res;
        (mode == InferenceMode::defense ? defense_times : alert_times)
            .push_back(std::chrono::duration<double>(t1 - t0).count());
      }
    }
    row.defense_avg = mean_of(defense_times);
    row.alert_avg = mean_of(alert_times);
    const double per100 = static_cast<double>(row.n_targets) / 100.0;
    row.defense_unit = row.defense_avg / per100;
    row.alert_unit = row.alert_avg / per100;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace graphss
