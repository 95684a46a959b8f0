// graphss command-line tool: dataset generation, classifier training, L&F
// attacks, and the defense / alert / sweep / ablation / runtime experiment
// drivers. Every command resolves one ExperimentConfig (config file plus
// dotted-key overrides), writes a manifest.json next to its reports, and is
// reproducible byte for byte from that manifest. Exit codes: 0 success,
// 2 validation error, 3 runtime failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "graphss/graphss.hpp"

namespace fs = std::filesystem;
using namespace graphss;

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_csv_matrix(const fs::path& path, const Mat& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ",";
      out += fmt_real(m(r, c));
    }
    out += "\n";
  }
  write_text(path, out);
}

json metrics_json(const MetricsReport& m) {
  json confusion = json::array();
  for (Eigen::Index r = 0; r < m.confusion.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.confusion.cols(); ++c) row.push_back(m.confusion(r, c));
    confusion.push_back(row);
  }
  json recall = json::array();
  for (Eigen::Index c = 0; c < m.per_class_recall.size(); ++c)
    recall.push_back(m.per_class_recall(c));
  return json{{"accuracy", m.accuracy}, {"confusion", confusion}, {"per_class_recall", recall}};
}

json attack_log_json(const AttackLogEntry& e) {
  return json{{"victim", e.victim}, {"kind", e.kind}, {"target", e.target},
              {"op", e.op}, {"score", e.score}};
}

void write_attack_log(const fs::path& path, const std::vector<AttackLogEntry>& log) {
  std::string out;
  for (const auto& e : log) out += attack_log_json(e).dump() + "\n";
  write_text(path, out);
}

std::string trace_line(const TraceRecord& r) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < r.transition_rows.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.transition_rows.cols(); ++j)
      row.push_back(r.transition_rows(i, j));
    rows.push_back(row);
  }
  json j{{"epoch", r.epoch},
         {"phase", r.warmup_phase ? "warmup" : "dynamic"},
         {"retrained", r.retrained},
         {"transition_rows", rows}};
  if (r.accuracy_vs_latent >= 0.0) j["accuracy_vs_latent"] = r.accuracy_vs_latent;
  return j.dump();
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 0;
  bool deterministic = false;
  bool trace = false;
  bool seed_set = false, jobs_set = false;
};

ExperimentConfig resolve_config(const CommonFlags& flags,
                                const std::vector<std::string>& extras) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = load_config_file(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (flags.jobs_set) cfg.jobs = flags.jobs;
  if (flags.deterministic) cfg.deterministic = true;
  if (flags.trace) cfg.trace = true;

  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string token = extras[i];
    if (token.rfind("--", 0) != 0)
      throw ValidationError("unexpected argument '" + token + "' (expected --<config.key> <value>)");
    token = token.substr(2);
    std::string value;
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      value = token.substr(eq + 1);
      token = token.substr(0, eq);
    } else {
      if (i + 1 >= extras.size())
        throw ValidationError("missing value for override --" + token);
      value = extras[++i];
    }
    apply_config_override(cfg, token, value);
  }
  cfg.validate();
  if (cfg.deterministic) cfg.jobs = 1;
  return cfg;
}

fs::path resolve_out_dir(const CommonFlags& flags, const std::string& command) {
  std::string dir = flags.out_dir;
  if (dir.empty())
    if (const char* env = std::getenv("GRAPHSS_OUT_DIR")) dir = env;
  if (dir.empty()) dir = (fs::path("out") / command).string();
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const ExperimentConfig& cfg) {
  write_json(out_dir / "manifest.json", make_manifest(command, cfg, iso_utc_now()));
}

int cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.dataset.kind != "sbm")
    throw ValidationError("gen-data requires dataset.kind=sbm");
  const auto& s = cfg.dataset.sbm;
  const Graph g = generate_sbm(s.num_nodes, s.num_blocks, s.p_in, s.p_out,
                               s.num_features, s.q_on, s.q_off, derive_seed(cfg.seed, "sbm"));
  const auto paths = dataset_paths_in(out.string());
  save_graph(g, paths.edges, paths.features, paths.labels, paths.meta);
  write_json(out / "gen_report.json",
             json{{"num_nodes", g.num_nodes},
                  {"num_classes", g.num_classes},
                  {"num_features", g.num_features()},
                  {"num_undirected_edges", g.num_directed_edges() / 2}});
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
  Graph graph;
  if (cfg.dataset.kind == "files") {
    const auto p = cfg.resolved_paths();
    graph = load_graph(p.edges, p.features, p.labels, p.meta);
  } else {
    const auto& s = cfg.dataset.sbm;
    graph = generate_sbm(s.num_nodes, s.num_blocks, s.p_in, s.p_out, s.num_features,
                         s.q_on, s.q_off, derive_seed(cfg.seed, "sbm"));
  }
  const Partition part = partition_nodes(
      graph, {cfg.partition.train, cfg.partition.val, cfg.partition.test},
      derive_seed(cfg.seed, "partition"));
  const NoisyLabels noisy = inject_label_noise(graph.latent_labels, cfg.noise_ratio,
                                               graph.num_classes,
                                               derive_seed(cfg.seed, "noise"));
  const std::uint64_t train_seed = derive_seed(cfg.seed, "train");
  TrainSession session(graph, cfg.variant(), cfg.train_config(train_seed));
  session.train(part.train_ids, noisy.values);
  save_checkpoint(session.params(), train_seed, cfg.classifier.epochs,
                  (out / "checkpoint.bin").string());

  const PredictionBundle bundle = session.predict();
  auto acc_on = [&](const std::vector<int>& ids, const std::vector<int>& ref) {
    int correct = 0;
    for (int n : ids) correct += bundle.labels[static_cast<std::size_t>(n)] ==
                                 ref[static_cast<std::size_t>(n)];
    return static_cast<double>(correct) / static_cast<double>(ids.size());
  };
  write_json(out / "train_report.json",
             json{{"final_loss", session.last_loss()},
                  {"train_accuracy_clean", acc_on(part.train_ids, graph.latent_labels)},
                  {"val_accuracy_clean", acc_on(part.val_ids, graph.latent_labels)},
                  {"test_accuracy_clean", acc_on(part.test_ids, graph.latent_labels)},
                  {"train_accuracy_noisy", acc_on(part.train_ids, noisy.values)},
                  {"noise_flips", noisy.flipped_ids.size()},
                  {"partition_sizes", json{{"train", part.train_ids.size()},
                                           {"val", part.val_ids.size()},
                                           {"test", part.test_ids.size()}}}});
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const fs::path& out) {
  const Pipeline pipe = prepare_pipeline(cfg, cfg.seed);
  auto subs = sample_subgraphs(pipe.graph, pipe.part.test_ids, pipe.part.train_ids,
                               cfg.subgraph.fraction, cfg.subgraph.count,
                               derive_seed(cfg.seed, "subgraphs"));
  json per_subgraph = json::array();
  for (std::size_t i = 0; i < subs.size(); ++i) {
    DynamicSubgraph& sg = subs[i];
    const std::vector<int> latent = gather(sg.view.latent_labels, sg.targets);
    const PredictionBundle clean =
        forward(pipe.params, normalize_adjacency(sg.view), sg.view.features);
    const double original =
        compute_metrics(gather(clean.labels, sg.targets), latent, pipe.graph.num_classes).accuracy;
    AttackConfig atk{cfg.attack.n_pert, cfg.attack.feature_multiplier, cfg.attack.epsilon,
                     derive_seed(cfg.seed, "attack", i)};
    attack_lf(sg, pipe.params, atk);
    const PredictionBundle attacked =
        forward(pipe.params, normalize_adjacency(sg.view), sg.view.features);
    const double after =
        compute_metrics(gather(attacked.labels, sg.targets), latent, pipe.graph.num_classes).accuracy;
    write_attack_log(out / ("attack_log_" + std::to_string(i) + ".jsonl"), sg.attack_log);
    per_subgraph.push_back(json{{"subgraph", i},
                                {"original_accuracy", original},
                                {"attacked_accuracy", after},
                                {"flips", sg.attack_log.size()},
                                {"shortfall", sg.shortfall}});
  }
  write_json(out / "attack_report.json", json{{"subgraphs", per_subgraph}});
  return 0;
}

int cmd_defend(const ExperimentConfig& cfg, const fs::path& out) {
  std::vector<std::vector<TraceRecord>> traces(static_cast<std::size_t>(cfg.subgraph.count));
  TraceFactory factory;
  if (cfg.trace)
    factory = [&traces](int i) {
      auto* slot = &traces[static_cast<std::size_t>(i)];
      return [slot](const TraceRecord& r) { slot->push_back(r); };
    };
  const DefenseReport rep = run_defense_experiment(cfg, cfg.seed, factory);

  json per_subgraph = json::array();
  for (const auto& s : rep.subgraphs) {
    per_subgraph.push_back(json{{"subgraph", s.index},
                                {"original", metrics_json(s.original_metrics)},
                                {"attacked", metrics_json(s.attacked_metrics)},
                                {"defended", metrics_json(s.defended_metrics)},
                                {"shortfall", s.shortfall},
                                {"inference_seconds", s.defended_metrics.runtime_seconds},
                                {"unit_runtime", s.defended_metrics.unit_runtime}});
    write_attack_log(out / ("attack_log_" + std::to_string(s.index) + ".jsonl"), s.attack_log);
  }
  write_json(out / "defense_report.json",
             json{{"original_mean", rep.original_mean}, {"original_sd", rep.original_sd},
                  {"attacked_mean", rep.attacked_mean}, {"attacked_sd", rep.attacked_sd},
                  {"defended_mean", rep.defended_mean}, {"defended_sd", rep.defended_sd},
                  {"subgraphs", per_subgraph}});

  std::string csv = "subgraph,original,attacked,defended,shortfall\n";
  for (const auto& s : rep.subgraphs)
    csv += std::to_string(s.index) + "," + fmt_real(s.original) + "," + fmt_real(s.attacked) +
           "," + fmt_real(s.defended) + "," + std::to_string(s.shortfall) + "\n";
  csv += "mean," + fmt_real(rep.original_mean) + "," + fmt_real(rep.attacked_mean) + "," +
         fmt_real(rep.defended_mean) + ",\n";
  csv += "sd," + fmt_real(rep.original_sd) + "," + fmt_real(rep.attacked_sd) + "," +
         fmt_real(rep.defended_sd) + ",\n";
  write_text(out / "defense_report.csv", csv);

  write_csv_matrix(out / "confusion_original.csv", log_scale_confusion(rep.confusion_original));
  write_csv_matrix(out / "confusion_attacked.csv", log_scale_confusion(rep.confusion_attacked));
  write_csv_matrix(out / "confusion_defended.csv", log_scale_confusion(rep.confusion_defended));

  if (cfg.trace)
    for (std::size_t i = 0; i < traces.size(); ++i) {
      std::string lines;
      for (const auto& r : traces[i]) lines += trace_line(r) + "\n";
      write_text(out / ("trace_" + std::to_string(i) + ".jsonl"), lines);
    }
  return 0;
}

int cmd_alert(const ExperimentConfig& cfg, const fs::path& out) {
  const AlertReport rep = run_alert_experiment(cfg, cfg.seed);
  json items = json::array();
  for (const auto& it : rep.items)
    items.push_back(json{{"outer_seed", it.outer},
                         {"subgraph", it.subgraph},
                         {"perturbed", it.perturbed},
                         {"score_tv", it.score_tv},
                         {"score_disagreement", it.score_disagree}});
  write_json(out / "alert_report.json",
             json{{"auc_tv", rep.auc_tv}, {"auc_disagreement", rep.auc_disagree},
                  {"items", items}});
  std::string csv = "threshold,fpr,tpr\n";
  for (const auto& p : rep.roc_tv.points)
    csv += fmt_real(p.threshold) + "," + fmt_real(p.fpr) + "," + fmt_real(p.tpr) + "\n";
  write_text(out / "roc_points.csv", csv);
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const fs::path& out) {
  const auto rows = run_sweep(cfg, cfg.seed);
  std::string csv = "ws,retrain,valid,accuracy\n";
  json jrows = json::array();
  for (const auto& r : rows) {
    csv += std::to_string(r.ws) + "," + std::to_string(r.retrain) + "," +
           (r.valid ? "1" : "0") + "," + fmt_real(r.accuracy) + "\n";
    jrows.push_back(json{{"ws", r.ws}, {"retrain", r.retrain},
                         {"valid", r.valid}, {"accuracy", r.accuracy}});
  }
  write_text(out / "sweep.csv", csv);
  write_json(out / "sweep_report.json", json{{"rows", jrows}});
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, const fs::path& out) {
  const AblationReport rep = run_ablation(cfg, cfg.seed);
  write_json(out / "ablation_report.json",
             json{{"fixed_phi_no_retrain", rep.fixed_phi_no_retrain},
                  {"fixed_phi_retrain", rep.fixed_phi_retrain},
                  {"dynamic_phi_no_retrain", rep.dynamic_phi_no_retrain},
                  {"dynamic_phi_retrain", rep.dynamic_phi_retrain},
                  {"attacked_mean", rep.attacked_mean}});
  std::string csv = "cell,accuracy\n";
  csv += "fixed_phi_no_retrain," + fmt_real(rep.fixed_phi_no_retrain) + "\n";
  csv += "fixed_phi_retrain," + fmt_real(rep.fixed_phi_retrain) + "\n";
  csv += "dynamic_phi_no_retrain," + fmt_real(rep.dynamic_phi_no_retrain) + "\n";
  csv += "dynamic_phi_retrain," + fmt_real(rep.dynamic_phi_retrain) + "\n";
  write_text(out / "ablation_report.csv", csv);
  return 0;
}

int cmd_runtime(const ExperimentConfig& cfg, const fs::path& out) {
  const auto rows = measure_runtime(cfg, cfg.seed);
  std::string csv = "size,n_targets,defense_avg,defense_unit,alert_avg,alert_unit\n";
  json jrows = json::array();
  for (const auto& r : rows) {
    csv += std::to_string(r.size) + "," + std::to_string(r.n_targets) + "," +
           fmt_real(r.defense_avg) + "," + fmt_real(r.defense_unit) + "," +
           fmt_real(r.alert_avg) + "," + fmt_real(r.alert_unit) + "\n";
    jrows.push_back(json{{"size", r.size}, {"n_targets", r.n_targets},
                         {"defense_avg", r.defense_avg}, {"defense_unit", r.defense_unit},
                         {"alert_avg", r.alert_avg}, {"alert_unit", r.alert_unit}});
  }
  write_text(out / "runtime_report.csv", csv);
  write_json(out / "runtime_report.json", json{{"rows", jrows}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GraphSS: Bayesian self-supervised label-transition inference for "
               "node classifiers on dynamic graphs"};
  app.require_subcommand(1);
  app.allow_extras(true);

  CommonFlags flags;
  app.add_option("--config", flags.config_path, "Config file (flat JSON or a manifest.json)");
  app.add_option("--out-dir", flags.out_dir, "Output directory (default $GRAPHSS_OUT_DIR or ./out/<cmd>)");
  auto* seed_opt = app.add_option("--seed", flags.seed, "Master seed");
  auto* jobs_opt = app.add_option("--jobs", flags.jobs, "Parallel trials (default 1)");
  app.add_flag("--deterministic", flags.deterministic, "Force single-threaded trials");
  app.add_flag("--trace", flags.trace, "Write per-epoch inference traces");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "Generate an SBM dataset in the standard file format"},
      {"train", "Train a node classifier on noisy labels and write a checkpoint"},
      {"attack", "Run the greedy L&F evasion attack on sampled subgraphs"},
      {"defend", "Defense experiment: Original / Attack / GraphSS accuracies"},
      {"alert", "Alert experiment: transition-drift ROC over perturbed subgraphs"},
      {"sweep", "Grid search over WS x Retrain on the validation partition"},
      {"ablate", "2x2 ablation: {fixed, dynamic} phi x {retrain, no retrain}"},
      {"runtime", "Average and unit runtime of defense and alert across sizes"}};
  for (const auto& [name, desc] : commands) {
    auto* sub = app.add_subcommand(name, desc);
    sub->allow_extras(true);
    sub->fallthrough(true);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  flags.seed_set = seed_opt->count() > 0;
  flags.jobs_set = jobs_opt->count() > 0;
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    std::vector<std::string> extras = app.remaining(true);
    const ExperimentConfig cfg = resolve_config(flags, extras);
    const fs::path out = resolve_out_dir(flags, command);
    write_manifest(out, command, cfg);
    if (command == "gen-data") return cmd_gen_data(cfg, out);
    if (command == "train") return cmd_train(cfg, out);
    if (command == "attack") return cmd_attack(cfg, out);
    if (command == "defend") return cmd_defend(cfg, out);
    if (command == "alert") return cmd_alert(cfg, out);
    if (command == "sweep") return cmd_sweep(cfg, out);
    if (command == "ablate") return cmd_ablate(cfg, out);
    if (command == "runtime") return cmd_runtime(cfg, out);
    throw ValidationError("unknown command " + command);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}
