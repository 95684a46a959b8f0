#pragma once
// Experiment configuration: a flat JSON object with dotted keys
// ("inference.ws": 40), overridable one key at a time from the command line.
// A manifest bundles the resolved config with the command name and a config
// hash; re-running a command from its manifest reproduces the reports.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphss/dataset_io.hpp"
#include "graphss/inference.hpp"

namespace graphss {

using json = nlohmann::json;

struct SbmSpec {
  int num_nodes = 400;
  int num_blocks = 2;
  double p_in = 0.2, p_out = 0.01;
  int num_features = 40;
  double q_on = 0.8, q_off = 0.05;
};

struct DatasetSpec {
  std::string kind = "sbm";  // "sbm" | "files"
  std::string dir;           // expands to <dir>/{edges,features,labels}.csv, meta.json
  std::string edges, features, labels, meta;
  SbmSpec sbm;
};

struct ClassifierSpec {
  std::string variant = "gcn";
  int hidden = 200;
  int epochs = 200;
  double learning_rate = 1e-3;
  int sgc_hops = 2;
};

struct PartitionSpec {
  double train = 0.4, val = 0.2, test = 0.4;
};

struct SubgraphSpec {
  double fraction = 0.2;
  int count = 5;  // n_graphs
};

struct AttackSpec {
  int n_pert = 2;
  int feature_multiplier = 10;
  double epsilon = 1.0;
};

struct InferenceSpec {
  int ws = 40;
  int epochs = 100;
  int retrain = 60;
  double alpha = 1.0;
  bool refresh_auto_labels = false;
};

struct AlertSpec {
  int n_graphs = 10;
  int n_perturbed = 3;
  int outer_seeds = 5;
};

struct SweepSpec {
  std::vector<int> ws_grid{5, 10, 20, 40, 60, 80};
  std::vector<int> retrain_grid{20, 60, 100};
};

struct RuntimeSpec {
  std::vector<int> sizes{500, 4000};
  int reps = 3;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ClassifierSpec classifier;
  double noise_ratio = 0.1;
  PartitionSpec partition;
  SubgraphSpec subgraph;
  AttackSpec attack;
  InferenceSpec inference;
  AlertSpec alert;
  SweepSpec sweep;
  RuntimeSpec runtime;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool deterministic = true;
  bool trace = false;
  std::string checkpoint;  // optional: reuse a trained classifier

  Variant variant() const { return variant_from_name(classifier.variant); }

  TrainConfig train_config(std::uint64_t train_seed) const {
    TrainConfig t;
    t.epochs = classifier.epochs;
    t.learning_rate = classifier.learning_rate;
    t.hidden = classifier.hidden;
    t.sgc_hops = classifier.sgc_hops;
    t.seed = train_seed;
    return t;
  }

  DatasetPaths resolved_paths() const {
    DatasetPaths p = dataset.dir.empty() ? DatasetPaths{} : dataset_paths_in(dataset.dir);
    if (!dataset.edges.empty()) p.edges = dataset.edges;
    if (!dataset.features.empty()) p.features = dataset.features;
    if (!dataset.labels.empty()) p.labels = dataset.labels;
    if (!dataset.meta.empty()) p.meta = dataset.meta;
    return p;
  }

  void validate() const {
    if (dataset.kind != "sbm" && dataset.kind != "files")
      throw ValidationError("dataset.kind must be 'sbm' or 'files'");
    if (dataset.kind == "files") {
      const auto p = resolved_paths();
      if (p.edges.empty() || p.features.empty() || p.labels.empty() || p.meta.empty())
        throw ValidationError("dataset.kind=files requires dataset.dir or explicit paths");
    }
    variant();  // validates the name
    if (classifier.hidden <= 0 || classifier.epochs < 0 || classifier.sgc_hops < 1)
      throw ValidationError("classifier settings out of range");
    if (!(classifier.learning_rate > 0.0))
      throw ValidationError("classifier.learning_rate must be > 0");
    if (!(noise_ratio >= 0.0 && noise_ratio <= 1.0))
      throw ValidationError("noise.ratio outside [0,1]");
    if (partition.train < 0 || partition.val < 0 || partition.test < 0 ||
        std::abs(partition.train + partition.val + partition.test - 1.0) > 1e-9)
      throw ValidationError("partition fractions must be nonnegative and sum to 1");
    if (!(subgraph.fraction > 0.0 && subgraph.fraction <= 1.0))
      throw ValidationError("subgraph.fraction outside (0,1]");
    if (subgraph.count <= 0) throw ValidationError("subgraph.count must be positive");
    if (attack.n_pert < 0 || attack.feature_multiplier < 0)
      throw ValidationError("attack budgets must be nonnegative");
    if (!(attack.epsilon > 0.0)) throw ValidationError("attack.epsilon must be > 0");
    if (inference.ws < 0 || inference.epochs < 0 || inference.retrain < 0)
      throw ValidationError("inference settings must be nonnegative");
    if (!(inference.alpha > 0.0)) throw ValidationError("inference.alpha must be > 0");
    if (alert.n_graphs <= 0 || alert.n_perturbed < 0 || alert.outer_seeds <= 0)
      throw ValidationError("alert settings out of range");
    if (runtime.reps <= 0) throw ValidationError("runtime.reps must be positive");
    for (int s : runtime.sizes)
      if (s <= 0) throw ValidationError("runtime.sizes must be positive");
    if (jobs <= 0) throw ValidationError("jobs must be positive");
  }

  InferenceSettings inference_settings() const {
    InferenceSettings s;
    s.ws = inference.ws;
    s.epochs = inference.epochs;
    s.retrain = inference.retrain;
    s.alpha = inference.alpha;
    s.learning_rate = classifier.learning_rate;
    s.refresh_auto_labels = inference.refresh_auto_labels;
    return s;
  }
};

namespace detail {

struct ConfigKey {
  const char* key;
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;
};

template <typename T>
T checked_get(const json& v, const char* key) {
  try {
    return v.get<T>();
  } catch (const std::exception&) {
    throw ValidationError(std::string("config key '") + key + "': invalid value " + v.dump());
  }
}

inline std::vector<int> int_list(const json& v, const char* key) {
  if (v.is_array()) return checked_get<std::vector<int>>(v, key);
  if (v.is_number_integer()) return {v.get<int>()};
  if (v.is_string()) {  // accept "500,4000"
    std::vector<int> out;
    std::stringstream ss(v.get<std::string>());
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        out.push_back(std::stoi(tok));
      } catch (...) {
        throw ValidationError(std::string("config key '") + key + "': bad list entry '" + tok + "'");
      }
    }
    if (!out.empty()) return out;
  }
  throw ValidationError(std::string("config key '") + key + "': expected integer list");
}

inline const std::vector<ConfigKey>& config_registry() {
#define GRAPHSS_KEY(NAME, FIELD, TYPE)                                            \
  ConfigKey{NAME, [](const ExperimentConfig& c) { return json(c.FIELD); },        \
            [](ExperimentConfig& c, const json& v) { c.FIELD = checked_get<TYPE>(v, NAME); }}
#define GRAPHSS_LIST_KEY(NAME, FIELD)                                             \
  ConfigKey{NAME, [](const ExperimentConfig& c) { return json(c.FIELD); },        \
            [](ExperimentConfig& c, const json& v) { c.FIELD = int_list(v, NAME); }}
  static const std::vector<ConfigKey> registry = {
      GRAPHSS_KEY("dataset.kind", dataset.kind, std::string),
      GRAPHSS_KEY("dataset.dir", dataset.dir, std::string),
      GRAPHSS_KEY("dataset.edges", dataset.edges, std::string),
      GRAPHSS_KEY("dataset.features", dataset.features, std::string),
      GRAPHSS_KEY("dataset.labels", dataset.labels, std::string),
      GRAPHSS_KEY("dataset.meta", dataset.meta, std::string),
      GRAPHSS_KEY("dataset.sbm.num_nodes", dataset.sbm.num_nodes, int),
      GRAPHSS_KEY("dataset.sbm.num_blocks", dataset.sbm.num_blocks, int),
      GRAPHSS_KEY("dataset.sbm.p_in", dataset.sbm.p_in, double),
      GRAPHSS_KEY("dataset.sbm.p_out", dataset.sbm.p_out, double),
      GRAPHSS_KEY("dataset.sbm.num_features", dataset.sbm.num_features, int),
      GRAPHSS_KEY("dataset.sbm.q_on", dataset.sbm.q_on, double),
      GRAPHSS_KEY("dataset.sbm.q_off", dataset.sbm.q_off, double),
      GRAPHSS_KEY("classifier.variant", classifier.variant, std::string),
      GRAPHSS_KEY("classifier.hidden", classifier.hidden, int),
      GRAPHSS_KEY("classifier.epochs", classifier.epochs, int),
      GRAPHSS_KEY("classifier.learning_rate", classifier.learning_rate, double),
      GRAPHSS_KEY("classifier.sgc_hops", classifier.sgc_hops, int),
      GRAPHSS_KEY("noise.ratio", noise_ratio, double),
      GRAPHSS_KEY("partition.train", partition.train, double),
      GRAPHSS_KEY("partition.val", partition.val, double),
      GRAPHSS_KEY("partition.test", partition.test, double),
      GRAPHSS_KEY("subgraph.fraction", subgraph.fraction, double),
      GRAPHSS_KEY("subgraph.count", subgraph.count, int),
      GRAPHSS_KEY("attack.n_pert", attack.n_pert, int),
      GRAPHSS_KEY("attack.feature_multiplier", attack.feature_multiplier, int),
      GRAPHSS_KEY("attack.epsilon", attack.epsilon, double),
      GRAPHSS_KEY("inference.ws", inference.ws, int),
      GRAPHSS_KEY("inference.epochs", inference.epochs, int),
      GRAPHSS_KEY("inference.retrain", inference.retrain, int),
      GRAPHSS_KEY("inference.alpha", inference.alpha, double),
      GRAPHSS_KEY("inference.refresh_auto_labels", inference.refresh_auto_labels, bool),
      GRAPHSS_KEY("alert.n_graphs", alert.n_graphs, int),
      GRAPHSS_KEY("alert.n_perturbed", alert.n_perturbed, int),
      GRAPHSS_KEY("alert.outer_seeds", alert.outer_seeds, int),
      GRAPHSS_LIST_KEY("sweep.ws_grid", sweep.ws_grid),
      GRAPHSS_LIST_KEY("sweep.retrain_grid", sweep.retrain_grid),
      GRAPHSS_LIST_KEY("runtime.sizes", runtime.sizes),
      GRAPHSS_KEY("runtime.reps", runtime.reps, int),
      GRAPHSS_KEY("seed", seed, std::uint64_t),
      GRAPHSS_KEY("jobs", jobs, int),
      GRAPHSS_KEY("deterministic", deterministic, bool),
      GRAPHSS_KEY("trace", trace, bool),
      GRAPHSS_KEY("checkpoint", checkpoint, std::string),
  };
#undef GRAPHSS_KEY
#undef GRAPHSS_LIST_KEY
  return registry;
}

}  // namespace detail

inline void apply_config_key(ExperimentConfig& cfg, const std::string& key, const json& value) {
  for (const auto& entry : detail::config_registry()) {
    if (key == entry.key) {
      entry.set(cfg, value);
      return;
    }
  }
  throw ValidationError("unknown config key '" + key + "'");
}

// Command-line override values arrive as strings; interpret them as JSON when
// possible (numbers, booleans, arrays), otherwise as plain strings.
inline void apply_config_override(ExperimentConfig& cfg, const std::string& key,
                                  const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (...) {
    parsed = value;
  }
  apply_config_key(cfg, key, parsed);
}

inline json config_to_flat_json(const ExperimentConfig& cfg) {
  json out = json::object();
  for (const auto& entry : detail::config_registry()) out[entry.key] = entry.get(cfg);
  return out;
}

inline ExperimentConfig config_from_flat_json(const json& flat) {
  if (!flat.is_object()) throw ValidationError("config must be a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : flat.items()) apply_config_key(cfg, key, value);
  return cfg;
}

// Accepts either a flat config object or a manifest ({"command", "config"}).
inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("command"))
    return config_from_flat_json(j["config"]);
  return config_from_flat_json(j);
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::uint64_t h = detail::fnv1a64(config_to_flat_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json make_manifest(const std::string& command, const ExperimentConfig& cfg,
                          const std::string& timestamp) {
  return json{{"command", command},
              {"config", config_to_flat_json(cfg)},
              {"config_hash", config_hash(cfg)},
              {"created", timestamp}};
}

}  // namespace graphss
