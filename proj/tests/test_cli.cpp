#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "graphss/config.hpp"
#include "graphss/dataset_io.hpp"

using namespace graphss;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return GRAPHSS_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("graphss_cli_" + tag + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Small dataset/protocol so the whole CLI pipeline stays fast.
const char* kTinyFlags =
    " --dataset.sbm.num_nodes 100 --dataset.sbm.p_in 0.3 --dataset.sbm.p_out 0.02"
    " --dataset.sbm.num_features 12 --classifier.hidden 16 --classifier.epochs 50"
    " --subgraph.count 2 --inference.ws 6 --inference.epochs 18 --inference.retrain 10";

}  // namespace

TEST_CASE("gen-data writes a loadable dataset", "[cli]") {
  TempDir dir("gen");
  REQUIRE(run_cli("gen-data --seed 4 --out-dir " + dir.path.string() + kTinyFlags) == 0);
  const auto p = dataset_paths_in(dir.path.string());
  const Graph g = load_graph(p.edges, p.features, p.labels, p.meta);
  REQUIRE(g.num_nodes == 100);
  REQUIRE(g.num_features() == 12);
  REQUIRE(fs::exists(dir.path / "manifest.json"));

  // deterministic regeneration
  TempDir dir2("gen2");
  REQUIRE(run_cli("gen-data --seed 4 --out-dir " + dir2.path.string() + kTinyFlags) == 0);
  REQUIRE(slurp(dir.path / "edges.csv") == slurp(dir2.path / "edges.csv"));
  REQUIRE(slurp(dir.path / "features.csv") == slurp(dir2.path / "features.csv"));
}

TEST_CASE("train writes checkpoint and metrics; defend consumes them", "[cli]") {
  TempDir train_dir("train");
  REQUIRE(run_cli("train --seed 4 --out-dir " + train_dir.path.string() + kTinyFlags) == 0);
  REQUIRE(fs::exists(train_dir.path / "checkpoint.bin"));
  const json report = json::parse(slurp(train_dir.path / "train_report.json"));
  REQUIRE(report["test_accuracy_clean"].get<double>() > 0.8);

  TempDir defend_dir("defend");
  REQUIRE(run_cli("defend --seed 4 --out-dir " + defend_dir.path.string() + kTinyFlags +
                  " --checkpoint " + (train_dir.path / "checkpoint.bin").string()) == 0);
  const json defense = json::parse(slurp(defend_dir.path / "defense_report.json"));
  REQUIRE(defense["original_mean"].get<double>() > 0.8);
  REQUIRE(fs::exists(defend_dir.path / "confusion_defended.csv"));
}

TEST_CASE("noisier training hurts validation accuracy", "[cli]") {
  TempDir clean("nr0"), noisy("nr3");
  REQUIRE(run_cli("train --seed 4 --noise.ratio 0 --out-dir " + clean.path.string() +
                  kTinyFlags) == 0);
  REQUIRE(run_cli("train --seed 4 --noise.ratio 0.3 --out-dir " + noisy.path.string() +
                  kTinyFlags) == 0);
  const double acc_clean =
      json::parse(slurp(clean.path / "train_report.json"))["val_accuracy_clean"].get<double>();
  const double acc_noisy =
      json::parse(slurp(noisy.path / "train_report.json"))["val_accuracy_clean"].get<double>();
  REQUIRE(acc_clean >= acc_noisy - 0.01);  // 1-point slack
}

TEST_CASE("defend with zero attack intensity reports no drop", "[cli]") {
  TempDir dir("nopert");
  REQUIRE(run_cli("defend --seed 5 --attack.n_pert 0 --out-dir " + dir.path.string() +
                  kTinyFlags) == 0);
  const json report = json::parse(slurp(dir.path / "defense_report.json"));
  REQUIRE(report["attacked_mean"].get<double>() ==
          Catch::Approx(report["original_mean"].get<double>()).margin(1e-12));
}

TEST_CASE("alert with unperturbed-only group exits 2", "[cli]") {
  TempDir dir("alert0");
  const int rc = run_cli("alert --seed 5 --alert.n_perturbed 0 --alert.n_graphs 3"
                         " --alert.outer_seeds 1 --out-dir " + dir.path.string() + kTinyFlags);
  REQUIRE(rc == 2);
}

TEST_CASE("unknown config keys exit 2", "[cli]") {
  TempDir dir("badkey");
  REQUIRE(run_cli("train --seed 1 --no.such.key 5 --out-dir " + dir.path.string()) == 2);
}

TEST_CASE("rerunning from the manifest reproduces reports byte for byte", "[cli]") {
  TempDir first("m1"), second("m2");
  REQUIRE(run_cli("defend --seed 6 --out-dir " + first.path.string() + kTinyFlags) == 0);
  REQUIRE(run_cli("defend --config " + (first.path / "manifest.json").string() +
                  " --out-dir " + second.path.string()) == 0);
  REQUIRE(slurp(first.path / "defense_report.json") ==
          slurp(second.path / "defense_report.json"));
  REQUIRE(slurp(first.path / "defense_report.csv") ==
          slurp(second.path / "defense_report.csv"));
}

TEST_CASE("GRAPHSS_OUT_DIR is used when --out-dir is absent", "[cli]") {
  TempDir dir("envdir");
  const std::string cmd = "GRAPHSS_OUT_DIR=" + dir.path.string() + " " + cli_path() +
                          " gen-data --seed 4" + kTinyFlags + " >/dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  REQUIRE(fs::exists(dir.path / "meta.json"));
}

TEST_CASE("trace flag writes per-epoch records", "[cli]") {
  TempDir dir("trace");
  REQUIRE(run_cli("defend --seed 7 --trace --subgraph.count 1 --out-dir " +
                  dir.path.string() + kTinyFlags) == 0);
  const auto trace = slurp(dir.path / "trace_0.jsonl");
  std::stringstream ss(trace);
  std::string line;
  int lines = 0;
  while (std::getline(ss, line)) {
    const json rec = json::parse(line);
    REQUIRE(rec.contains("epoch"));
    REQUIRE(rec.contains("phase"));
    ++lines;
  }
  REQUIRE(lines == 18);
}
