#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "graphss/classifier.hpp"

using namespace graphss;

namespace {

Graph random_graph(int n, int d, int k, std::uint64_t seed, double p_edge = 0.5) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.next_unit() < p_edge) edges.emplace_back(i, j);
  Mat x(n, d);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < d; ++f) x(i, f) = 2.0 * rng.next_unit() - 1.0;
  std::vector<int> z(static_cast<std::size_t>(n));
  for (auto& v : z) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  return build_graph(n, k, edges, std::move(x), std::move(z));
}

ClassifierParams random_params(Variant variant, int d, int h, int k, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.hidden = h;
  cfg.seed = seed;
  return init_params(variant, d, k, cfg);
}

// Dense reference forward pass written with plain loops over a dense
// normalized adjacency, independent of the sparse implementation path.
Mat dense_forward_probs(const ClassifierParams& p, const Graph& g) {
  const int n = g.num_nodes;
  Mat a = Mat::Zero(n, n);
  for (int v = 0; v < n; ++v) {
    a(v, v) = 1.0;
    for (int u : g.neighbors(v)) a(v, u) = 1.0;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(i, j) != 0.0)
        a(i, j) /= std::sqrt((g.degree(i) + 1.0) * (g.degree(j) + 1.0));

  Mat logits;
  if (p.variant == Variant::gcn) {
    Mat h = a * g.features * p.weights[0];
    for (int i = 0; i < h.rows(); ++i)
      for (int j = 0; j < h.cols(); ++j) h(i, j) = std::max(0.0, h(i, j));
    logits = a * h * p.weights[1];
  } else {
    Mat prop = g.features;
    for (int hh = 0; hh < p.sgc_hops; ++hh) prop = a * prop;
    logits = prop * p.weights[0];
  }
  Mat probs(logits.rows(), logits.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    Vec e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    probs.row(i) = e.transpose() / e.sum();
  }
  return probs;
}

}  // namespace

TEST_CASE("forward: zero weights give uniform probabilities", "[classifier]") {
  const Graph g = build_graph(1, 4, {}, Mat::Ones(1, 3));
  ClassifierParams p;
  p.variant = Variant::gcn;
  p.weights = {Mat::Zero(3, 5), Mat::Zero(5, 4)};
  const auto b = forward(p, normalize_adjacency(g), g.features);
  for (int k = 0; k < 4; ++k) REQUIRE(b.probs(0, k) == Catch::Approx(0.25).margin(1e-12));
  REQUIRE(b.labels[0] == 0);  // tie-break to lowest class
}

TEST_CASE("forward: SGC saturates to one-hot with a large column", "[classifier]") {
  const Graph g = build_graph(1, 3, {}, Mat::Ones(1, 2));
  ClassifierParams p;
  p.variant = Variant::sgc;
  p.sgc_hops = 2;
  Mat w = Mat::Zero(2, 3);
  w(0, 2) = 50.0;
  w(1, 2) = 50.0;
  p.weights = {w};
  const auto b = forward(p, normalize_adjacency(g), g.features);
  REQUIRE(b.labels[0] == 2);
  REQUIRE(b.probs(0, 2) > 0.999999);
}

TEST_CASE("forward matches the dense oracle on small graphs", "[classifier]") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    for (Variant variant : {Variant::gcn, Variant::sgc}) {
      const Graph g = random_graph(3 + static_cast<int>(seed % 3), 4, 3, seed * 13);
      const auto p = random_params(variant, 4, 5, 3, seed);
      const auto got = forward(p, normalize_adjacency(g), g.features);
      const Mat want = dense_forward_probs(p, g);
      REQUIRE((got.probs - want).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("softmax rows sum to one", "[classifier]") {
  for (std::uint64_t seed : {5ull, 6ull, 7ull}) {
    const Graph g = random_graph(6, 4, 3, seed);
    const auto p = random_params(Variant::gcn, 4, 5, 3, seed);
    const auto b = forward(p, normalize_adjacency(g), g.features);
    for (int i = 0; i < g.num_nodes; ++i)
      REQUIRE(b.probs.row(i).sum() == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("loss on known values", "[classifier]") {
  // Uniform predictions, K=7: loss = ln 7.
  const Graph g = build_graph(2, 7, {}, Mat::Ones(2, 3));
  ClassifierParams p;
  p.variant = Variant::gcn;
  p.weights = {Mat::Zero(3, 4), Mat::Zero(4, 7)};
  const auto lg = loss_and_gradients(p, normalize_adjacency(g), g.features, {3, 5}, {0, 1});
  REQUIRE(lg.loss == Catch::Approx(std::log(7.0)).margin(1e-12));

  // Saturated correct predictions: loss near zero.
  ClassifierParams q;
  q.variant = Variant::sgc;
  Mat w = Mat::Zero(3, 7);
  w.col(2).setConstant(60.0);
  q.weights = {w};
  const auto lg2 = loss_and_gradients(q, normalize_adjacency(g), g.features, {2, 2}, {0, 1});
  REQUIRE(lg2.loss < 1e-9);

  REQUIRE_THROWS_AS(loss_and_gradients(p, normalize_adjacency(g), g.features, {3, 5}, {}),
                    ValidationError);
}

TEST_CASE("analytic gradients match central finite differences", "[classifier]") {
  // The spec-level check lives in the acceptance suite; keep a fast version
  // here covering both variants.
  for (Variant variant : {Variant::gcn, Variant::sgc}) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
      const int n = 4, d = 3, k = 3;
      const Graph g = random_graph(n, d, k, seed * 31);
      const auto norm = normalize_adjacency(g);
      auto p = random_params(variant, d, 4, k, seed);
      const std::vector<int> mask{0, 2, 3};
      const std::vector<int>& labels = g.latent_labels;

      const auto lg = loss_and_gradients(p, norm, g.features, labels, mask);
      const double step = 1e-5;
      for (std::size_t wi = 0; wi < p.weights.size(); ++wi)
        for (int r = 0; r < p.weights[wi].rows(); ++r)
          for (int c = 0; c < p.weights[wi].cols(); ++c) {
            const double orig = p.weights[wi](r, c);
            p.weights[wi](r, c) = orig + step;
            const double up = loss_and_gradients(p, norm, g.features, labels, mask).loss;
            p.weights[wi](r, c) = orig - step;
            const double down = loss_and_gradients(p, norm, g.features, labels, mask).loss;
            p.weights[wi](r, c) = orig;
            const double fd = (up - down) / (2.0 * step);
            const double an = lg.grads[wi](r, c);
            REQUIRE(std::abs(an - fd) <= 1e-4 * std::max({1e-4, std::abs(an), std::abs(fd)}));
          }
    }
  }
}

TEST_CASE("train: zero epochs returns the initialization", "[classifier]") {
  const Graph g = random_graph(8, 4, 2, 3);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.hidden = 5;
  cfg.seed = 9;
  const auto trained = train(g, {0, 1, 2}, g.latent_labels, Variant::gcn, cfg);
  const auto fresh = init_params(Variant::gcn, 4, 2, cfg);
  REQUIRE(trained.weights[0] == fresh.weights[0]);
  REQUIRE(trained.weights[1] == fresh.weights[1]);
}

TEST_CASE("train reaches high accuracy on a separable SBM", "[classifier]") {
  const Graph g = generate_sbm(400, 2, 0.2, 0.01, 40, 1.0, 0.0, 21);
  const Partition part = partition_nodes(g, {0.4, 0.2, 0.4}, 5);
  TrainConfig cfg;
  cfg.seed = 7;
  const auto params = train(g, part.train_ids, g.latent_labels, Variant::gcn, cfg);
  const auto b = forward(params, normalize_adjacency(g), g.features);
  int correct = 0;
  for (int n : part.train_ids) correct += b.labels[static_cast<std::size_t>(n)] ==
                                          g.latent_labels[static_cast<std::size_t>(n)];
  REQUIRE(static_cast<double>(correct) / part.train_ids.size() >= 0.99);
}

TEST_CASE("training is reproducible given the seed", "[classifier]") {
  const Graph g = random_graph(20, 5, 3, 11, 0.3);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.hidden = 6;
  cfg.seed = 4;
  const auto a = train(g, {0, 1, 2, 3, 4}, g.latent_labels, Variant::gcn, cfg);
  const auto b = train(g, {0, 1, 2, 3, 4}, g.latent_labels, Variant::gcn, cfg);
  for (std::size_t i = 0; i < a.weights.size(); ++i) REQUIRE(a.weights[i] == b.weights[i]);
}

TEST_CASE("retrain_step: zero learning rate leaves parameters unchanged", "[classifier]") {
  const Graph g = random_graph(10, 4, 2, 13);
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.seed = 2;
  TrainSession session(g, Variant::gcn, cfg);
  const auto before = session.params().weights;
  session.retrain_step({0, 1, 2}, g.latent_labels, 0.0);
  for (std::size_t i = 0; i < before.size(); ++i)
    REQUIRE(session.params().weights[i] == before[i]);
}

TEST_CASE("retrain_step descends on a small instance", "[classifier]") {
  const Graph g = random_graph(12, 4, 2, 17);
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.seed = 3;
  TrainSession session(g, Variant::gcn, cfg);
  const std::vector<int> mask{0, 1, 2, 3, 4, 5};
  const double before = session.loss_on(mask, g.latent_labels);
  session.retrain_step(mask, g.latent_labels, 1e-3);
  REQUIRE(session.loss_on(mask, g.latent_labels) < before);
}

TEST_CASE("optimizer state carries across retrain_step calls", "[classifier]") {
  const Graph g = random_graph(10, 4, 2, 19);
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.seed = 5;
  const std::vector<int> mask{0, 1, 2};

  TrainSession two_calls(g, Variant::gcn, cfg);
  two_calls.retrain_step(mask, g.latent_labels, 1e-3);
  two_calls.retrain_step(mask, g.latent_labels, 1e-3);

  TrainSession loop(g, Variant::gcn, cfg);
  for (int i = 0; i < 2; ++i) loop.retrain_step(mask, g.latent_labels, 1e-3);

  for (std::size_t i = 0; i < loop.params().weights.size(); ++i)
    REQUIRE(two_calls.params().weights[i] == loop.params().weights[i]);
}

TEST_CASE("checkpoint round trip reproduces predictions exactly", "[classifier]") {
  const Graph g = random_graph(15, 5, 3, 23, 0.4);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.hidden = 6;
  cfg.seed = 8;
  const auto params = train(g, {0, 1, 2, 3}, g.latent_labels, Variant::gcn, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "graphss_ckpt_test.bin").string();
  save_checkpoint(params, cfg.seed, cfg.epochs, path);
  const Checkpoint ck = load_checkpoint(path);
  std::filesystem::remove(path);
  REQUIRE(ck.params.variant == params.variant);
  REQUIRE(ck.seed == cfg.seed);
  for (std::size_t i = 0; i < params.weights.size(); ++i)
    REQUIRE(ck.params.weights[i] == params.weights[i]);
  const auto a = forward(params, normalize_adjacency(g), g.features);
  const auto b = forward(ck.params, normalize_adjacency(g), g.features);
  REQUIRE(a.probs == b.probs);
}
