#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "graphss/posterior.hpp"

using namespace graphss;

namespace {

// Independent reference enumeration, written before the library routine and
// kept free of Gamma functions entirely: the Dirichlet-multinomial term is
// evaluated through its sequential (Polya urn) factorization,
//   P(y_1..y_n | z) = prod_n (alpha[y_n] + c_before(z_n, y_n))
//                          / (sum(alpha) + rowcount_before(z_n)).
Mat urn_posterior(const Mat& probs, const std::vector<int>& y, const Vec& alpha) {
  const int n = static_cast<int>(probs.rows());
  const int k = static_cast<int>(probs.cols());
  const double alpha_sum = alpha.sum();
  Mat marginals = Mat::Zero(n, k);
  double total = 0.0;

  std::vector<int> z(static_cast<std::size_t>(n), 0);
  while (true) {
    double weight = 1.0;
    std::vector<std::vector<long long>> c(static_cast<std::size_t>(k),
                                          std::vector<long long>(static_cast<std::size_t>(k), 0));
    std::vector<long long> row(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const int zi = z[static_cast<std::size_t>(i)];
      const int yi = y[static_cast<std::size_t>(i)];
      weight *= probs(i, zi);
      weight *= (alpha(yi) + static_cast<double>(c[static_cast<std::size_t>(zi)][static_cast<std::size_t>(yi)])) /
                (alpha_sum + static_cast<double>(row[static_cast<std::size_t>(zi)]));
      ++c[static_cast<std::size_t>(zi)][static_cast<std::size_t>(yi)];
      ++row[static_cast<std::size_t>(zi)];
    }
    total += weight;
    for (int i = 0; i < n; ++i) marginals(i, z[static_cast<std::size_t>(i)]) += weight;

    int pos = n - 1;
    while (pos >= 0 && ++z[static_cast<std::size_t>(pos)] == k) {
      z[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return marginals / total;
}

}  // namespace

TEST_CASE("single node: marginal equals the classifier distribution", "[posterior]") {
  Mat probs(1, 3);
  probs << 0.2, 0.5, 0.3;
  const Mat m = exact_posterior(probs, {1}, Vec::Constant(3, 1.0));
  for (int k = 0; k < 3; ++k) REQUIRE(m(0, k) == Catch::Approx(probs(0, k)).margin(1e-12));
}

TEST_CASE("two-node hand-computed case", "[posterior]") {
  // probs = [(0.9, 0.1), (0.5, 0.5)], y = (0, 0), alpha = 1.
  // Enumerating the four assignments by hand gives joint weights
  // 3/20, 9/80, 1/80, 1/60 and marginals (0.9, 0.1) and (39/70, 31/70).
  Mat probs(2, 2);
  probs << 0.9, 0.1, 0.5, 0.5;
  const std::vector<int> y{0, 0};
  const Vec alpha = Vec::Constant(2, 1.0);

  const Mat m = exact_posterior(probs, y, alpha);
  REQUIRE(m(0, 0) == Catch::Approx(0.9).margin(1e-12));
  REQUIRE(m(0, 1) == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(m(1, 0) == Catch::Approx(39.0 / 70.0).margin(1e-12));
  REQUIRE(m(1, 1) == Catch::Approx(31.0 / 70.0).margin(1e-12));

  const Mat u = urn_posterior(probs, y, alpha);
  REQUIRE((m - u).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gamma and urn enumerations agree on random instances", "[posterior]") {
  Rng rng(71);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(4));
    const int k = 2 + static_cast<int>(rng.below(3));
    Mat probs(n, k);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < k; ++j) {
        probs(i, j) = rng.next_unit() + 1e-4;
        s += probs(i, j);
      }
      probs.row(i) /= s;
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    }
    Vec alpha(k);
    for (int j = 0; j < k; ++j) alpha(j) = 0.5 + rng.next_unit() * 2.0;

    const Mat a = exact_posterior(probs, y, alpha);
    const Mat b = urn_posterior(probs, y, alpha);
    REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < n; ++i) REQUIRE(a.row(i).sum() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("large alpha flattens the transition term", "[posterior]") {
  Mat probs(3, 2);
  probs << 0.7, 0.3, 0.4, 0.6, 0.9, 0.1;
  const Mat m = exact_posterior(probs, {0, 1, 1}, Vec::Constant(2, 1e6));
  REQUIRE((m - probs).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("posterior is equivariant under class relabeling", "[posterior]") {
  Mat probs(3, 3);
  probs << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5;
  const std::vector<int> y{0, 2, 1};
  Vec alpha(3);
  alpha << 1.0, 2.0, 0.5;
  const Mat base = exact_posterior(probs, y, alpha);

  // permutation 0->1, 1->2, 2->0
  const std::vector<int> perm{1, 2, 0};
  Mat probs_p(3, 3);
  Vec alpha_p(3);
  std::vector<int> y_p(3);
  for (int j = 0; j < 3; ++j) {
    probs_p.col(perm[static_cast<std::size_t>(j)]) = probs.col(j);
    alpha_p(perm[static_cast<std::size_t>(j)]) = alpha(j);
  }
  for (int i = 0; i < 3; ++i) y_p[static_cast<std::size_t>(i)] =
      perm[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
  const Mat permuted = exact_posterior(probs_p, y_p, alpha_p);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      REQUIRE(permuted(i, perm[static_cast<std::size_t>(j)]) ==
              Catch::Approx(base(i, j)).margin(1e-12));
}

TEST_CASE("oversized instances are rejected", "[posterior]") {
  REQUIRE_THROWS_AS(exact_posterior(Mat::Constant(9, 2, 0.5), std::vector<int>(9, 0),
                                    Vec::Constant(2, 1.0)),
                    ValidationError);
  REQUIRE_THROWS_AS(exact_posterior(Mat::Constant(2, 5, 0.2), std::vector<int>(2, 0),
                                    Vec::Constant(5, 1.0)),
                    ValidationError);
}

TEST_CASE("gibbs chain marginals converge to the exact posterior", "[posterior]") {
  // Fast version of the acceptance check: one instance, 50k sweeps.
  Rng gen(5);
  const int n = 4, k = 2;
  Mat probs(n, k);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    probs(i, 0) = 0.2 + 0.6 * gen.next_unit();
    probs(i, 1) = 1.0 - probs(i, 0);
    y[static_cast<std::size_t>(i)] = static_cast<int>(gen.below(k));
  }
  const Vec alpha = Vec::Constant(k, 1.0);
  const Mat exact = exact_posterior(probs, y, alpha);

  InferenceState st;
  st.ws = 500;
  st.epochs = 500 + 50000;
  st.assignments = y;
  st.sample_counts.assign(static_cast<std::size_t>(n) * k, 0);
  TransitionModel dyn{alpha, ConfusionCounts(k)};
  for (int i = 0; i < n; ++i) dyn.counts.at(y[static_cast<std::size_t>(i)],
                                            y[static_cast<std::size_t>(i)])++;
  Rng rng(99);
  const Mat warm = Mat::Constant(k, k, 1.0 / k);
  for (int e = 0; e < st.epochs; ++e) gibbs_sweep(st, probs, y, dyn, false, warm, rng);

  const double draws = 50000.0;
  for (int i = 0; i < n; ++i) {
    double tv = 0.0;
    for (int j = 0; j < k; ++j)
      tv += std::abs(st.sample_count(i, j, k) / draws - exact(i, j));
    REQUIRE(tv / 2.0 <= 0.03);
  }
}
