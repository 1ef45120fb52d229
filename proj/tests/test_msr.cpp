#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "kamamsr/msr.hpp"
#include "kamamsr/synth.hpp"
#include "test_support.hpp"

using namespace kamamsr;

TEST_CASE("hamilton_filter with one state reduces to the Gaussian AR(1) likelihood") {
  std::mt19937_64 rng(1);
  const auto r = testing::normal_draws(rng, 40, 0.01);
  const auto p = testing::single_state(0.001, 0.2, 0.012);
  const auto f = hamilton_filter(p, r);
  double ll = 0;
  for (std::size_t t = 1; t < r.size(); ++t) {
    const double z = (r[t] - 0.001 - 0.2 * r[t - 1]) / 0.012;
    ll += -0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi) - std::log(0.012);
  }
  CHECK(f.filtered.rows() == 39);
  CHECK((f.filtered.array() == 1.0).all());
  CHECK(f.log_likelihood == doctest::Approx(ll).epsilon(1e-12));
}

TEST_CASE("identical emissions leave only the Markov chain prediction") {
  MsrParams p = testing::single_state(0.0, 0.0, 0.01);
  p.k = 2;
  p.mu = Eigen::Vector2d(0.0, 0.0);
  p.beta = Eigen::Vector2d(0.1, 0.1);
  p.sigma = Eigen::Vector2d(0.01, 0.01);
  p.transition.resize(2, 2);
  p.transition << 0.9, 0.1, 0.3, 0.7;
  p.delta = Eigen::Vector2d(0.2, 0.8);
  std::mt19937_64 rng(2);
  const auto r = testing::normal_draws(rng, 12, 0.01);
  const auto f = hamilton_filter(p, r);
  Eigen::RowVector2d chain(0.2, 0.8);
  for (Eigen::Index m = 0; m < f.filtered.rows(); ++m) {
    CHECK(f.filtered(m, 0) == doctest::Approx(chain(0)).epsilon(1e-12));
    chain = chain * p.transition;
  }
}

TEST_CASE("filter and smoother match path enumeration (k=2, T=6)") {
  std::mt19937_64 rng(11);
  const auto p = testing::random_params(rng, 2);
  const auto r = testing::normal_draws(rng, 6);
  const auto f = hamilton_filter(p, r);
  const auto s = kim_smoother(p, f.filtered);
  const auto o = oracle::enumerate_paths(testing::to_chain(p), r);
  CHECK(f.log_likelihood == doctest::Approx(o.log_likelihood).epsilon(1e-12));
  for (int m = 0; m < 5; ++m)
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(f.filtered(m, i) - o.filtered[m][i]) < 1e-10);
      CHECK(std::abs(s(m, i) - o.smoothed[m][i]) < 1e-10);
    }
}

TEST_CASE("filter/smoother exactness property over random small instances") {
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<int> kk(2, 3), tt(2, 10);
  for (int rep = 0; rep < 60; ++rep) {
    const int k = kk(rng);
    const int T = tt(rng);
    const auto p = testing::random_params(rng, k);
    const auto r = testing::normal_draws(rng, T);
    const auto f = hamilton_filter(p, r);
    const auto s = kim_smoother(p, f.filtered);
    const auto o = oracle::enumerate_paths(testing::to_chain(p), r);
    CHECK(std::abs(f.log_likelihood - o.log_likelihood) < 1e-10);
    for (int m = 0; m < T - 1; ++m) {
      CHECK(std::abs(f.filtered.row(m).sum() - 1.0) < 1e-10);
      CHECK(std::abs(s.row(m).sum() - 1.0) < 1e-10);
      for (int i = 0; i < k; ++i) {
        CHECK(std::abs(f.filtered(m, i) - o.filtered[m][i]) < 1e-10);
        CHECK(std::abs(s(m, i) - o.smoothed[m][i]) < 1e-10);
      }
    }
  }
}

TEST_CASE("kim_smoother edge cases") {
  std::mt19937_64 rng(5);
  auto p = testing::random_params(rng, 2);
  SUBCASE("single row") {
    ProbMatrix f(1, 2);
    f << 0.3, 0.7;
    CHECK(kim_smoother(p, f) == f);
  }
  SUBCASE("identity transition: every row equals the last filtered row") {
    p.transition = Eigen::MatrixXd::Identity(2, 2);
    const auto r = testing::normal_draws(rng, 15);
    const auto f = hamilton_filter(p, r);
    const auto s = kim_smoother(p, f.filtered);
    for (Eigen::Index m = 0; m < s.rows(); ++m)
      for (int i = 0; i < 2; ++i)
        CHECK(s(m, i) == doctest::Approx(f.filtered(f.filtered.rows() - 1, i)).epsilon(1e-10));
  }
}

TEST_CASE("hamilton_filter error paths") {
  auto p = testing::single_state(0, 0, 0.01);
  std::vector<double> r{0.01, std::nan(""), 0.02};
  CHECK_THROWS_AS(hamilton_filter(p, r), std::invalid_argument);
  p.sigma(0) = 0.0;
  CHECK_THROWS_AS(hamilton_filter(p, std::vector<double>{0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("scaled filtering does not underflow on long series with tiny sigma") {
  MsrParams p = two_state_truth();
  p.sigma = Eigen::Vector2d(1e-4, 5e-4);
  const auto path = sample_path(p, 20000, 77);
  const auto f = hamilton_filter(p, path.returns);
  const auto s = kim_smoother(p, f.filtered);
  CHECK(std::isfinite(f.log_likelihood));
  CHECK(f.filtered.allFinite());
  CHECK(s.allFinite());
  for (Eigen::Index m = 0; m < s.rows(); m += 997) CHECK(std::abs(s.row(m).sum() - 1.0) < 1e-10);
}

TEST_CASE("em_fit recovers a planted two-state process") {
  const auto truth = two_state_truth();
  const auto path = sample_path(truth, 5000, 2024);
  EmConfig cfg;
  cfg.seed = 9;
  const auto fit = em_fit(path.returns, 2, cfg);
  CHECK(fit.params.sigma(0) <= fit.params.sigma(1));
  CHECK(std::abs(fit.params.sigma(0) / 0.005 - 1.0) < 0.10);
  CHECK(std::abs(fit.params.sigma(1) / 0.02 - 1.0) < 0.10);
  int hits = 0;
  for (Eigen::Index m = 0; m < fit.smoothed.rows(); ++m) {
    const int guess = fit.smoothed(m, 1) > fit.smoothed(m, 0) ? 1 : 0;
    hits += guess == path.states[m + 1];
  }
  CHECK(static_cast<double>(hits) / fit.smoothed.rows() >= 0.90);
  CHECK(fit.runs.size() == 10);
}

TEST_CASE("em_fit on single-Gaussian data beats the one-state likelihood") {
  std::mt19937_64 rng(8);
  const auto r = testing::normal_draws(rng, 800, 0.01);
  EmConfig cfg;
  cfg.seed = 1;
  cfg.restarts = 4;
  const auto fit = em_fit(r, 2, cfg);
  // one-state maximum likelihood via OLS
  const std::size_t n = r.size() - 1;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t t = 0; t < n; ++t) {
    sx += r[t], sy += r[t + 1], sxx += r[t] * r[t], sxy += r[t] * r[t + 1];
  }
  const double beta = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double mu = (sy - beta * sx) / n;
  double ss = 0;
  for (std::size_t t = 0; t < n; ++t) ss += std::pow(r[t + 1] - mu - beta * r[t], 2);
  const double one = hamilton_filter(testing::single_state(mu, beta, std::sqrt(ss / n)), r).log_likelihood;
  CHECK(fit.log_likelihood >= one - 1e-6);
}

TEST_CASE("EM log-likelihood never decreases within a restart") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    const auto path = sample_path(rep % 2 ? three_state_truth() : two_state_truth(), 600, rng());
    const int k = rep % 2 ? 3 : 2;
    for (int restart = 0; restart < 3; ++restart) {
      const auto run = em_run(path.returns, em_initial_params(path.returns, k, rep, restart), 1e-9, 200);
      for (std::size_t i = 1; i < run.log_likelihood_trace.size(); ++i)
        CHECK(run.log_likelihood_trace[i] >= run.log_likelihood_trace[i - 1] - 1e-8);
    }
  }
}

TEST_CASE("em_fit preconditions") {
  std::vector<double> r(40, 0.01);
  CHECK_THROWS_AS(em_fit(r, 2), std::invalid_argument);
  std::vector<double> ok(100, 0.0);
  CHECK_THROWS_AS(em_fit(ok, 4), std::invalid_argument);
  EmConfig none;
  none.restarts = 0;
  CHECK_THROWS_AS(em_fit(ok, 2, none), std::invalid_argument);
}

TEST_CASE("reduce_three_to_two examples") {
  ProbMatrix p(3, 3);
  p << 0.5, 0.4, 0.1,  //
      0.1, 0.8, 0.1,   //
      0.0, 0.3, 0.7;
  CHECK(reduce_three_to_two(p) == std::vector<int>{0, 0, 1});
}

TEST_CASE("sample_path examples") {
  SUBCASE("absorbing start") {
    MsrParams p = two_state_truth();
    p.transition = Eigen::MatrixXd::Identity(2, 2);
    p.delta = Eigen::Vector2d(1.0, 0.0);
    const auto path = sample_path(p, 500, 3);
    for (int s : path.states) CHECK(s == 0);
  }
  SUBCASE("indistinguishable states give iid N(0, 1e-4)") {
    MsrParams p = two_state_truth();
    p.mu = Eigen::Vector2d(0, 0);
    p.sigma = Eigen::Vector2d(0.01, 0.01);
    const auto path = sample_path(p, 50000, 4);
    double m = 0, v = 0;
    for (double x : path.returns) m += x;
    m /= path.returns.size();
    for (double x : path.returns) v += (x - m) * (x - m);
    v /= path.returns.size() - 1;
    CHECK(std::abs(m) < 3 * 0.01 / std::sqrt(50000.0));
    CHECK(std::abs(v / 1e-4 - 1.0) < 0.03);
  }
  SUBCASE("empirical transition frequencies") {
    MsrParams p = three_state_truth();
    p.transition << 0.7, 0.2, 0.1, 0.3, 0.5, 0.2, 0.25, 0.25, 0.5;
    const auto path = sample_path(p, 100000, 5);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 3);
    for (std::size_t t = 1; t < path.states.size(); ++t) counts(path.states[t - 1], path.states[t]) += 1;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(counts(i, j) / counts.row(i).sum() - p.transition(i, j)) < 0.01);
  }
  SUBCASE("deterministic given seed") {
    CHECK(sample_path(two_state_truth(), 100, 9).returns == sample_path(two_state_truth(), 100, 9).returns);
  }
}

TEST_CASE("MsrParams JSON round trip and validation") {
  const auto p = three_state_truth();
  const auto q = msr_params_from_json(to_json(p));
  CHECK(q.sigma == p.sigma);
  CHECK(q.transition == p.transition);
  MsrParams bad = p;
  bad.transition(0, 0) = 0.5;
  CHECK_THROWS(bad.validate());
  MsrParams s = p;
  s.sigma = Eigen::Vector3d(0.03, 0.01, 0.02);
  s.mu = Eigen::Vector3d(1, 2, 3);
  s.sort_by_sigma();
  CHECK(s.sigma == Eigen::Vector3d(0.01, 0.02, 0.03));
  CHECK(s.mu == Eigen::Vector3d(2, 3, 1));
}
