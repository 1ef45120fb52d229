#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "kamamsr/market_data.hpp"
#include "kamamsr/parallel.hpp"

namespace kamamsr {

// T x k, one row per emitting day.
using ProbMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// k-state Markov-switching AR(1) regression on daily log returns:
//   r_t = mu[S_t] + beta[S_t] * r_{t-1} + sigma[S_t] * eps_t.
// transition(r, c) = Pr(S_t = c | S_{t-1} = r); delta is the state
// distribution at the first emitting day (t = 1).
struct MsrParams {
  int k = 2;
  Eigen::VectorXd mu;
  Eigen::VectorXd beta;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd transition;
  Eigen::VectorXd delta;

  // Throws std::invalid_argument if any invariant fails (sizes, sigma > 0,
  // stochastic rows and delta within 1e-12).
  void validate() const;
  // Permutes states so sigma is ascending (stable).
  void sort_by_sigma();
};

struct FilterResult {
  ProbMatrix filtered;   // Pr(S_t | r_1..r_t), rows t = 1..T-1
  ProbMatrix predicted;  // Pr(S_t | r_1..r_{t-1})
  double log_likelihood = 0.0;
};

// Scaled forward recursion. The first return is only the lag regressor,
// so the result has returns.size() - 1 rows.
FilterResult hamilton_filter(const MsrParams& params, std::span<const double> returns);
FilterResult hamilton_filter(const MsrParams& params, const ReturnSeries& returns);

// Kim backward recursion; the final row equals the final filtered row.
ProbMatrix kim_smoother(const MsrParams& params, const ProbMatrix& filtered);

struct EmConfig {
  int restarts = 10;
  double tol = 1e-6;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

struct EmRun {
  MsrParams params;
  std::vector<double> log_likelihood_trace;  // one entry per E-step
  int iterations = 0;
  bool converged = false;
  bool aborted = false;  // a state's expected count fell below 2
};

// EM from a given starting point. The trace is non-decreasing up to
// rounding (EM ascent).
EmRun em_run(std::span<const double> returns, MsrParams init, double tol, int max_iter);

// Persistence-favouring random start for restart `restart` of `seed`.
MsrParams em_initial_params(std::span<const double> returns, int k, std::uint64_t seed,
                            int restart);

struct MsrFit {
  MsrParams params;
  ProbMatrix filtered;
  ProbMatrix smoothed;
  double log_likelihood = 0.0;

  // metadata
  std::uint64_t seed = 0;
  int restarts = 0;
  int best_restart = -1;
  int iterations = 0;
  bool converged = false;
  std::vector<EmRun> runs;  // every restart, in restart order
};

// Best-likelihood fit over cfg.restarts seeded starts; ties go to the
// lowest restart index. Throws std::invalid_argument for k outside {2,3}
// or fewer than 50 returns, DataError if every restart aborts.
MsrFit em_fit(std::span<const double> returns, int k, const EmConfig& cfg = {},
              Execution exec = Execution::Parallel);
MsrFit em_fit(const ReturnSeries& returns, int k, const EmConfig& cfg = {},
              Execution exec = Execution::Parallel);

// Drops the medium-sigma state of a sorted 3-state model and labels each
// row 0 (low) or 1 (high) by comparing the outer states; ties go low.
std::vector<int> reduce_three_to_two(const ProbMatrix& probs3);
std::vector<int> reduce_three_to_two(const MsrFit& fit3);

struct SamplePath {
  std::vector<int> states;
  std::vector<double> returns;
};

// Draws a path of length T. r_0 comes from the stationary AR(1) emission
// of state 0 (plain N(mu_0, sigma_0^2) when |beta_0| >= 1).
SamplePath sample_path(const MsrParams& params, std::size_t T, std::uint64_t seed);

nlohmann::json to_json(const MsrParams& p);
MsrParams msr_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MsrFit& fit);

}  // namespace kamamsr
