#include "kamamsr/msr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "kamamsr/errors.hpp"

namespace kamamsr {

namespace {

constexpr double kPredictionFloor = 1e-300;
constexpr double kMinExpectedCount = 2.0;
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_normal_density(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

void check_returns(std::span<const double> r) {
  for (std::size_t t = 0; t < r.size(); ++t)
    if (!std::isfinite(r[t]))
      throw std::invalid_argument("non-finite return at index " + std::to_string(t));
}

// Expected pair counts sum_t Pr(S_{t-1}=i, S_t=j | all data).
Eigen::MatrixXd expected_transitions(const MsrParams& p, const ProbMatrix& filtered,
                                     const ProbMatrix& predicted, const ProbMatrix& smoothed) {
  const int k = p.k;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index m = 1; m < filtered.rows(); ++m) {
    for (int j = 0; j < k; ++j) {
      const double ratio = smoothed(m, j) / std::max(predicted(m, j), kPredictionFloor);
      for (int i = 0; i < k; ++i) counts(i, j) += filtered(m - 1, i) * p.transition(i, j) * ratio;
    }
  }
  return counts;
}

struct EStep {
  FilterResult filter;
  ProbMatrix smoothed;
};

EStep e_step(const MsrParams& p, std::span<const double> r) {
  EStep e;
  e.filter = hamilton_filter(p, r);
  e.smoothed = kim_smoother(p, e.filter.filtered);
  return e;
}

// Returns false when a state's expected occupancy falls below 2.
bool m_step(MsrParams& p, std::span<const double> r, const EStep& e) {
  const int k = p.k;
  const auto& g = e.smoothed;
  const Eigen::Index n = g.rows();

  for (int i = 0; i < k; ++i) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (Eigen::Index m = 0; m < n; ++m) {
      const double w = g(m, i);
      const double x = r[m];
      const double y = r[m + 1];
      sw += w;
      sx += w * x;
      sy += w * y;
      sxx += w * x * x;
      sxy += w * x * y;
    }
    if (sw < kMinExpectedCount) return false;
    const double det = sw * sxx - sx * sx;
    double mu = 0, beta = 0;
    if (det > 1e-14 * sw * sxx && det > 0.0) {
      mu = (sxx * sy - sx * sxy) / det;
      beta = (sw * sxy - sx * sy) / det;
    } else {
      mu = sy / sw;
    }
    double ss = 0;
    for (Eigen::Index m = 0; m < n; ++m) {
      const double res = r[m + 1] - mu - beta * r[m];
      ss += g(m, i) * res * res;
    }
    const double var = ss / sw;
    if (!(var > 0.0) || !std::isfinite(var)) return false;
    p.mu(i) = mu;
    p.beta(i) = beta;
    p.sigma(i) = std::sqrt(var);
  }

  const Eigen::MatrixXd counts =
      expected_transitions(p, e.filter.filtered, e.filter.predicted, e.smoothed);
  for (int i = 0; i < k; ++i) {
    const double row = counts.row(i).sum();
    if (!(row > 0.0)) return false;
    p.transition.row(i) = counts.row(i) / row;
  }
  p.delta = g.row(0).transpose();
  p.delta /= p.delta.sum();
  return true;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

int draw_categorical(std::mt19937_64& rng, const Eigen::Ref<const Eigen::VectorXd>& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (x < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace

void MsrParams::validate() const {
  if (k < 1) throw std::invalid_argument("MsrParams: k must be positive");
  if (mu.size() != k || beta.size() != k || sigma.size() != k || delta.size() != k ||
      transition.rows() != k || transition.cols() != k)
    throw std::invalid_argument("MsrParams: inconsistent sizes");
  for (int i = 0; i < k; ++i) {
    if (!(sigma(i) > 0.0) || !std::isfinite(sigma(i)))
      throw std::invalid_argument("MsrParams: sigma must be positive");
    if (!std::isfinite(mu(i)) || !std::isfinite(beta(i)))
      throw std::invalid_argument("MsrParams: non-finite mu or beta");
    for (int j = 0; j < k; ++j)
      if (!(transition(i, j) >= 0.0 && transition(i, j) <= 1.0))
        throw std::invalid_argument("MsrParams: transition entries must lie in [0, 1]");
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-12)
      throw std::invalid_argument("MsrParams: transition rows must sum to 1");
    if (!(delta(i) >= 0.0 && delta(i) <= 1.0))
      throw std::invalid_argument("MsrParams: delta entries must lie in [0, 1]");
  }
  if (std::abs(delta.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("MsrParams: delta must sum to 1");
}

void MsrParams::sort_by_sigma() {
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sigma(a) < sigma(b); });
  MsrParams s = *this;
  for (int i = 0; i < k; ++i) {
    s.mu(i) = mu(order[i]);
    s.beta(i) = beta(order[i]);
    s.sigma(i) = sigma(order[i]);
    s.delta(i) = delta(order[i]);
    for (int j = 0; j < k; ++j) s.transition(i, j) = transition(order[i], order[j]);
  }
  *this = std::move(s);
}

FilterResult hamilton_filter(const MsrParams& params, std::span<const double> r) {
  params.validate();
  if (r.size() < 2) throw std::invalid_argument("hamilton_filter: need at least 2 returns");
  check_returns(r);

  const int k = params.k;
  const auto n = static_cast<Eigen::Index>(r.size() - 1);
  FilterResult out;
  out.filtered.resize(n, k);
  out.predicted.resize(n, k);

  Eigen::VectorXd pred = params.delta;
  std::vector<double> loge(k);
  double ll = 0.0;
  for (Eigen::Index m = 0; m < n; ++m) {
    out.predicted.row(m) = pred.transpose();
    const double y = r[m + 1];
    const double x = r[m];
    double top = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      loge[i] = log_normal_density(y, params.mu(i) + params.beta(i) * x, params.sigma(i));
      if (pred(i) > 0.0) top = std::max(top, loge[i]);
    }
    if (!std::isfinite(top)) throw std::invalid_argument("hamilton_filter: zero predicted mass");
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      const double w = pred(i) > 0.0 ? pred(i) * std::exp(loge[i] - top) : 0.0;
      out.filtered(m, i) = w;
      total += w;
    }
    out.filtered.row(m) /= total;
    ll += top + std::log(total);
    pred = (out.filtered.row(m) * params.transition).transpose();
  }
  out.log_likelihood = ll;
  return out;
}

FilterResult hamilton_filter(const MsrParams& params, const ReturnSeries& returns) {
  return hamilton_filter(params, std::span<const double>(returns.values));
}

ProbMatrix kim_smoother(const MsrParams& params, const ProbMatrix& filtered) {
  const int k = params.k;
  if (filtered.cols() != k) throw std::invalid_argument("kim_smoother: column count != k");
  ProbMatrix smoothed(filtered.rows(), k);
  if (filtered.rows() == 0) return smoothed;
  const Eigen::Index last = filtered.rows() - 1;
  smoothed.row(last) = filtered.row(last);
  Eigen::RowVectorXd ratio(k);
  for (Eigen::Index m = last - 1; m >= 0; --m) {
    const Eigen::RowVectorXd pred = filtered.row(m) * params.transition;
    for (int j = 0; j < k; ++j) ratio(j) = smoothed(m + 1, j) / std::max(pred(j), kPredictionFloor);
    for (int i = 0; i < k; ++i)
      smoothed(m, i) = filtered(m, i) * params.transition.row(i).dot(ratio);
    const double s = smoothed.row(m).sum();
    if (s > 0.0) smoothed.row(m) /= s;
  }
  return smoothed;
}

EmRun em_run(std::span<const double> r, MsrParams p, double tol, int max_iter) {
  EmRun run;
  for (;;) {
    const EStep e = e_step(p, r);
    const double ll = e.filter.log_likelihood;
    if (!std::isfinite(ll)) {
      run.aborted = true;
      break;
    }
    run.params = p;
    if (!run.log_likelihood_trace.empty() && ll - run.log_likelihood_trace.back() < tol) {
      run.log_likelihood_trace.push_back(ll);
      run.converged = true;
      break;
    }
    run.log_likelihood_trace.push_back(ll);
    if (run.iterations >= max_iter) break;
    if (!m_step(p, r, e)) {
      run.aborted = true;
      break;
    }
    ++run.iterations;
  }
  return run;
}

MsrParams em_initial_params(std::span<const double> r, int k, std::uint64_t seed, int restart) {
  const std::size_t n = r.size() - 1;
  // pooled AR(1) least squares
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t t = 0; t < n; ++t) {
    sx += r[t];
    sy += r[t + 1];
    sxx += r[t] * r[t];
    sxy += r[t] * r[t + 1];
  }
  const double nn = static_cast<double>(n);
  const double det = nn * sxx - sx * sx;
  double beta = det > 0.0 ? (nn * sxy - sx * sy) / det : 0.0;
  double mu = (sy - beta * sx) / nn;
  std::vector<double> abs_res(n);
  double ss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double e = r[t + 1] - mu - beta * r[t];
    abs_res[t] = std::abs(e);
    ss += e * e;
  }
  const double sd = std::max(std::sqrt(ss / nn), 1e-8);
  std::sort(abs_res.begin(), abs_res.end());

  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.8, 1.25);
  std::gamma_distribution<double> stay(8.0, 1.0), move(2.0, 1.0);

  MsrParams p;
  p.k = k;
  p.mu.resize(k);
  p.beta.resize(k);
  p.sigma.resize(k);
  p.transition.resize(k, k);
  p.delta = Eigen::VectorXd::Constant(k, 1.0 / k);
  for (int i = 0; i < k; ++i) {
    const double q = (i + 0.5) / k;
    // E|e| = sigma * sqrt(2/pi) for a Gaussian residual
    double s = quantile_sorted(abs_res, q) * std::sqrt(std::numbers::pi / 2.0) * jitter(rng);
    if (!(s > 0.0)) s = sd * jitter(rng);
    p.sigma(i) = s;
    p.mu(i) = mu + 0.05 * sd * z(rng);
    p.beta(i) = beta + 0.05 * z(rng);
    for (int j = 0; j < k; ++j) p.transition(i, j) = (i == j) ? stay(rng) : move(rng);
    p.transition.row(i) /= p.transition.row(i).sum();
  }
  return p;
}

MsrFit em_fit(std::span<const double> r, int k, const EmConfig& cfg, Execution exec) {
  if (k != 2 && k != 3) throw std::invalid_argument("em_fit: k must be 2 or 3");
  if (r.size() < 50) throw std::invalid_argument("em_fit: need at least 50 returns");
  if (cfg.restarts < 1) throw std::invalid_argument("em_fit: restarts must be >= 1");
  check_returns(r);

  std::vector<EmRun> runs(static_cast<std::size_t>(cfg.restarts));
  const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < cfg.restarts; ++i) {
    try {
      runs[i] = em_run(r, em_initial_params(r, k, cfg.seed, i), cfg.tol, cfg.max_iter);
    } catch (const std::exception&) {
      runs[i] = EmRun{};
      runs[i].aborted = true;
    }
  }

  int best = -1;
  for (int i = 0; i < cfg.restarts; ++i) {
    if (runs[i].aborted || runs[i].log_likelihood_trace.empty()) continue;
    if (best < 0 || runs[i].log_likelihood_trace.back() > runs[best].log_likelihood_trace.back())
      best = i;
  }
  if (best < 0) throw DataError("em_fit: every restart collapsed a state");

  MsrFit fit;
  fit.params = runs[best].params;
  fit.params.sort_by_sigma();
  const FilterResult f = hamilton_filter(fit.params, r);
  fit.filtered = f.filtered;
  fit.smoothed = kim_smoother(fit.params, f.filtered);
  fit.log_likelihood = f.log_likelihood;
  fit.seed = cfg.seed;
  fit.restarts = cfg.restarts;
  fit.best_restart = best;
  fit.iterations = runs[best].iterations;
  fit.converged = runs[best].converged;
  fit.runs = std::move(runs);
  return fit;
}

MsrFit em_fit(const ReturnSeries& returns, int k, const EmConfig& cfg, Execution exec) {
  return em_fit(std::span<const double>(returns.values), k, cfg, exec);
}

std::vector<int> reduce_three_to_two(const ProbMatrix& probs3) {
  if (probs3.cols() != 3) throw std::invalid_argument("reduce_three_to_two: need 3 columns");
  std::vector<int> labels(static_cast<std::size_t>(probs3.rows()));
  for (Eigen::Index t = 0; t < probs3.rows(); ++t) labels[t] = probs3(t, 2) > probs3(t, 0) ? 1 : 0;
  return labels;
}

std::vector<int> reduce_three_to_two(const MsrFit& fit3) {
  if (fit3.params.k != 3) throw std::invalid_argument("reduce_three_to_two: fit must have k = 3");
  return reduce_three_to_two(fit3.filtered);
}

SamplePath sample_path(const MsrParams& params, std::size_t T, std::uint64_t seed) {
  params.validate();
  if (T < 2) throw std::invalid_argument("sample_path: T must be >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  SamplePath path;
  path.states.resize(T);
  path.returns.resize(T);

  int s = draw_categorical(rng, params.delta);
  path.states[0] = s;
  {
    const double b = params.beta(s);
    double mean = params.mu(s), sd = params.sigma(s);
    if (std::abs(b) < 1.0) {
      mean /= (1.0 - b);
      sd /= std::sqrt(1.0 - b * b);
    }
    path.returns[0] = mean + sd * z(rng);
  }
  for (std::size_t t = 1; t < T; ++t) {
    s = draw_categorical(rng, params.transition.row(s).transpose());
    path.states[t] = s;
    path.returns[t] =
        params.mu(s) + params.beta(s) * path.returns[t - 1] + params.sigma(s) * z(rng);
  }
  return path;
}

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

nlohmann::json to_json(const MsrParams& p) {
  nlohmann::json j;
  j["k"] = p.k;
  j["mu"] = to_vec(p.mu);
  j["beta"] = to_vec(p.beta);
  j["sigma"] = to_vec(p.sigma);
  auto rows = nlohmann::json::array();
  for (int i = 0; i < p.k; ++i) rows.push_back(to_vec(p.transition.row(i).transpose()));
  j["transition"] = rows;
  j["delta"] = to_vec(p.delta);
  return j;
}

MsrParams msr_params_from_json(const nlohmann::json& j) {
  MsrParams p;
  p.k = j.at("k").get<int>();
  p.mu = from_vec(j.at("mu").get<std::vector<double>>());
  p.beta = from_vec(j.at("beta").get<std::vector<double>>());
  p.sigma = from_vec(j.at("sigma").get<std::vector<double>>());
  p.delta = from_vec(j.at("delta").get<std::vector<double>>());
  const auto rows = j.at("transition").get<std::vector<std::vector<double>>>();
  p.transition.resize(p.k, p.k);
  if (static_cast<int>(rows.size()) != p.k) throw std::invalid_argument("transition: wrong row count");
  for (int i = 0; i < p.k; ++i) {
    if (static_cast<int>(rows[i].size()) != p.k)
      throw std::invalid_argument("transition: wrong column count");
    for (int c = 0; c < p.k; ++c) p.transition(i, c) = rows[i][c];
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const MsrFit& fit) {
  nlohmann::json j = to_json(fit.params);
  j["log_likelihood"] = fit.log_likelihood;
  j["fit"] = {{"seed", fit.seed},
              {"restarts", fit.restarts},
              {"best_restart", fit.best_restart},
              {"iterations", fit.iterations},
              {"converged", fit.converged}};
  return j;
}

}  // namespace kamamsr
