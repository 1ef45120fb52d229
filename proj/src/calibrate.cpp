#include "kamamsr/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "kamamsr/errors.hpp"

namespace kamamsr {

namespace {

double dist2(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

// Nearest centroid, ties to the lowest index.
int nearest(const Point2& p, std::span<const Point2> centroids, double* d2 = nullptr) {
  int best = 0;
  double bd = dist2(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = dist2(p, centroids[c]);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (d2) *d2 = bd;
  return best;
}

double assign(std::span<const Point2> points, std::span<const Point2> centroids,
              std::vector<int>& labels) {
  labels.resize(points.size());
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = 0.0;
    labels[i] = nearest(points[i], centroids, &d);
    sse += d;
  }
  return sse;
}

std::vector<Point2> update(std::span<const Point2> points, const std::vector<int>& labels,
                           const std::vector<Point2>& previous) {
  const std::size_t k = previous.size();
  std::vector<Point2> sums(k, Point2{0.0, 0.0});
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    sums[labels[i]][0] += points[i][0];
    sums[labels[i]][1] += points[i][1];
    ++counts[labels[i]];
  }
  std::vector<Point2> next(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      next[c] = {sums[c][0] / static_cast<double>(counts[c]),
                 sums[c][1] / static_cast<double>(counts[c])};
    }
  }
  std::vector<bool> taken(points.size(), false);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    // relocate an empty cluster onto the worst-served point
    std::size_t far = 0;
    double fd = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (taken[i] || counts[labels[i]] < 2) continue;
      const double d = dist2(points[i], next[labels[i]]);
      if (d > fd) {
        fd = d;
        far = i;
      }
    }
    if (fd < 0.0) {
      next[c] = previous[c];
      continue;
    }
    taken[far] = true;
    next[c] = points[far];
  }
  return next;
}

}  // namespace

LloydResult lloyd(std::span<const Point2> points, std::vector<Point2> centroids, int max_iter) {
  if (points.empty() || centroids.empty()) throw std::invalid_argument("lloyd: empty input");
  LloydResult res;
  std::vector<int> labels;
  double sse = assign(points, centroids, labels);
  res.sse_trace.push_back(sse);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<Point2> next = update(points, labels, centroids);
    std::vector<int> next_labels;
    const double next_sse = assign(points, next, next_labels);
    res.sse_trace.push_back(next_sse);
    centroids = std::move(next);
    sse = next_sse;
    ++res.iterations;
    const bool fixed = next_labels == labels;
    labels = std::move(next_labels);
    if (fixed) break;
  }
  res.centroids = std::move(centroids);
  res.labels = std::move(labels);
  res.sse = sse;
  return res;
}

std::vector<Point2> kmeans_plus_plus(std::span<const Point2> points, int k, std::uint64_t seed,
                                     int init) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(init)));
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point2> c;
  c.reserve(k);
  c.push_back(points[pick(rng)]);
  std::vector<double> d2(points.size());
  while (static_cast<int>(c.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest(points[i], c, &d2[i]);
      total += d2[i];
    }
    if (!(total > 0.0)) break;
    const double x = u(rng) * total;
    double acc = 0.0;
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      acc += d2[i];
      if (x < acc && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    while (d2[chosen] == 0.0 && chosen > 0) --chosen;
    c.push_back(points[chosen]);
  }
  return c;
}

std::size_t count_distinct(std::span<const Point2> points) {
  std::set<Point2> s(points.begin(), points.end());
  return s.size();
}

KMeansModel kmeans_fit(std::span<const Point2> points, const KMeansConfig& cfg, std::uint64_t seed) {
  if (cfg.k < 1 || cfg.n_init < 1 || cfg.max_iter < 1)
    throw std::invalid_argument("kmeans_fit: k, n_init and max_iter must be positive");
  if (count_distinct(points) < static_cast<std::size_t>(cfg.k))
    throw std::invalid_argument("kmeans_fit: fewer than k distinct points");

  KMeansModel model;
  model.k = cfg.k;
  const double n = static_cast<double>(points.size());
  for (int d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& p : points) mean += p[d];
    mean /= n;
    double ss = 0.0;
    for (const auto& p : points) ss += (p[d] - mean) * (p[d] - mean);
    const double sd = std::sqrt(ss / n);
    model.feature_means[d] = mean;
    model.feature_stds[d] = sd > 0.0 ? sd : 1.0;
  }
  std::vector<Point2> z(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int d = 0; d < 2; ++d)
      z[i][d] = (points[i][d] - model.feature_means[d]) / model.feature_stds[d];

  double best = std::numeric_limits<double>::infinity();
  for (int init = 0; init < cfg.n_init; ++init) {
    LloydResult r = lloyd(z, kmeans_plus_plus(z, cfg.k, seed, init), cfg.max_iter);
    if (r.sse < best) {
      best = r.sse;
      model.centroids = std::move(r.centroids);
      model.labels = std::move(r.labels);
      model.sse = r.sse;
      model.best_init = init;
    }
  }
  return model;
}

std::vector<int> kmeans_predict(const KMeansModel& model, std::span<const Point2> points) {
  if (model.centroids.empty()) throw std::invalid_argument("kmeans_predict: model not fitted");
  std::vector<int> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 z{(points[i][0] - model.feature_means[0]) / model.feature_stds[0],
                   (points[i][1] - model.feature_means[1]) / model.feature_stds[1]};
    out[i] = nearest(z, model.centroids);
  }
  return out;
}

long GroupingMatrix::total() const {
  long t = 0;
  for (const auto& row : counts)
    for (long v : row) t += v;
  return t;
}

GroupingMatrix grouping_matrix(std::span<const int> clusters, std::span<const RegimeLabel> labels,
                               std::span<const long> weights) {
  if (clusters.size() != labels.size() || (!weights.empty() && weights.size() != labels.size()))
    throw std::invalid_argument("grouping_matrix: length mismatch");
  GroupingMatrix m;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i] < 0 || clusters[i] >= 4)
      throw std::invalid_argument("grouping_matrix: cluster index out of range");
    m.counts[clusters[i]][label_index(labels[i])] += weights.empty() ? 1 : weights[i];
  }
  return m;
}

std::array<long, 4> row_misclassifications(const GroupingMatrix& m) {
  std::array<long, 4> out{};
  for (std::size_t r = 0; r < 4; ++r) {
    long sum = 0, top = 0;
    for (long v : m.counts[r]) {
      sum += v;
      top = std::max(top, v);
    }
    out[r] = sum - top;
  }
  return out;
}

double misclassification_score(const GroupingMatrix& m, long total_segments) {
  if (total_segments <= 0) throw std::invalid_argument("misclassification_score: no segments");
  long wrong = 0;
  for (long v : row_misclassifications(m)) wrong += v;
  return static_cast<double>(wrong) / static_cast<double>(total_segments);
}

std::string_view to_string(ScoreDenominator d) {
  return d == ScoreDenominator::Segments ? "segments" : "days";
}

ScoreDenominator score_denominator_from_string(std::string_view s) {
  if (s == "segments") return ScoreDenominator::Segments;
  if (s == "days") return ScoreDenominator::Days;
  throw std::invalid_argument("unknown score denominator: " + std::string(s));
}

std::array<Fold, 2> walk_forward_folds(std::size_t n) {
  const std::size_t half = n / 2;
  const std::size_t three_q = (3 * n) / 4;
  return {Fold{0, half, half, three_q}, Fold{0, three_q, three_q, n}};
}

CvResult walk_forward_cv(std::span<const Segment> segments, const CvConfig& cfg) {
  if (segments.size() < kMinCvSegments)
    throw std::invalid_argument("walk_forward_cv: need at least " +
                                std::to_string(kMinCvSegments) + " segments");
  CvResult res;
  res.folds = walk_forward_folds(segments.size());
  double sum = 0.0;
  for (const Fold& fold : res.folds) {
    std::vector<Point2> train, val;
    std::vector<RegimeLabel> val_labels;
    std::vector<long> val_days;
    for (std::size_t i = fold.train_begin; i < fold.train_end; ++i)
      train.push_back({segments[i].slope, segments[i].volatility});
    for (std::size_t i = fold.val_begin; i < fold.val_end; ++i) {
      val.push_back({segments[i].slope, segments[i].volatility});
      val_labels.push_back(segments[i].label);
      val_days.push_back(static_cast<long>(segments[i].n_days));
    }
    KMeansConfig km = cfg.kmeans;
    km.k = static_cast<int>(std::min<std::size_t>(km.k, count_distinct(train)));
    const KMeansModel model = kmeans_fit(train, km, cfg.seed);
    const std::vector<int> pred = kmeans_predict(model, val);
    const GroupingMatrix gm =
        cfg.denominator == ScoreDenominator::Days
            ? grouping_matrix(pred, val_labels, val_days)
            : grouping_matrix(pred, val_labels);
    const double s = misclassification_score(gm, gm.total());
    res.per_fold.push_back(s);
    sum += s;
  }
  res.cv_score = sum / static_cast<double>(res.folds.size());
  return res;
}

void ParamRanges::validate() const {
  if (n_min < 2 || n_min > n_max) throw std::invalid_argument("ranges: bad n range");
  if (n_s_min < 2 || n_s_min > n_s_max) throw std::invalid_argument("ranges: bad n_s range");
  if (n_l_min > n_l_max || n_l_max <= n_s_min)
    throw std::invalid_argument("ranges: bad n_l range (need some n_s < n_l)");
  if (!(gamma_min > 0.0) || gamma_min > gamma_max)
    throw std::invalid_argument("ranges: bad gamma range");
}

KamaParams draw_params(const ParamRanges& ranges, std::uint64_t seed, int trial,
                       CoefficientForm form, SellReference sell_ref) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(trial)));
  std::uniform_int_distribution<int> n(ranges.n_min, ranges.n_max);
  std::uniform_int_distribution<int> ns(ranges.n_s_min, ranges.n_s_max);
  std::uniform_int_distribution<int> nl(ranges.n_l_min, ranges.n_l_max);
  std::uniform_real_distribution<double> g(ranges.gamma_min, ranges.gamma_max);
  KamaParams p;
  p.coefficient_form = form;
  p.sell_reference = sell_ref;
  p.n = n(rng);
  do {
    p.n_s = ns(rng);
    p.n_l = nl(rng);
  } while (p.n_s >= p.n_l);
  p.gamma = g(rng);
  return p;
}

TrialResult evaluate_params(std::span<const double> closes, std::span<const double> p_low,
                            const KamaParams& params, const SearchConfig& cfg) {
  TrialResult tr;
  tr.params = params;
  const KamaSeries ks = kama_series(closes, params);
  const auto signals = trend_signals(ks, params);
  const auto labels = label_days(p_low, signals, cfg.threshold);
  const auto segs = segment_features(closes, segment(labels));
  tr.n_segments = segs.size();
  if (segs.size() < kMinCvSegments) {
    tr.insufficient_segments = true;
    tr.cv_score = 1.0;
    return tr;
  }
  const CvResult cv = walk_forward_cv(segs, cfg.cv);
  tr.cv_score = cv.cv_score;
  tr.per_fold_scores = cv.per_fold;
  return tr;
}

SearchResult random_search(std::span<const double> closes, std::span<const double> p_low,
                           const SearchConfig& cfg, Execution exec) {
  cfg.ranges.validate();
  if (cfg.n_trials < 1) throw std::invalid_argument("random_search: n_trials must be >= 1");
  if (p_low.size() != closes.size())
    throw std::invalid_argument("random_search: probabilities not aligned to prices");
  const auto longest = static_cast<std::size_t>(std::max(cfg.ranges.n_l_max, cfg.ranges.n_max));
  if (closes.size() <= longest)
    throw ConfigError("training partition (" + std::to_string(closes.size()) +
                      " days) is too short for the largest KAMA window (" +
                      std::to_string(longest) + ")");

  SearchResult res;
  res.trials.resize(static_cast<std::size_t>(cfg.n_trials));
  const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int t = 0; t < cfg.n_trials; ++t) {
    const KamaParams p =
        draw_params(cfg.ranges, cfg.seed, t, cfg.coefficient_form, cfg.sell_reference);
    TrialResult tr;
    try {
      tr = evaluate_params(closes, p_low, p, cfg);
    } catch (const std::exception&) {
      tr = TrialResult{};
      tr.params = p;
      tr.insufficient_segments = true;
      tr.cv_score = 1.0;
    }
    tr.trial = t;
    res.trials[t] = std::move(tr);
  }
  std::size_t best = 0;
  for (std::size_t t = 1; t < res.trials.size(); ++t)
    if (res.trials[t].cv_score < res.trials[best].cv_score) best = t;
  res.best = res.trials[best];
  return res;
}

nlohmann::json to_json(const KamaParams& p) {
  return {{"n", p.n},
          {"n_s", p.n_s},
          {"n_l", p.n_l},
          {"gamma", p.gamma},
          {"coefficient_form", std::string(to_string(p.coefficient_form))},
          {"sell_reference", std::string(to_string(p.sell_reference))}};
}

KamaParams kama_params_from_json(const nlohmann::json& j) {
  KamaParams p;
  p.n = j.value("n", p.n);
  p.n_s = j.value("n_s", p.n_s);
  p.n_l = j.value("n_l", p.n_l);
  p.gamma = j.value("gamma", p.gamma);
  if (j.contains("coefficient_form"))
    p.coefficient_form = coefficient_form_from_string(j["coefficient_form"].get<std::string>());
  if (j.contains("sell_reference"))
    p.sell_reference = sell_reference_from_string(j["sell_reference"].get<std::string>());
  p.validate();
  return p;
}

nlohmann::json to_json(const TrialResult& t) {
  return {{"trial", t.trial},
          {"params", to_json(t.params)},
          {"cv_score", t.cv_score},
          {"per_fold_scores", t.per_fold_scores},
          {"n_segments", t.n_segments},
          {"insufficient_segments", t.insufficient_segments}};
}

nlohmann::json to_json(const ParamRanges& r) {
  return {{"n", {r.n_min, r.n_max}},
          {"n_s", {r.n_s_min, r.n_s_max}},
          {"n_l", {r.n_l_min, r.n_l_max}},
          {"gamma", {r.gamma_min, r.gamma_max}}};
}

}  // namespace kamamsr
