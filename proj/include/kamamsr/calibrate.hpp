#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "kamamsr/kama.hpp"
#include "kamamsr/parallel.hpp"
#include "kamamsr/regime.hpp"

namespace kamamsr {

using Point2 = std::array<double, 2>;

struct KMeansConfig {
  int k = 4;
  int n_init = 10;
  int max_iter = 300;
};

struct KMeansModel {
  int k = 0;
  std::vector<Point2> centroids;  // standardized space
  Point2 feature_means{0.0, 0.0};
  Point2 feature_stds{1.0, 1.0};
  std::vector<int> labels;  // training assignments at convergence
  double sse = 0.0;         // within-cluster SSE in standardized space
  int best_init = -1;
};

struct LloydResult {
  std::vector<Point2> centroids;
  std::vector<int> labels;
  double sse = 0.0;
  std::vector<double> sse_trace;  // SSE after each assignment step
  int iterations = 0;
};

// Lloyd iterations from the given centroids until the assignment is a
// fixed point or max_iter. An empty cluster takes the point farthest from
// its current centroid.
LloydResult lloyd(std::span<const Point2> points, std::vector<Point2> centroids, int max_iter);

// k-means++ seeding drawn from derive_seed(seed, init).
std::vector<Point2> kmeans_plus_plus(std::span<const Point2> points, int k,
                                     std::uint64_t seed, int init);

// Standardizes with the points' own mean and population std (a zero std
// becomes 1) and keeps the lowest-SSE init. Throws std::invalid_argument
// with fewer than k distinct points.
KMeansModel kmeans_fit(std::span<const Point2> points, const KMeansConfig& cfg,
                       std::uint64_t seed);
std::vector<int> kmeans_predict(const KMeansModel& model, std::span<const Point2> points);

std::size_t count_distinct(std::span<const Point2> points);

// counts[cluster][label column]; the four active labels only.
struct GroupingMatrix {
  std::array<std::array<long, 4>, 4> counts{};
  long total() const;
};

// Optional weights (e.g. day counts) replace the unit tally per segment.
GroupingMatrix grouping_matrix(std::span<const int> clusters,
                               std::span<const RegimeLabel> labels,
                               std::span<const long> weights = {});

// Per cluster: row sum minus row max.
std::array<long, 4> row_misclassifications(const GroupingMatrix& m);
// Sum of row misclassifications / total_segments.
double misclassification_score(const GroupingMatrix& m, long total_segments);

enum class ScoreDenominator { Segments, Days };
std::string_view to_string(ScoreDenominator d);
ScoreDenominator score_denominator_from_string(std::string_view s);

struct CvConfig {
  KMeansConfig kmeans;
  std::uint64_t seed = 0;
  ScoreDenominator denominator = ScoreDenominator::Segments;
};

struct Fold {
  std::size_t train_begin = 0, train_end = 0;  // half-open segment ranges
  std::size_t val_begin = 0, val_end = 0;
};

// Fold 1: train [0, N/2), validate [N/2, 3N/4); fold 2: train [0, 3N/4),
// validate [3N/4, N). Integer division throughout.
std::array<Fold, 2> walk_forward_folds(std::size_t n_segments);

struct CvResult {
  double cv_score = 1.0;
  std::vector<double> per_fold;
  std::array<Fold, 2> folds{};
};

inline constexpr std::size_t kMinCvSegments = 8;

// Segments must carry features and be in chronological order. Throws
// std::invalid_argument with fewer than kMinCvSegments segments.
CvResult walk_forward_cv(std::span<const Segment> segments, const CvConfig& cfg);

struct ParamRanges {
  int n_min = 5, n_max = 100;
  int n_s_min = 2, n_s_max = 10;
  int n_l_min = 20, n_l_max = 60;
  double gamma_min = 0.1, gamma_max = 3.0;

  void validate() const;
};

struct TrialResult {
  int trial = 0;
  KamaParams params;
  double cv_score = 1.0;
  std::vector<double> per_fold_scores;
  std::size_t n_segments = 0;
  bool insufficient_segments = false;
};

struct SearchConfig {
  int n_trials = 50;
  std::uint64_t seed = 0;
  ParamRanges ranges;
  CvConfig cv;
  double threshold = 0.5;
  // Carried into every trial; not searched.
  CoefficientForm coefficient_form = CoefficientForm::Conventional;
  SellReference sell_reference = SellReference::Low;
};

struct SearchResult {
  TrialResult best;
  std::vector<TrialResult> trials;  // trial order
};

KamaParams draw_params(const ParamRanges& ranges, std::uint64_t seed, int trial,
                       CoefficientForm form, SellReference sell_ref);

// Full labelling + segmentation + walk-forward CV for one parameter vector.
// p_low is aligned to price days (NaN where undefined).
TrialResult evaluate_params(std::span<const double> closes, std::span<const double> p_low,
                            const KamaParams& params, const SearchConfig& cfg);

// Lowest cv_score wins, ties to the earliest trial. Throws ConfigError when
// the series is too short for the largest n_l in the ranges.
SearchResult random_search(std::span<const double> closes, std::span<const double> p_low,
                           const SearchConfig& cfg, Execution exec = Execution::Parallel);

nlohmann::json to_json(const KamaParams& p);
KamaParams kama_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrialResult& t);
nlohmann::json to_json(const ParamRanges& r);

}  // namespace kamamsr
