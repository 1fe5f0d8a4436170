#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deskrl/rng.hpp"

namespace deskrl {

/// Raw per-game, per-run scores with (random, human) reference anchors.
struct ScoreMatrix {
    std::vector<std::string> games;
    std::vector<std::vector<double>> scores;          // ragged: runs per game
    std::vector<std::pair<double, double>> anchors;   // (random, human)

    void validate() const;
    std::vector<double> pooled_normalized() const;
};

/// Human-normalized score: affine map sending random -> 0 and human -> 1.
double normalize_score(double score, double random_ref, double human_ref);

/// Interquartile mean: mean of the middle 50% of the values, fractional
/// boundary samples weighted linearly.
double iqm(const std::vector<double>& values);

/// Mean shortfall below 1.0 with values above 1 capped.
double optimality_gap(const std::vector<double>& normalized);

double median(const std::vector<double>& values);
double mean(const std::vector<double>& values);

enum class Metric { Iqm, OptimalityGap, Median, Mean };

double compute_metric(Metric m, const std::vector<double>& normalized);

/// Percentile bootstrap interval: runs are resampled with replacement
/// independently within each game, the metric recomputed on the pooled
/// normalized scores. Resample r uses the sub-stream rng.stream(r), so the
/// result is deterministic per (seed, resamples) and resamples could be
/// evaluated in parallel.
std::pair<double, double> stratified_bootstrap_ci(const ScoreMatrix& matrix, Metric metric, int resamples,
                                                  double confidence, Rng& rng);

/// Seeded Fisher-Yates shuffle, first `count` names taken.
std::vector<std::string> random_subset(const std::vector<std::string>& games, std::uint64_t seed,
                                       int count = 5);

struct CiEntry {
    double low = 0.0;
    double high = 0.0;
};

struct AggregateReport {
    double iqm = 0.0;
    double optimality_gap = 0.0;
    double median = 0.0;
    double mean = 0.0;
    CiEntry iqm_ci, gap_ci, median_ci, mean_ci;
    double confidence = 0.95;
    int resamples = 0;
};

AggregateReport aggregate_report(const ScoreMatrix& matrix, int resamples, double confidence,
                                 std::uint64_t seed);

std::string render_report(const AggregateReport& report);

/// scores file: csv rows (game, run_id, score); anchors file: csv rows
/// (game, random, human). Games without anchors are all listed in the
/// thrown error.
ScoreMatrix load_scores(const std::string& scores_path, const std::string& anchors_path);

struct Table2Result {
    double mean = 0.0;
    double median = 0.0;
    int games_above_human = 0;
    std::vector<std::pair<std::string, double>> normalized; // per-game means
};

/// Regression over the shipped per-game average fixture (csv rows:
/// game, random, human, score). The file checksum is pinned; a mismatch
/// throws.
Table2Result table2_regression(const std::string& fixture_path);

std::uint64_t fnv1a_file(const std::string& path);

} // namespace deskrl
