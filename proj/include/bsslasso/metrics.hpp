#pragma once

// Truth/estimate matching, error bands and contingency statistics.

#include <bsslasso/fiber_model.hpp>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bsslasso {

inline constexpr double kMatchRadius = 50.0;

struct MatchPair {
  std::size_t truth = 0;     // index into the link's events
  std::size_t estimate = 0;  // index into the estimate list
  double error_m = 0.0;      // |estimate - truth|
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // optimal assignment, including pairs beyond the radius
  std::vector<std::size_t> unmatched_truths;
  std::vector<std::size_t> unmatched_estimates;
  double radius_m = kMatchRadius;
  std::size_t truth_count = 0;
  std::size_t estimate_count = 0;

  std::size_t true_positives() const;
  // Unmatched plus the truth side of every over-radius pair.
  std::size_t false_negatives() const;
  std::size_t false_positives() const;
};

// Minimum-cost assignment of rows to distinct columns (rows <= columns).
// Returns the column chosen for each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

MatchResult match_events(std::span<const double> truth_positions, std::span<const double> estimate_positions,
                         double radius_m = kMatchRadius);
MatchResult match_events(const FiberLink& truth, std::span<const double> estimate_positions,
                         double radius_m = kMatchRadius);

inline constexpr std::array<double, 3> kBandEdges{50.0, 100.0, 200.0};
inline constexpr std::array<const char*, 4> kBandLabels{"[0,50]", "(50,100]", "(100,200]", "(200,inf)"};

struct ErrorBands {
  std::array<std::size_t, 4> counts{};
  std::size_t total = 0;  // truth events
  double percent(std::size_t band) const;
};

std::size_t band_of(double error_m);

// Unmatched truths land in the last band. Throws InvalidInput on an empty bench.
ErrorBands stratify_errors(std::span<const MatchResult> matches);

struct ContingencyTable {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t true_negatives = 0;

  std::optional<double> sensitivity() const;  // TP / (TP + FN)
  std::optional<double> specificity() const;  // TN / (TN + FP)
  std::optional<double> precision() const;    // TP / (TP + FP)
};

// TN = sum of grid sizes minus every other cell.
ContingencyTable contingency(std::span<const MatchResult> matches, std::span<const std::size_t> grid_sizes);

// Estimator grid size of a link: floor(L / step).
std::size_t grid_size_for(double length_m, double step_m);

struct ModeEvaluation {
  std::string label;
  std::vector<MatchResult> matches;  // one per link
  std::vector<std::vector<double>> truth_positions;
  std::vector<std::vector<double>> estimate_positions;
  ErrorBands bands;
  ContingencyTable table;
};

ModeEvaluation evaluate_mode(const std::string& label, std::span<const FiberLink> truths,
                             const std::vector<std::vector<double>>& estimates, double grid_step_m,
                             double radius_m = kMatchRadius);

// Human tables in the error-band and contingency layouts, two decimals.
std::string evaluation_text(std::span<const ModeEvaluation> modes);
// mode,link,kind,truth_index,estimate_index,truth_position_m,estimate_position_m,error_m,band
std::string evaluation_csv(std::span<const ModeEvaluation> modes);

}  // namespace bsslasso
