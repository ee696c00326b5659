#pragma once

// Over-complete phasor dictionary: one step atom and one spike atom per
// candidate position, real and imaginary parts stacked, scaled by 1/L.

#include <bsslasso/fiber_model.hpp>

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace bsslasso {

struct PositionGrid {
  std::vector<double> positions;  // step, 2 step, ..., <= length
  double step = 0.0;

  std::size_t size() const { return positions.size(); }

  // Grid starting one step in (the S_B(f, 0) column is identically zero).
  static PositionGrid uniform(double length_m, double step_m);
  void validate() const;
};

struct Dictionary {
  Eigen::MatrixXd matrix;  // 2m x (q [+ q] [+ 1]), column-major
  PositionGrid grid;
  std::vector<double> frequencies;
  PhysicalConstants constants;
  double length_m = 0.0;
  double normalization = 0.0;  // 1 / L
  bool has_reflections = true;
  bool has_intercept = false;

  std::size_t q() const { return grid.size(); }
  std::size_t rows() const { return static_cast<std::size_t>(matrix.rows()); }
  // Columns carrying a penalty (fault block plus reflection block).
  std::size_t penalized_columns() const { return has_reflections ? 2 * q() : q(); }
  std::size_t fault_column(std::size_t j) const { return j; }
  std::size_t reflection_column(std::size_t j) const { return q() + j; }
  std::size_t intercept_column() const { return penalized_columns(); }
};

// Throws InvalidInput on an empty grid or frequency set.
Dictionary build_dictionary(const PositionGrid& grid, std::span<const double> frequencies,
                            const PhysicalConstants& constants, double length_m,
                            bool include_reflections, bool include_intercept = false);

// y = [Re S(F); Im S(F)].
Eigen::VectorXd build_observation(const FrequencyProfile& profile);

// Inverse of build_observation on the dictionary's frequency grid.
FrequencyProfile profile_from_observation(const Eigen::VectorXd& y, std::span<const double> frequencies);

// M^T M over the penalized columns, assembled from per-frequency lag sums in
// O(q m + q^2) rather than a dense product. Requires a uniform position grid.
Eigen::MatrixXd penalized_gram(const Dictionary& dict);

}  // namespace bsslasso
