#pragma once

// Weighted nonnegative Lasso
//
//   minimize ||y - M beta||^2 + lambda * w^T beta   subject to beta >= 0
//
// solved by cyclic coordinate descent on the Gram system, swept along a
// decreasing lambda grid with warm starts, with the final model picked by EBIC.
// An optional free intercept is profiled out by centering y and the columns.

#include <bsslasso/dictionary.hpp>

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <vector>

namespace bsslasso {

// Second-order summary of a least-squares problem over a set of columns.
class Design {
 public:
  // Uses the closed-form Gram of the dictionary; the intercept column, if
  // present, becomes a free centered offset.
  static Design from_dictionary(const Dictionary& dict, const Eigen::VectorXd& y);
  // Dense route: every column of `columns` is penalized.
  static Design from_matrix(const Eigen::MatrixXd& columns, const Eigen::VectorXd& y, bool intercept);

  // Sub-problem over a subset of the columns, sharing the column data.
  Design restricted(std::span<const Eigen::Index> keep) const;

  std::size_t n_obs() const { return static_cast<std::size_t>(matrix_->rows()); }
  std::size_t n_cols() const { return columns_.size(); }
  bool has_intercept() const { return intercept_; }

  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& correlation() const { return correlation_; }  // M_c^T y_c
  double y_norm2() const { return y_norm2_; }                          // ||y_c||^2
  double y_max_abs() const { return y_max_abs_; }

  // Column j of the design (uncentered), as stored in the source matrix.
  Eigen::VectorXd column(std::size_t j) const;
  // M beta + intercept, with the intercept that is optimal for this beta.
  Eigen::VectorXd fitted(const Eigen::VectorXd& beta) const;
  double intercept(const Eigen::VectorXd& beta) const;
  // ||y - M beta - intercept||^2, from the explicit residual.
  double rss(const Eigen::VectorXd& beta) const;

 private:
  std::shared_ptr<const Eigen::MatrixXd> matrix_;
  std::shared_ptr<const Eigen::VectorXd> y_;
  std::vector<Eigen::Index> columns_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd correlation_;
  Eigen::VectorXd column_means_;
  double y_mean_ = 0.0;
  double y_norm2_ = 0.0;
  double y_max_abs_ = 0.0;
  bool intercept_ = false;
};

struct LassoProblem {
  std::shared_ptr<const Design> design;
  Eigen::VectorXd weights;          // one per penalized column, in (0, 1]
  std::vector<double> lambda_grid;  // strictly decreasing, > 0

  void validate() const;
};

struct SolverOptions {
  std::size_t max_sweeps = 10'000;
  double update_tolerance = 1e-10;  // relative to ||y||_inf
  double kkt_tolerance = 1e-7;
  bool polish = true;  // exact active-set refinement after descent
};

struct LassoSolution {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double lambda = 0.0;
  double ebic = 0.0;
  double rss = 0.0;
  std::size_t nnz = 0;
  double kkt_violation = 0.0;
  std::size_t sweeps = 0;
};

struct PathPoint {
  double lambda = 0.0;
  double rss = 0.0;
  double ebic = 0.0;
  std::size_t nnz = 0;
};

struct PathOptions {
  SolverOptions solver;
  double ebic_gamma = 1.0;
};

struct PathResult {
  LassoSolution best;
  std::vector<PathPoint> points;
};

// lambda_max = 2 max_j |c_j| / w_j, then `count` geometric points down `decades`.
std::vector<double> default_lambda_grid(const Design& design, const Eigen::VectorXd& weights,
                                        std::size_t count = 100, double decades = 4.0);

double lasso_objective(const Design& design, const Eigen::VectorXd& weights, double lambda,
                       const Eigen::VectorXd& beta);

// Largest KKT violation of the nonnegative weighted problem, divided by the
// gradient scale 2 ||M^T y||_inf.
double kkt_violation(const Design& design, const Eigen::VectorXd& weights, double lambda,
                     const Eigen::VectorXd& beta);

// n ln(rss / n) + k ln(n) + 2 gamma k ln(p); rss floored at eps * ||y||^2 by the caller.
double ebic(double rss, std::size_t nnz, std::size_t n_obs, std::size_t n_cols, double gamma);

// Throws SolverError when the KKT certificate cannot be closed within the sweep cap.
LassoSolution solve_single(const LassoProblem& problem, double lambda, const SolverOptions& options = {},
                           const Eigen::VectorXd* warm_start = nullptr);

// Every lambda of the grid, warm-started from the previous one; EBIC ties go
// to the larger lambda.
PathResult solve_path(const LassoProblem& problem, const PathOptions& options = {});

}  // namespace bsslasso
