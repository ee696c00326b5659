#include <bsslasso/lasso.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bsslasso {

namespace {

// Per-round cap on the compact active-set sweeps; the exact refinement that
// follows absorbs whatever slow creep remains on near-collinear atoms.
constexpr std::size_t kActiveSweepsPerRound = 200;

std::vector<Eigen::Index> support_of(const Eigen::VectorXd& beta) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) > 0.0) s.push_back(j);
  }
  return s;
}

// g = c - G beta over all columns, touching only the support.
Eigen::VectorXd gradient_residual(const Design& d, const Eigen::VectorXd& beta) {
  Eigen::VectorXd g = d.correlation();
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) g.noalias() -= d.gram().col(j) * beta(j);
  }
  return g;
}

double quadratic_objective(const Design& d, const Eigen::VectorXd& half_penalty, const Eigen::VectorXd& beta) {
  double f = d.y_norm2();
  const std::vector<Eigen::Index> s = support_of(beta);
  for (Eigen::Index i : s) {
    f += 2.0 * (half_penalty(i) - d.correlation()(i)) * beta(i);
    for (Eigen::Index j : s) f += beta(i) * d.gram()(i, j) * beta(j);
  }
  return f;
}

double kkt_from_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& half_penalty,
                         const Eigen::VectorXd& beta, double scale) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    // d objective / d beta_j = 2 (h_j - g_j)
    const double grad = 2.0 * (half_penalty(j) - g(j));
    const double v = beta(j) > 0.0 ? std::abs(grad) : std::max(0.0, -grad);
    worst = std::max(worst, v);
  }
  if (scale <= 0.0) return worst == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return worst / scale;
}

double gradient_scale(const Design& d) { return 2.0 * d.correlation().cwiseAbs().maxCoeff(); }

// Exact minimization over the current face: Newton step onto the support,
// stepping back to the boundary and dropping a coordinate whenever the
// unconstrained face minimizer leaves the orthant.
void polish_support(const Design& d, const Eigen::VectorXd& half_penalty, Eigen::VectorXd& beta) {
  const double slack = 1e-13 * std::max(d.y_norm2(), std::numeric_limits<double>::min());
  double current = quadratic_objective(d, half_penalty, beta);
  std::vector<Eigen::Index> active = support_of(beta);
  for (std::size_t iter = 0; iter < 4 * active.size() + 8 && !active.empty(); ++iter) {
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd ga(k, k);
    Eigen::VectorXd rhs(k);
    Eigen::VectorXd cur(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      rhs(a) = d.correlation()(active[a]) - half_penalty(active[a]);
      cur(a) = beta(active[a]);
      for (Eigen::Index b = 0; b < k; ++b) ga(a, b) = d.gram()(active[a], active[b]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ga);
    if (ldlt.info() != Eigen::Success) return;
    const Eigen::VectorXd x = ldlt.solve(rhs);
    if (!x.allFinite()) return;

    Eigen::VectorXd next = x;
    bool interior = true;
    if (x.minCoeff() <= 0.0) {
      interior = false;
      double t = 1.0;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (x(a) <= 0.0) t = std::min(t, cur(a) / (cur(a) - x(a)));
      }
      next = cur + t * (x - cur);
      for (Eigen::Index a = 0; a < k; ++a) {
        if (x(a) <= 0.0 && cur(a) / (cur(a) - x(a)) <= t) next(a) = 0.0;
        next(a) = std::max(0.0, next(a));
      }
    }
    Eigen::VectorXd trial = beta;
    for (Eigen::Index a = 0; a < k; ++a) trial(active[a]) = next(a);
    const double value = quadratic_objective(d, half_penalty, trial);
    if (value > current + slack) return;
    beta = trial;
    current = value;
    if (interior) return;
    active = support_of(beta);
  }
}

}  // namespace

Design Design::from_dictionary(const Dictionary& dict, const Eigen::VectorXd& y) {
  if (static_cast<std::size_t>(y.size()) != dict.rows()) throw InvalidInput("observation/dictionary row mismatch");
  const auto p = static_cast<Eigen::Index>(dict.penalized_columns());
  Design d;
  d.matrix_ = std::make_shared<const Eigen::MatrixXd>(dict.matrix.leftCols(p));
  d.y_ = std::make_shared<const Eigen::VectorXd>(y);
  d.columns_.resize(static_cast<std::size_t>(p));
  std::iota(d.columns_.begin(), d.columns_.end(), Eigen::Index{0});
  d.gram_ = penalized_gram(dict);
  d.correlation_ = d.matrix_->transpose() * y;
  d.intercept_ = dict.has_intercept;
  d.y_norm2_ = y.squaredNorm();
  d.y_max_abs_ = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
  d.column_means_ = Eigen::VectorXd::Zero(p);
  if (d.intercept_) {
    const double n = static_cast<double>(y.size());
    d.y_mean_ = y.mean();
    d.column_means_ = d.matrix_->colwise().mean().transpose();
    d.gram_.noalias() -= n * d.column_means_ * d.column_means_.transpose();
    d.correlation_ -= n * d.y_mean_ * d.column_means_;
    d.y_norm2_ -= n * d.y_mean_ * d.y_mean_;
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(d.gram_(j, j) > 0.0)) throw InvalidInput("dictionary has a zero column");
  }
  return d;
}

Design Design::from_matrix(const Eigen::MatrixXd& columns, const Eigen::VectorXd& y, bool intercept) {
  if (columns.rows() != y.size()) throw InvalidInput("observation/matrix row mismatch");
  Design d;
  d.matrix_ = std::make_shared<const Eigen::MatrixXd>(columns);
  d.y_ = std::make_shared<const Eigen::VectorXd>(y);
  d.columns_.resize(static_cast<std::size_t>(columns.cols()));
  std::iota(d.columns_.begin(), d.columns_.end(), Eigen::Index{0});
  d.intercept_ = intercept;
  d.y_max_abs_ = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
  if (intercept) {
    d.y_mean_ = y.mean();
    d.column_means_ = columns.colwise().mean().transpose();
    const Eigen::MatrixXd centered = columns.rowwise() - d.column_means_.transpose();
    const Eigen::VectorXd yc = y.array() - d.y_mean_;
    d.gram_ = centered.transpose() * centered;
    d.correlation_ = centered.transpose() * yc;
    d.y_norm2_ = yc.squaredNorm();
  } else {
    d.column_means_ = Eigen::VectorXd::Zero(columns.cols());
    d.gram_ = columns.transpose() * columns;
    d.correlation_ = columns.transpose() * y;
    d.y_norm2_ = y.squaredNorm();
  }
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    if (!(d.gram_(j, j) > 0.0)) throw InvalidInput("design has a zero column");
  }
  return d;
}

Design Design::restricted(std::span<const Eigen::Index> keep) const {
  Design d;
  d.matrix_ = matrix_;
  d.y_ = y_;
  d.intercept_ = intercept_;
  d.y_mean_ = y_mean_;
  d.y_norm2_ = y_norm2_;
  d.y_max_abs_ = y_max_abs_;
  const auto k = static_cast<Eigen::Index>(keep.size());
  d.columns_.resize(keep.size());
  d.gram_.resize(k, k);
  d.correlation_.resize(k);
  d.column_means_.resize(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (keep[a] < 0 || static_cast<std::size_t>(keep[a]) >= columns_.size())
      throw InvalidInput("restricted column out of range");
    d.columns_[a] = columns_[keep[a]];
    d.correlation_(a) = correlation_(keep[a]);
    d.column_means_(a) = column_means_(keep[a]);
    for (Eigen::Index b = 0; b < k; ++b) d.gram_(a, b) = gram_(keep[a], keep[b]);
  }
  return d;
}

Eigen::VectorXd Design::column(std::size_t j) const { return matrix_->col(columns_.at(j)); }

double Design::intercept(const Eigen::VectorXd& beta) const {
  if (!intercept_) return 0.0;
  double v = y_mean_;
  for (Eigen::Index j = 0; j < beta.size(); ++j) v -= column_means_(j) * beta(j);
  return v;
}

Eigen::VectorXd Design::fitted(const Eigen::VectorXd& beta) const {
  if (static_cast<std::size_t>(beta.size()) != columns_.size()) throw InvalidInput("beta length mismatch");
  Eigen::VectorXd f = Eigen::VectorXd::Constant(matrix_->rows(), intercept(beta));
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) f.noalias() += matrix_->col(columns_[static_cast<std::size_t>(j)]) * beta(j);
  }
  return f;
}

double Design::rss(const Eigen::VectorXd& beta) const { return (*y_ - fitted(beta)).squaredNorm(); }

void LassoProblem::validate() const {
  if (!design) throw InvalidInput("lasso problem has no design");
  if (static_cast<std::size_t>(weights.size()) != design->n_cols())
    throw InvalidInput("weight vector length differs from the penalized column count");
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    if (!(weights(j) > 0.0 && weights(j) <= 1.0)) throw InvalidInput("weights must lie in (0, 1]");
  }
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0)) throw InvalidInput("lambda values must be positive");
    if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1])) throw InvalidInput("lambda grid must be strictly decreasing");
  }
}

std::vector<double> default_lambda_grid(const Design& design, const Eigen::VectorXd& weights, std::size_t count,
                                        double decades) {
  if (count == 0) throw InvalidInput("lambda grid needs at least one point");
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    lmax = std::max(lmax, 2.0 * std::abs(design.correlation()(j)) / weights(j));
  }
  if (!(lmax > 0.0)) lmax = 1.0;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
    grid[i] = lmax * std::pow(10.0, -decades * frac);
  }
  return grid;
}

double lasso_objective(const Design& design, const Eigen::VectorXd& weights, double lambda,
                       const Eigen::VectorXd& beta) {
  return design.rss(beta) + lambda * weights.dot(beta);
}

double kkt_violation(const Design& design, const Eigen::VectorXd& weights, double lambda,
                     const Eigen::VectorXd& beta) {
  const Eigen::VectorXd h = 0.5 * lambda * weights;
  return kkt_from_gradient(gradient_residual(design, beta), h, beta, gradient_scale(design));
}

double ebic(double rss, std::size_t nnz, std::size_t n_obs, std::size_t n_cols, double gamma) {
  if (nnz >= n_obs) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(n_obs);
  const double k = static_cast<double>(nnz);
  const double p = static_cast<double>(std::max<std::size_t>(n_cols, 1));
  return n * std::log(rss / n) + k * std::log(n) + 2.0 * gamma * k * std::log(p);
}

LassoSolution solve_single(const LassoProblem& problem, double lambda, const SolverOptions& options,
                           const Eigen::VectorXd* warm_start) {
  if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
  if (!problem.design) throw InvalidInput("lasso problem has no design");
  const Design& d = *problem.design;
  const auto p = static_cast<Eigen::Index>(d.n_cols());
  if (problem.weights.size() != p) throw InvalidInput("weight vector length differs from the column count");

  const Eigen::VectorXd h = 0.5 * lambda * problem.weights;
  const Eigen::MatrixXd& gram = d.gram();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (warm_start) {
    if (warm_start->size() != p) throw InvalidInput("warm start length mismatch");
    beta = warm_start->cwiseMax(0.0);
  }
  const double tol = options.update_tolerance * std::max(d.y_max_abs(), std::numeric_limits<double>::min());
  const double scale = gradient_scale(d);

  std::size_t sweeps = 0;
  std::size_t full_sweeps = 0;
  double kkt = std::numeric_limits<double>::infinity();
  while (true) {
    // full cyclic pass with the complete gradient
    Eigen::VectorXd g = gradient_residual(d, beta);
    double delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double next = std::max(0.0, beta(j) + (g(j) - h(j)) / gram(j, j));
      const double step = next - beta(j);
      if (step != 0.0) {
        beta(j) = next;
        g.noalias() -= gram.col(j) * step;
        delta = std::max(delta, std::abs(step));
      }
    }
    ++sweeps;
    ++full_sweeps;
    if (delta < tol) {
      kkt = kkt_from_gradient(g, h, beta, scale);
      if (kkt <= options.kkt_tolerance || !options.polish) break;
    }

    // compact sweeps over the support
    const std::vector<Eigen::Index> active = support_of(beta);
    const auto k = static_cast<Eigen::Index>(active.size());
    if (k > 0) {
      Eigen::MatrixXd ga(k, k);
      Eigen::VectorXd ba(k), gaa(k), ha(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        ba(a) = beta(active[a]);
        gaa(a) = g(active[a]);
        ha(a) = h(active[a]);
        for (Eigen::Index b = 0; b < k; ++b) ga(a, b) = gram(active[a], active[b]);
      }
      for (std::size_t s = 0; s < kActiveSweepsPerRound; ++s) {
        double active_delta = 0.0;
        for (Eigen::Index a = 0; a < k; ++a) {
          const double next = std::max(0.0, ba(a) + (gaa(a) - ha(a)) / ga(a, a));
          const double step = next - ba(a);
          if (step != 0.0) {
            ba(a) = next;
            gaa.noalias() -= ga.col(a) * step;
            active_delta = std::max(active_delta, std::abs(step));
          }
        }
        ++sweeps;
        if (active_delta < tol) break;
      }
      for (Eigen::Index a = 0; a < k; ++a) beta(active[a]) = ba(a);
    }

    if (options.polish) {
      polish_support(d, h, beta);
      kkt = kkt_violation(d, problem.weights, lambda, beta);
      if (kkt <= options.kkt_tolerance) break;
    }
    if (full_sweeps >= options.max_sweeps) {
      kkt = kkt_violation(d, problem.weights, lambda, beta);
      break;
    }
  }

  if (kkt > options.kkt_tolerance) {
    throw SolverError("coordinate descent did not reach the KKT tolerance (lambda = " + std::to_string(lambda) + ")",
                      kkt);
  }

  LassoSolution sol;
  sol.beta = std::move(beta);
  sol.intercept = d.intercept(sol.beta);
  sol.lambda = lambda;
  sol.rss = d.rss(sol.beta);
  sol.nnz = static_cast<std::size_t>((sol.beta.array() > 0.0).count());
  sol.kkt_violation = kkt;
  sol.sweeps = sweeps;
  const double floor = std::numeric_limits<double>::epsilon() * d.y_norm2();
  sol.ebic = ebic(std::max(sol.rss, floor), sol.nnz, d.n_obs(), d.n_cols(), 1.0);
  return sol;
}

PathResult solve_path(const LassoProblem& problem, const PathOptions& options) {
  problem.validate();
  if (problem.lambda_grid.empty()) throw InvalidInput("lambda grid is empty");
  const Design& d = *problem.design;
  const double floor = std::numeric_limits<double>::epsilon() * d.y_norm2();

  PathResult result;
  result.points.reserve(problem.lambda_grid.size());
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.n_cols()));
  bool have_best = false;
  for (double lambda : problem.lambda_grid) {
    LassoSolution sol = solve_single(problem, lambda, options.solver, &warm);
    sol.ebic = ebic(std::max(sol.rss, floor), sol.nnz, d.n_obs(), d.n_cols(), options.ebic_gamma);
    result.points.push_back(PathPoint{lambda, sol.rss, sol.ebic, sol.nnz});
    warm = sol.beta;
    if (!have_best || sol.ebic < result.best.ebic) {
      result.best = std::move(sol);
      have_best = true;
    }
  }
  return result;
}

}  // namespace bsslasso
