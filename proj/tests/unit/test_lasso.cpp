#include <bsslasso/lasso.hpp>
#include <bsslasso/nnls.hpp>

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>
#include <random>

using namespace bsslasso;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p, double corr = 0.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd common(n);
  for (Eigen::Index i = 0; i < n; ++i) common(i) = g(rng);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = corr * common(i) + (1.0 - corr) * g(rng);
  }
  return x;
}

Eigen::VectorXd sparse_response(std::mt19937_64& rng, const Eigen::MatrixXd& x, std::size_t k, double noise) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, x.cols() - 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
  for (std::size_t i = 0; i < k; ++i) b(pick(rng)) = 1.0 + std::abs(g(rng));
  Eigen::VectorXd y = x * b;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise * g(rng);
  return y;
}

LassoProblem make_problem(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool intercept = false,
                          Eigen::VectorXd weights = {}) {
  LassoProblem p;
  p.design = std::make_shared<const Design>(Design::from_matrix(x, y, intercept));
  p.weights = weights.size() ? weights : Eigen::VectorXd::Ones(x.cols());
  p.lambda_grid = default_lambda_grid(*p.design, p.weights, 30, 3.0);
  return p;
}

// Accelerated projected gradient on the explicit objective; an optional
// unconstrained, unpenalized intercept is the last coordinate.
double projected_gradient_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                    double lambda, bool intercept) {
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd a = x;
  if (intercept) {
    a.conservativeResize(Eigen::NoChange, p + 1);
    a.col(p).setOnes();
  }
  Eigen::VectorXd pen = Eigen::VectorXd::Zero(a.cols());
  pen.head(p) = lambda * w;
  const Eigen::MatrixXd g = 2.0 * a.transpose() * a;
  const Eigen::VectorXd c = 2.0 * a.transpose() * y;
  const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().maxCoeff();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(a.cols()), prev = b, z = b;
  double t = 1.0;
  for (int it = 0; it < 200'000; ++it) {
    Eigen::VectorXd next = z - (g * z - c + pen) / lip;
    for (Eigen::Index j = 0; j < p; ++j) next(j) = std::max(0.0, next(j));
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / tn) * (next - prev);
    prev = next;
    t = tn;
  }
  return (y - a * prev).squaredNorm() + pen.dot(prev);
}

}  // namespace

TEST_CASE("zero data gives the null solution") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = random_matrix(rng, 20, 5);
  const LassoProblem p = make_problem(x, Eigen::VectorXd::Ones(20));
  LassoProblem zero = p;
  zero.design = std::make_shared<const Design>(Design::from_matrix(x, Eigen::VectorXd::Zero(20), false));
  const LassoSolution s = solve_single(zero, 0.3);
  CHECK(s.beta.isZero());
  CHECK(s.nnz == 0);
}

TEST_CASE("single exact column is recovered as lambda -> 0") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = random_matrix(rng, 40, 6);
  const Eigen::VectorXd y = x.col(3);
  const LassoProblem p = make_problem(x, y);
  const LassoSolution s = solve_single(p, 1e-9);
  const NnlsResult oracle = nnls(x, y);
  CHECK(s.beta(3) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK((s.beta - oracle.x).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lambda_max gives the null model as first path point") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = random_matrix(rng, 30, 10);
  const LassoProblem p = make_problem(x, sparse_response(rng, x, 3, 0.1));
  const LassoSolution s = solve_single(p, p.lambda_grid.front());
  CHECK(s.nnz == 0);
  const LassoSolution below = solve_single(p, 0.99 * p.lambda_grid.front());
  CHECK(below.nnz >= 1);
}

TEST_CASE("property: optimality probing by random nonnegative perturbations") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd x = random_matrix(rng, 40, 15, 0.4);
    const LassoProblem p = make_problem(x, sparse_response(rng, x, 3, 0.2));
    const double lambda = p.lambda_grid[10];
    const LassoSolution s = solve_single(p, lambda);
    const double best = lasso_objective(*p.design, p.weights, lambda, s.beta);
    int worse = 0;
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd b = s.beta;
      for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = std::max(0.0, b(j) + u(rng));
      if (lasso_objective(*p.design, p.weights, lambda, b) >= best - 1e-10 * std::abs(best)) ++worse;
    }
    CHECK(worse == 1000);
  }
}

TEST_CASE("property: projected-gradient oracle on small instances") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> wdist(0.3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index q = 2 + trial % 5;
    const bool intercept = trial % 3 == 0;
    const Eigen::MatrixXd x = random_matrix(rng, 25, q, 0.5);
    Eigen::VectorXd y = sparse_response(rng, x, 2, 0.3);
    if (intercept) y.array() += 2.0;
    Eigen::VectorXd w(q);
    for (Eigen::Index j = 0; j < q; ++j) w(j) = wdist(rng);
    const LassoProblem p = make_problem(x, y, intercept, w);
    const double lambda = p.lambda_grid[5 + trial % 10];
    const LassoSolution s = solve_single(p, lambda);
    const double ours = lasso_objective(*p.design, p.weights, lambda, s.beta);
    const double oracle = projected_gradient_objective(x, y, w, lambda, intercept);
    CHECK(ours <= oracle + 1e-6 * std::max(1.0, std::abs(oracle)));
    CHECK(ours >= oracle - 1e-6 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("property: KKT certificate and nonnegativity on a fuzz suite") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::MatrixXd x = random_matrix(rng, 60, 30 + trial % 20, trial % 2 ? 0.8 : 0.0);
    const LassoProblem p = make_problem(x, sparse_response(rng, x, 4, 0.1), trial % 4 == 0);
    for (std::size_t i : {2u, 15u, 29u}) {
      const LassoSolution s = solve_single(p, p.lambda_grid[i]);
      CHECK(s.beta.minCoeff() >= 0.0);
      CHECK(s.kkt_violation < 1e-7);
      CHECK(kkt_violation(*p.design, p.weights, p.lambda_grid[i], s.beta) < 1e-7);
    }
  }
}

TEST_CASE("property: rss is nonincreasing along the path") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd x = random_matrix(rng, 50, 25, 0.6);
    const LassoProblem p = make_problem(x, sparse_response(rng, x, 3, 0.2));
    const PathResult r = solve_path(p);
    REQUIRE(r.points.size() == p.lambda_grid.size());
    CHECK(r.points.front().nnz == 0);
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      CHECK(r.points[i].rss <= r.points[i - 1].rss * (1.0 + 1e-9) + 1e-12);
    }
  }
}

TEST_CASE("property: data scaling scales the solution") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = random_matrix(rng, 40, 12, 0.3);
  const Eigen::VectorXd y = sparse_response(rng, x, 3, 0.2);
  const LassoProblem p = make_problem(x, y);
  const double lambda = p.lambda_grid[12];
  const LassoSolution a = solve_single(p, lambda);
  for (double c : {0.01, 7.5, 1e4}) {
    LassoProblem scaled = p;
    scaled.design = std::make_shared<const Design>(Design::from_matrix(x, c * y, false));
    const LassoSolution b = solve_single(scaled, c * lambda);
    CHECK((b.beta - c * a.beta).cwiseAbs().maxCoeff() <= 1e-7 * c * a.beta.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < a.beta.size(); ++j) CHECK((a.beta(j) > 0.0) == (b.beta(j) > 0.0));
  }
}

TEST_CASE("ebic formula") {
  CHECK(ebic(2.0, 0, 100, 50, 1.0) == doctest::Approx(100.0 * std::log(0.02)));
  CHECK(ebic(2.0, 3, 100, 50, 0.0) == doctest::Approx(100.0 * std::log(0.02) + 3.0 * std::log(100.0)));
  const double step = ebic(2.0, 4, 100, 50, 0.7) - ebic(2.0, 3, 100, 50, 0.7);
  CHECK(step == doctest::Approx(std::log(100.0) + 2.0 * 0.7 * std::log(50.0)));
}

TEST_CASE("problem validation") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = random_matrix(rng, 20, 4);
  LassoProblem p = make_problem(x, Eigen::VectorXd::Ones(20));
  LassoProblem bad = p;
  bad.weights(0) = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = p;
  bad.lambda_grid = {1.0, 2.0};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  Eigen::MatrixXd zero_col = x;
  zero_col.col(1).setZero();
  CHECK_THROWS_AS(Design::from_matrix(zero_col, Eigen::VectorXd::Ones(20), false), InvalidInput);
}

TEST_CASE("dictionary design agrees with the dense design") {
  const PhysicalConstants c = testutil::standard();
  FiberLink link;
  link.length_m = 1500.0;
  link.events = {Event{600.0, 2.0, 5.0}, Event{1500.0, 3.0, {}}};
  const auto f = frequency_grid(100.0, 100'000.0, 100.0);
  const Dictionary d = build_dictionary(PositionGrid::uniform(1500.0, 10.0), f, c, 1500.0, true);
  const Eigen::VectorXd y = build_observation(frequency_response_analytic(link, c, f));
  const Design fast = Design::from_dictionary(d, y);
  const Design dense = Design::from_matrix(d.matrix, y, false);
  CHECK((fast.gram() - dense.gram()).cwiseAbs().maxCoeff() <= 1e-10 * dense.gram().cwiseAbs().maxCoeff());
  CHECK((fast.correlation() - dense.correlation()).cwiseAbs().maxCoeff() <=
        1e-10 * dense.correlation().cwiseAbs().maxCoeff());
}
