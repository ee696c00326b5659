#include <bsslasso/nnls.hpp>

#include <bsslasso/error.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace bsslasso {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c,
                              const std::vector<Eigen::Index>& passive) {
  const auto k = static_cast<Eigen::Index>(passive.size());
  Eigen::MatrixXd gp(k, k);
  Eigen::VectorXd cp(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    cp(a) = c(passive[a]);
    for (Eigen::Index b = 0; b < k; ++b) gp(a, b) = gram(passive[a], passive[b]);
  }
  return gp.ldlt().solve(cp);
}

}  // namespace

NnlsResult nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& correlation) {
  const Eigen::Index n = correlation.size();
  if (gram.rows() != n || gram.cols() != n) throw InvalidInput("nnls: gram/correlation size mismatch");
  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  const double tol = 1e-12 * std::max(correlation.cwiseAbs().maxCoeff(), gram.diagonal().maxCoeff());
  std::vector<bool> in_passive(static_cast<std::size_t>(n), false);
  const std::size_t max_iter = 3 * static_cast<std::size_t>(n) + 10;

  Eigen::VectorXd& x = res.x;
  while (res.iterations < max_iter) {
    const Eigen::VectorXd w = correlation - gram * x;
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!in_passive[static_cast<std::size_t>(j)] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) {
      res.converged = true;
      break;
    }
    in_passive[static_cast<std::size_t>(t)] = true;

    while (res.iterations < max_iter) {
      ++res.iterations;
      std::vector<Eigen::Index> passive;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (in_passive[static_cast<std::size_t>(j)]) passive.push_back(j);
      }
      const Eigen::VectorXd s = solve_passive(gram, correlation, passive);
      if (s.minCoeff() > 0.0) {
        x.setZero();
        for (std::size_t a = 0; a < passive.size(); ++a) x(passive[a]) = s(static_cast<Eigen::Index>(a));
        break;
      }
      double step = 1.0;
      for (std::size_t a = 0; a < passive.size(); ++a) {
        const double sa = s(static_cast<Eigen::Index>(a));
        const double xa = x(passive[a]);
        if (sa <= 0.0) step = std::min(step, xa / (xa - sa));
      }
      for (std::size_t a = 0; a < passive.size(); ++a) {
        const Eigen::Index j = passive[a];
        x(j) += step * (s(static_cast<Eigen::Index>(a)) - x(j));
        if (x(j) <= 1e-15 * std::max(1.0, std::abs(s(static_cast<Eigen::Index>(a))))) {
          x(j) = 0.0;
          in_passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
  }
  return res;
}

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != b.size()) throw InvalidInput("nnls: matrix/rhs size mismatch");
  return nnls_gram(a.transpose() * a, a.transpose() * b);
}

}  // namespace bsslasso
