#pragma once

// Nonnegative least squares, Lawson-Hanson active-set method on the normal
// equations: minimize x^T G x - 2 c^T x subject to x >= 0.

#include <Eigen/Dense>

namespace bsslasso {

struct NnlsResult {
  Eigen::VectorXd x;
  std::size_t iterations = 0;
  bool converged = false;
};

NnlsResult nnls_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& correlation);

// minimize ||A x - b||^2, x >= 0.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

}  // namespace bsslasso
