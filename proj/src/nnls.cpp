#include "defgen/nnls.hpp"

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace defgen {

namespace {

// Least-squares solve restricted to the passive columns.
Vec solve_passive(const Mat& A, const Vec& b, const std::vector<int>& passive) {
  Mat Ap(A.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t j = 0; j < passive.size(); ++j) Ap.col(j) = A.col(passive[j]);
  return Ap.colPivHouseholderQr().solve(b);
}

}  // namespace

NnlsResult nnls(const Mat& A, const Vec& b, int max_iter, double tol) {
  const Eigen::Index n = A.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 30);

  Vec x = Vec::Zero(n);
  std::vector<bool> in_passive(n, false);
  std::vector<int> passive;
  Vec w = A.transpose() * (b - A * x);

  int iter = 0;
  while (iter < max_iter) {
    // Most violated dual coordinate among the active (zero) set.
    int best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!in_passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = static_cast<int>(j);
      }
    }
    if (best < 0) break;  // KKT satisfied

    in_passive[best] = true;
    passive.push_back(best);

    while (true) {
      ++iter;
      Vec zp = solve_passive(A, b, passive);

      double min_zp = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < zp.size(); ++k) min_zp = std::min(min_zp, zp[k]);
      if (min_zp > tol) {
        x.setZero();
        for (std::size_t k = 0; k < passive.size(); ++k) x[passive[k]] = zp[k];
        break;
      }

      // Step toward zp until the first passive variable hits zero.
      double alpha = 1.0;
      for (std::size_t k = 0; k < passive.size(); ++k) {
        if (zp[k] <= tol) {
          const double xk = x[passive[k]];
          if (xk - zp[k] > 0)
            alpha = std::min(alpha, xk / (xk - zp[k]));
        }
      }
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const int j = passive[k];
        x[j] += alpha * (zp[k] - x[j]);
      }
      // Demote variables that reached zero.
      std::vector<int> next;
      for (int j : passive) {
        if (x[j] <= tol) {
          x[j] = 0.0;
          in_passive[j] = false;
        } else {
          next.push_back(j);
        }
      }
      passive = next;
      if (passive.empty()) break;
      if (iter >= max_iter) break;
    }
    w = A.transpose() * (b - A * x);
  }

  return NnlsResult{x, (A * x - b).norm(), iter};
}

}  // namespace defgen
