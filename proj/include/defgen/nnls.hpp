#pragma once

#include "defgen/types.hpp"

namespace defgen {

struct NnlsResult {
  Vec x;            // nonnegative solution
  double residual;  // ||A x - b||_2
  int iterations;
};

// Nonnegative least squares, min ||A x - b|| s.t. x >= 0, by the
// Lawson-Hanson active-set method.  The passive set never exceeds the row
// count, so solutions are naturally sparse.
NnlsResult nnls(const Mat& A, const Vec& b, int max_iter = 0,
                double tol = 1e-12);

}  // namespace defgen
