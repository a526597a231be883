#include "defgen/domains.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace defgen {

namespace {

constexpr int kDykstraMaxSweeps = 10000;
constexpr double kDykstraMoveTol = 1e-11;

Mat clip_psd(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  Vec lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Vec ConvexDomain::sample(std::mt19937_64& rng) const {
  Vec g = gaussian_vector(dim_, rng);
  return project(g * norm_bound());
}

// ---------------------------------------------------------------------------
// Simplex

bool SimplexDomain::contains(const Vec& w, double tol) const {
  check_input(w);
  if (w.minCoeff() < -tol) return false;
  return std::abs(w.sum() - 1.0) <= tol;
}

std::optional<Hyperplane> SimplexDomain::separate(const Vec& w) const {
  check_input(w);
  Eigen::Index worst;
  if (w.minCoeff(&worst) < -kMembershipTol) {
    Vec n = Vec::Zero(dim_);
    n[worst] = -1.0;
    return Hyperplane{n, 0.0};
  }
  const double s = w.sum();
  if (std::abs(s - 1.0) > kMembershipTol) {
    const double sign = s > 1.0 ? 1.0 : -1.0;
    Vec n = Vec::Constant(dim_, sign / std::sqrt(double(dim_)));
    return Hyperplane{n, sign / std::sqrt(double(dim_))};
  }
  return std::nullopt;
}

// Sort-and-threshold projection (Held et al.); exact in O(d log d).
Vec SimplexDomain::project(const Vec& w) const {
  check_input(w);
  std::vector<double> u(w.data(), w.data() + w.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double cand = (cum - 1.0) / double(i + 1);
    if (i + 1 == u.size() || u[i + 1] <= cand) {
      theta = cand;
      break;
    }
  }
  return (w.array() - theta).cwiseMax(0.0);
}

LinearMaxResult SimplexDomain::linear_max(const Vec& c) const {
  check_input(c);
  Eigen::Index best;
  const double value = c.maxCoeff(&best);
  Vec p = Vec::Zero(dim_);
  p[best] = 1.0;
  return {p, value};
}

Vec SimplexDomain::sample(std::mt19937_64& rng) const {
  Vec e(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i)
    e[i] = -std::log(std::max(uniform01(rng), 0x1.0p-53));
  return e / e.sum();
}

// ---------------------------------------------------------------------------
// Box

BoxDomain::BoxDomain(Vec lower, Vec upper)
    : ConvexDomain(lower.size()), lower_(std::move(lower)), upper_(std::move(upper)) {
  require_dim(upper_, lower_.size(), "box upper bound");
  if ((upper_ - lower_).minCoeff() < 0)
    throw InputError("box upper bound below lower bound");
}

BoxDomain BoxDomain::symmetric(Eigen::Index d, double half_side) {
  return BoxDomain(Vec::Constant(d, -half_side), Vec::Constant(d, half_side));
}

double BoxDomain::norm_bound() const {
  return lower_.cwiseAbs().cwiseMax(upper_.cwiseAbs()).norm();
}

bool BoxDomain::contains(const Vec& w, double tol) const {
  check_input(w);
  return (w - lower_).minCoeff() >= -tol && (upper_ - w).minCoeff() >= -tol;
}

std::optional<Hyperplane> BoxDomain::separate(const Vec& w) const {
  check_input(w);
  for (Eigen::Index i = 0; i < dim_; ++i) {
    if (w[i] > upper_[i] + kMembershipTol) {
      Vec n = Vec::Zero(dim_);
      n[i] = 1.0;
      return Hyperplane{n, upper_[i]};
    }
    if (w[i] < lower_[i] - kMembershipTol) {
      Vec n = Vec::Zero(dim_);
      n[i] = -1.0;
      return Hyperplane{n, -lower_[i]};
    }
  }
  return std::nullopt;
}

Vec BoxDomain::project(const Vec& w) const {
  check_input(w);
  return w.cwiseMax(lower_).cwiseMin(upper_);
}

LinearMaxResult BoxDomain::linear_max(const Vec& c) const {
  check_input(c);
  Vec p(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i) p[i] = c[i] >= 0 ? upper_[i] : lower_[i];
  return {p, c.dot(p)};
}

Vec BoxDomain::sample(std::mt19937_64& rng) const {
  Vec p(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i)
    p[i] = lower_[i] + (upper_[i] - lower_[i]) * uniform01(rng);
  return p;
}

// ---------------------------------------------------------------------------
// Ball

BallDomain::BallDomain(Eigen::Index d, double radius)
    : ConvexDomain(d), radius_(radius) {
  if (!(radius > 0)) throw InputError("ball radius must be positive");
}

bool BallDomain::contains(const Vec& w, double tol) const {
  check_input(w);
  return w.norm() <= radius_ + tol;
}

std::optional<Hyperplane> BallDomain::separate(const Vec& w) const {
  check_input(w);
  const double n = w.norm();
  if (n <= radius_ + kMembershipTol) return std::nullopt;
  return Hyperplane{w / n, radius_};
}

Vec BallDomain::project(const Vec& w) const {
  check_input(w);
  const double n = w.norm();
  if (n <= radius_) return w;
  return w * (radius_ / n);
}

LinearMaxResult BallDomain::linear_max(const Vec& c) const {
  check_input(c);
  const double n = c.norm();
  if (n == 0.0) return {Vec::Zero(dim_), 0.0};
  return {c * (radius_ / n), radius_ * n};
}

Vec BallDomain::sample(std::mt19937_64& rng) const {
  Vec g = gaussian_vector(dim_, rng);
  const double n = g.norm();
  if (n == 0.0) return Vec::Zero(dim_);
  const double r = radius_ * std::pow(uniform01(rng), 1.0 / double(dim_));
  return g * (r / n);
}

// ---------------------------------------------------------------------------
// Mean-covariance moment set

MeanCovDomain::MeanCovDomain(Eigen::Index outcome_dim)
    : ConvexDomain(ambient_dim(outcome_dim)), d_(outcome_dim) {}

Vec MeanCovDomain::pack(const Vec& v, const Mat& Q) const {
  require_dim(v, d_, "mean part");
  Vec w(dim_);
  w.head(d_) = v;
  Eigen::Index k = d_;
  for (Eigen::Index i = 0; i < d_; ++i)
    for (Eigen::Index j = i; j < d_; ++j) w[k++] = Q(i, j);
  return w;
}

void MeanCovDomain::unpack(const Vec& w, Vec& v, Mat& Q) const {
  check_input(w);
  v = w.head(d_);
  Q.resize(d_, d_);
  Eigen::Index k = d_;
  for (Eigen::Index i = 0; i < d_; ++i)
    for (Eigen::Index j = i; j < d_; ++j) {
      Q(i, j) = w[k];
      Q(j, i) = w[k];
      ++k;
    }
}

bool MeanCovDomain::contains(const Vec& w, double tol) const {
  Vec v;
  Mat Q;
  unpack(w, v, Q);
  if (Q.trace() > 1.0 + tol) return false;
  Eigen::SelfAdjointEigenSolver<Mat> esq(Q);
  if (esq.eigenvalues().minCoeff() < -tol) return false;
  Eigen::SelfAdjointEigenSolver<Mat> ess(Q - v * v.transpose());
  return ess.eigenvalues().minCoeff() >= -tol;
}

std::optional<Hyperplane> MeanCovDomain::separate(const Vec& w) const {
  Vec v;
  Mat Q;
  unpack(w, v, Q);

  // Linear functional of the flattened point induced by xi' M xi >= 0 on the
  // Schur block M = [[1, v'],[v, Q]]: contributes 2*xi0*xi_i on v_i and
  // xi_i*xi_j (doubled off-diagonal) on Q_ij.
  auto from_quadratic = [&](double xi0, const Vec& xi) -> Hyperplane {
    Vec grad(dim_);
    grad.head(d_) = 2.0 * xi0 * xi;
    Eigen::Index k = d_;
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = i; j < d_; ++j)
        grad[k++] = (i == j) ? xi[i] * xi[i] : 2.0 * xi[i] * xi[j];
    // Members satisfy grad.z >= -xi0^2, i.e. (-grad).z <= xi0^2.
    const double nn = grad.norm();
    return Hyperplane{-grad / nn, xi0 * xi0 / nn};
  };

  Mat M(d_ + 1, d_ + 1);
  M(0, 0) = 1.0;
  M.block(0, 1, 1, d_) = v.transpose();
  M.block(1, 0, d_, 1) = v;
  M.block(1, 1, d_, d_) = Q;
  Eigen::SelfAdjointEigenSolver<Mat> esm(M);
  if (esm.eigenvalues().minCoeff() < -kMembershipTol) {
    Vec xi = esm.eigenvectors().col(0);
    return from_quadratic(xi[0], xi.tail(d_));
  }

  Eigen::SelfAdjointEigenSolver<Mat> esq(Q);
  if (esq.eigenvalues().minCoeff() < -kMembershipTol) {
    Vec u = esq.eigenvectors().col(0);
    return from_quadratic(0.0, u);
  }

  if (Q.trace() > 1.0 + kMembershipTol) {
    Vec grad = Vec::Zero(dim_);
    Eigen::Index k = d_;
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = i; j < d_; ++j) grad[k++] = (i == j) ? 1.0 : 0.0;
    const double nn = grad.norm();  // sqrt(d)
    return Hyperplane{grad / nn, 1.0 / nn};
  }
  return std::nullopt;
}

// Dykstra in the Schur-embedding Frobenius metric over three sets: the PSD
// cone, the corner pin M00 = 1, and the trace halfspace on the Q block.
Vec MeanCovDomain::project(const Vec& w) const {
  if (contains(w, kMembershipTol)) return w;
  Vec v;
  Mat Q;
  unpack(w, v, Q);

  Mat x(d_ + 1, d_ + 1);
  x(0, 0) = 1.0;
  x.block(0, 1, 1, d_) = v.transpose();
  x.block(1, 0, d_, 1) = v;
  x.block(1, 1, d_, d_) = Q;

  Mat inc_psd = Mat::Zero(d_ + 1, d_ + 1);
  Mat inc_tr = Mat::Zero(d_ + 1, d_ + 1);
  Mat prev = x;
  for (int sweep = 0; sweep < kDykstraMaxSweeps; ++sweep) {
    Mat y = clip_psd(x + inc_psd);
    inc_psd = x + inc_psd - y;
    x = y;

    x(0, 0) = 1.0;  // affine set; no correction term needed

    y = x + inc_tr;
    const double tr = y.block(1, 1, d_, d_).trace();
    if (tr > 1.0) {
      const double shift = (tr - 1.0) / double(d_);
      for (Eigen::Index i = 1; i <= d_; ++i) y(i, i) -= shift;
    }
    inc_tr = x + inc_tr - y;
    x = y;

    if ((x - prev).cwiseAbs().maxCoeff() < kDykstraMoveTol) break;
    prev = x;
  }

  Vec pv = x.block(1, 0, d_, 1);
  Mat pQ = 0.5 * (x.block(1, 1, d_, d_) + x.block(1, 1, d_, d_).transpose());
  return pack(pv, pQ);
}

// Linear objectives over this set are maximized at statistics of point
// masses, so the oracle reduces to maximizing a quadratic on the unit ball
// (trust-region subproblem solved by eigendecomposition plus bisection).
LinearMaxResult MeanCovDomain::linear_max(const Vec& c) const {
  check_input(c);
  Vec cv = c.head(d_);
  Mat Cq(d_, d_);
  Eigen::Index k = d_;
  for (Eigen::Index i = 0; i < d_; ++i)
    for (Eigen::Index j = i; j < d_; ++j) {
      Cq(i, j) = (i == j) ? c[k] : 0.5 * c[k];
      Cq(j, i) = Cq(i, j);
      ++k;
    }

  auto qval = [&](const Vec& y) { return y.dot(Cq * y) + cv.dot(y); };

  Eigen::SelfAdjointEigenSolver<Mat> es(Cq);
  const Vec lam = es.eigenvalues();
  const Mat U = es.eigenvectors();
  const Vec b = U.transpose() * cv;
  const double lmax = lam.maxCoeff();

  Vec best = Vec::Zero(d_);
  double best_val = qval(best);
  auto consider = [&](const Vec& y) {
    const double n = y.norm();
    Vec yy = n > 1.0 ? Vec(y / n) : y;
    const double val = qval(yy);
    if (val > best_val) {
      best_val = val;
      best = yy;
    }
  };

  // Interior stationary point (only optimal when the quadratic is concave).
  if (lmax < -1e-14) {
    Vec y0 = Vec::Zero(d_);
    for (Eigen::Index i = 0; i < d_; ++i) y0 += (-b[i] / (2.0 * lam[i])) * U.col(i);
    if (y0.norm() <= 1.0) consider(y0);
  }

  // Boundary stationary point: y(mu) = (mu I - Cq)^{-1} cv / 2, mu > lmax,
  // with ||y(mu)|| = 1; bisection on the monotone norm.
  auto y_of_mu = [&](double mu) {
    Vec y = Vec::Zero(d_);
    for (Eigen::Index i = 0; i < d_; ++i) {
      const double den = mu - lam[i];
      if (std::abs(den) > 1e-300) y += (0.5 * b[i] / den) * U.col(i);
    }
    return y;
  };
  const double cnorm = cv.norm();
  double lo = lmax + 1e-14 * (1.0 + std::abs(lmax));
  double hi = lmax + 0.5 * cnorm + 1e-12;
  if (y_of_mu(lo).norm() < 1.0) {
    // Hard case: pad with the top eigenvector to reach the boundary.
    Vec y = y_of_mu(lo);
    const double pad = std::sqrt(std::max(0.0, 1.0 - y.squaredNorm()));
    Vec utop = U.col(d_ - 1);
    consider(y + pad * utop);
    consider(y - pad * utop);
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (y_of_mu(mid).norm() > 1.0)
        lo = mid;
      else
        hi = mid;
    }
    consider(y_of_mu(hi));
  }
  consider(U.col(d_ - 1));
  consider(Vec(-U.col(d_ - 1)));
  if (cnorm > 0) consider(Vec(cv / cnorm));

  Vec point = pack(best, best * best.transpose());
  return {point, c.dot(point)};
}

// Statistics of a random finitely supported measure on the ball; always a
// member, and spread over the whole set.
Vec MeanCovDomain::sample(std::mt19937_64& rng) const {
  const int atoms = 1 + static_cast<int>(uniform01(rng) * double(2 * d_ + 1));
  BallDomain ball(d_);
  Vec weights(atoms);
  for (int i = 0; i < atoms; ++i) weights[i] = -std::log(std::max(uniform01(rng), 0x1.0p-53));
  weights /= weights.sum();
  Vec v = Vec::Zero(d_);
  Mat Q = Mat::Zero(d_, d_);
  for (int i = 0; i < atoms; ++i) {
    Vec y = ball.sample(rng);
    v += weights[i] * y;
    Q += weights[i] * y * y.transpose();
  }
  return pack(v, Q);
}

// ---------------------------------------------------------------------------
// Univariate truncated moment set

UnivariateMomentDomain::UnivariateMomentDomain(Eigen::Index max_degree)
    : ConvexDomain(max_degree + 1), deg_(max_degree) {
  if (max_degree < 2 || max_degree % 2 != 0)
    throw InputError("moment max degree must be even and >= 2");
}

Mat UnivariateMomentDomain::hankel(const Vec& m) const {
  const Eigen::Index n = deg_ / 2 + 1;
  Mat H(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) H(i, j) = m[i + j];
  return H;
}

Mat UnivariateMomentDomain::localizing_hankel(const Vec& m) const {
  const Eigen::Index n = deg_ / 2;
  Mat L(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) L(i, j) = m[i + j] - m[i + j + 2];
  return L;
}

Vec UnivariateMomentDomain::moments_of_point(double y, Eigen::Index max_degree) {
  Vec m(max_degree + 1);
  double p = 1.0;
  for (Eigen::Index k = 0; k <= max_degree; ++k) {
    m[k] = p;
    p *= y;
  }
  return m;
}

bool UnivariateMomentDomain::contains(const Vec& w, double tol) const {
  check_input(w);
  if (std::abs(w[0] - 1.0) > tol) return false;
  Eigen::SelfAdjointEigenSolver<Mat> esh(hankel(w));
  if (esh.eigenvalues().minCoeff() < -tol) return false;
  Eigen::SelfAdjointEigenSolver<Mat> esl(localizing_hankel(w));
  return esl.eigenvalues().minCoeff() >= -tol;
}

std::optional<Hyperplane> UnivariateMomentDomain::separate(const Vec& w) const {
  check_input(w);
  if (std::abs(w[0] - 1.0) > kMembershipTol) {
    const double sign = w[0] > 1.0 ? 1.0 : -1.0;
    Vec n = Vec::Zero(dim_);
    n[0] = sign;
    return Hyperplane{n, sign};
  }

  // A negative eigenvector a of the Hankel form gives the cut
  // <coeffs(a(y)^2), z> >= 0, violated at w.
  Eigen::SelfAdjointEigenSolver<Mat> esh(hankel(w));
  if (esh.eigenvalues().minCoeff() < -kMembershipTol) {
    Vec a = esh.eigenvectors().col(0);
    Vec coef = Vec::Zero(dim_);
    for (Eigen::Index i = 0; i < a.size(); ++i)
      for (Eigen::Index j = 0; j < a.size(); ++j) coef[i + j] += a[i] * a[j];
    const double nn = coef.norm();
    return Hyperplane{-coef / nn, 0.0};
  }

  Eigen::SelfAdjointEigenSolver<Mat> esl(localizing_hankel(w));
  if (esl.eigenvalues().minCoeff() < -kMembershipTol) {
    Vec a = esl.eigenvectors().col(0);
    Vec sq = Vec::Zero(dim_);
    for (Eigen::Index i = 0; i < a.size(); ++i)
      for (Eigen::Index j = 0; j < a.size(); ++j) sq[i + j] += a[i] * a[j];
    Vec coef = Vec::Zero(dim_);  // coefficients of a(y)^2 (1 - y^2)
    for (Eigen::Index k = 0; k < dim_; ++k) {
      coef[k] += sq[k];
      if (k >= 2) coef[k] -= sq[k - 2];
    }
    const double nn = coef.norm();
    return Hyperplane{-coef / nn, 0.0};
  }
  return std::nullopt;
}

// Dykstra on the lifted pair (Hankel, localizing Hankel): alternate PSD
// clips with the least-squares projection back onto the consistent moment
// subspace with m_0 pinned at 1.
Vec UnivariateMomentDomain::project(const Vec& w) const {
  if (contains(w, kMembershipTol)) return w;
  const Eigen::Index nH = deg_ / 2 + 1;
  const Eigen::Index nL = deg_ / 2;
  const Eigen::Index nm = dim_;

  // Antidiagonal multiplicities.
  auto counts = [](Eigen::Index n, Eigen::Index s) {
    Eigen::Index lo = std::max<Eigen::Index>(0, s - (n - 1));
    Eigen::Index hi = std::min(n - 1, s);
    return std::max<Eigen::Index>(0, hi - lo + 1);
  };

  // Normal equations for min ||H(m)-A||^2 + ||L(m)-B||^2 over m_1..m_{2d}.
  Mat T = Mat::Zero(nm, nm);
  for (Eigen::Index k = 0; k < nm; ++k) T(k, k) += double(counts(nH, k));
  for (Eigen::Index s = 0; s + 2 < nm; ++s) {
    const double l = double(counts(nL, s));
    if (l == 0) continue;
    T(s, s) += l;
    T(s + 2, s + 2) += l;
    T(s, s + 2) -= l;
    T(s + 2, s) -= l;
  }
  Mat Tr = T.block(1, 1, nm - 1, nm - 1);
  Eigen::LDLT<Mat> solver(Tr);

  auto consistency = [&](const Mat& A, const Mat& B) {
    Vec rhs = Vec::Zero(nm);
    for (Eigen::Index i = 0; i < nH; ++i)
      for (Eigen::Index j = 0; j < nH; ++j) rhs[i + j] += A(i, j);
    for (Eigen::Index i = 0; i < nL; ++i)
      for (Eigen::Index j = 0; j < nL; ++j) {
        rhs[i + j] += B(i, j);
        rhs[i + j + 2] -= B(i, j);
      }
    Vec r = rhs.tail(nm - 1) - T.block(1, 0, nm - 1, 1) * 1.0;
    Vec m(nm);
    m[0] = 1.0;
    m.tail(nm - 1) = solver.solve(r);
    return m;
  };

  Mat A = hankel(w), B = localizing_hankel(w);
  Mat incA = Mat::Zero(nH, nH), incB = Mat::Zero(nL, nL);
  Vec m_prev = w;
  Vec m = w;
  for (int sweep = 0; sweep < kDykstraMaxSweeps; ++sweep) {
    Mat yA = clip_psd(A + incA);
    incA = A + incA - yA;
    A = yA;
    Mat yB = clip_psd(B + incB);
    incB = B + incB - yB;
    B = yB;

    m = consistency(A, B);  // affine set; correction term not required
    A = hankel(m);
    B = localizing_hankel(m);

    if ((m - m_prev).cwiseAbs().maxCoeff() < kDykstraMoveTol) break;
    m_prev = m;
  }
  return m;
}

std::pair<double, double> max_polynomial_on_interval(const Vec& coeffs) {
  auto eval = [&](double y) {
    double acc = 0.0;
    for (Eigen::Index k = coeffs.size() - 1; k >= 0; --k) acc = acc * y + coeffs[k];
    return acc;
  };
  double best_y = -1.0, best_v = eval(-1.0);
  auto consider = [&](double y) {
    y = std::clamp(y, -1.0, 1.0);
    const double v = eval(y);
    if (v > best_v) {
      best_v = v;
      best_y = y;
    }
  };
  consider(1.0);
  consider(0.0);

  // Stationary points via the companion matrix of the derivative.
  Eigen::Index degree = coeffs.size() - 1;
  while (degree > 0 && coeffs[degree] == 0.0) --degree;
  if (degree >= 2) {
    Vec dcoef(degree);
    for (Eigen::Index k = 1; k <= degree; ++k) dcoef[k - 1] = double(k) * coeffs[k];
    Eigen::Index dd = dcoef.size() - 1;
    while (dd > 0 && dcoef[dd] == 0.0) --dd;
    if (dd >= 1) {
      Mat comp = Mat::Zero(dd, dd);
      for (Eigen::Index i = 1; i < dd; ++i) comp(i, i - 1) = 1.0;
      for (Eigen::Index i = 0; i < dd; ++i) comp(i, dd - 1) = -dcoef[i] / dcoef[dd];
      Eigen::EigenSolver<Mat> es(comp);
      for (Eigen::Index i = 0; i < dd; ++i) {
        const auto root = es.eigenvalues()[i];
        if (std::abs(root.imag()) < 1e-8 && std::abs(root.real()) <= 1.0 + 1e-8)
          consider(root.real());
      }
    }
  } else if (degree == 1) {
    consider(coeffs[1] > 0 ? 1.0 : -1.0);
  }
  return {best_y, best_v};
}

LinearMaxResult UnivariateMomentDomain::linear_max(const Vec& c) const {
  check_input(c);
  auto [y, value] = max_polynomial_on_interval(c);
  return {moments_of_point(y, deg_), value};
}

Vec UnivariateMomentDomain::sample(std::mt19937_64& rng) const {
  const int atoms = 1 + static_cast<int>(uniform01(rng) * double(deg_ + 1));
  Vec weights(atoms);
  for (int i = 0; i < atoms; ++i) weights[i] = -std::log(std::max(uniform01(rng), 0x1.0p-53));
  weights /= weights.sum();
  Vec m = Vec::Zero(dim_);
  for (int i = 0; i < atoms; ++i) {
    const double y = 2.0 * uniform01(rng) - 1.0;
    m += weights[i] * moments_of_point(y, deg_);
  }
  return m;
}

// ---------------------------------------------------------------------------

std::shared_ptr<ConvexDomain> make_domain(const std::string& name,
                                          Eigen::Index dim, double lower,
                                          double upper) {
  if (name == "simplex") return std::make_shared<SimplexDomain>(dim);
  if (name == "ball") return std::make_shared<BallDomain>(dim);
  if (name == "box")
    return std::make_shared<BoxDomain>(Vec::Constant(dim, lower),
                                       Vec::Constant(dim, upper));
  if (name == "mean_cov") return std::make_shared<MeanCovDomain>(dim);
  if (name == "univariate_moments")
    return std::make_shared<UnivariateMomentDomain>(dim);
  throw InputError("unknown domain: " + name);
}

}  // namespace defgen
