#include "defgen/generate.hpp"

#include "defgen/nnls.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace defgen {

Vec AtomicMeasure::mean() const {
  Vec m = Vec::Zero(atoms.empty() ? 0 : atoms.front().size());
  for (std::size_t i = 0; i < atoms.size(); ++i) m += weights[i] * atoms[i];
  return m;
}

// ---------------------------------------------------------------------------
// StatisticMap

StatisticMap StatisticMap::one_hot(Eigen::Index classes) {
  if (classes < 2) throw InputError("one_hot needs at least two classes");
  StatisticMap m;
  m.kind_ = StatisticKind::kOneHot;
  m.classes_ = classes;
  m.prediction_set_ = std::make_shared<SimplexDomain>(classes);
  return m;
}

StatisticMap StatisticMap::power_moments(Eigen::Index max_degree) {
  StatisticMap m;
  m.kind_ = StatisticKind::kPowerMoments;
  m.degree_ = max_degree;
  m.prediction_set_ = std::make_shared<UnivariateMomentDomain>(max_degree);
  return m;
}

StatisticMap StatisticMap::identity(
    std::shared_ptr<const ConvexDomain> outcome_set) {
  if (!outcome_set) throw InputError("identity map needs an outcome set");
  StatisticMap m;
  m.kind_ = StatisticKind::kIdentity;
  m.dim_ = outcome_set->dimension();
  m.outcome_set_ = outcome_set;
  m.prediction_set_ = std::move(outcome_set);
  return m;
}

StatisticMap StatisticMap::mean_outer(Eigen::Index outcome_dim) {
  StatisticMap m;
  m.kind_ = StatisticKind::kMeanOuter;
  m.dim_ = outcome_dim;
  m.prediction_set_ = std::make_shared<MeanCovDomain>(outcome_dim);
  return m;
}

Eigen::Index StatisticMap::statistic_dim() const {
  return prediction_set_->dimension();
}

Eigen::Index StatisticMap::outcome_dim() const {
  switch (kind_) {
    case StatisticKind::kOneHot:
    case StatisticKind::kPowerMoments:
      return 1;
    case StatisticKind::kIdentity:
    case StatisticKind::kMeanOuter:
      return dim_;
  }
  return 0;
}

Vec StatisticMap::s(const Vec& y) const {
  require_dim(y, outcome_dim(), "outcome");
  switch (kind_) {
    case StatisticKind::kOneHot: {
      const auto j = static_cast<Eigen::Index>(std::llround(y[0]));
      if (j < 0 || j >= classes_ || std::abs(y[0] - double(j)) > 1e-9)
        throw InputError("one_hot outcome must be an integer label in [0,d)");
      Vec e = Vec::Zero(classes_);
      e[j] = 1.0;
      return e;
    }
    case StatisticKind::kPowerMoments:
      return UnivariateMomentDomain::moments_of_point(y[0], degree_);
    case StatisticKind::kIdentity:
      return y;
    case StatisticKind::kMeanOuter: {
      const auto& dom = static_cast<const MeanCovDomain&>(*prediction_set_);
      return dom.pack(y, y * y.transpose());
    }
  }
  return Vec();
}

bool StatisticMap::outcome_valid(const Vec& y, double tol) const {
  if (y.size() != outcome_dim() || !y.allFinite()) return false;
  switch (kind_) {
    case StatisticKind::kOneHot: {
      const auto j = std::llround(y[0]);
      return j >= 0 && j < classes_ && std::abs(y[0] - double(j)) <= tol;
    }
    case StatisticKind::kPowerMoments:
      return std::abs(y[0]) <= 1.0 + tol;
    case StatisticKind::kIdentity:
      return outcome_set_->contains(y, tol);
    case StatisticKind::kMeanOuter:
      return y.norm() <= 1.0 + tol;
  }
  return false;
}

std::shared_ptr<const ConvexDomain> StatisticMap::prediction_domain() const {
  return prediction_set_;
}

AtomicMeasure StatisticMap::backfit(const Vec& p) const {
  require_dim(p, statistic_dim(), "statistic");
  switch (kind_) {
    case StatisticKind::kOneHot: {
      // p is itself the conditional distribution over labels.
      if (p.minCoeff() < -1e-6 || std::abs(p.sum() - 1.0) > 1e-6)
        throw InputError("one_hot backfit input is not a distribution");
      AtomicMeasure mu;
      double total = 0.0;
      for (Eigen::Index j = 0; j < classes_; ++j) {
        const double w = std::max(p[j], 0.0);
        if (w <= 0.0) continue;
        mu.atoms.push_back(Vec::Constant(1, double(j)));
        mu.weights.push_back(w);
        total += w;
      }
      if (mu.atoms.empty())
        throw InputError("one_hot backfit input has no mass");
      for (double& w : mu.weights) w /= total;
      return mu;
    }
    case StatisticKind::kPowerMoments:
      return backfit_univariate(p);
    case StatisticKind::kIdentity: {
      AtomicMeasure mu;
      mu.atoms.push_back(p);
      mu.weights.push_back(1.0);
      return mu;
    }
    case StatisticKind::kMeanOuter: {
      const auto& dom = static_cast<const MeanCovDomain&>(*prediction_set_);
      Vec v;
      Mat Q;
      dom.unpack(p, v, Q);
      return backfit_meancov(v, Q);
    }
  }
  return AtomicMeasure();
}

Vec StatisticMap::outcome_from_extreme(const Vec& z) const {
  switch (kind_) {
    case StatisticKind::kOneHot: {
      Eigen::Index j;
      z.maxCoeff(&j);
      return Vec::Constant(1, double(j));
    }
    case StatisticKind::kPowerMoments:
      return Vec::Constant(1, std::clamp(z[1], -1.0, 1.0));
    case StatisticKind::kIdentity:
      return z;
    case StatisticKind::kMeanOuter:
      return z.head(dim_);
  }
  return Vec();
}

std::string StatisticMap::name() const {
  switch (kind_) {
    case StatisticKind::kOneHot:
      return "one_hot";
    case StatisticKind::kPowerMoments:
      return "power_moments";
    case StatisticKind::kIdentity:
      return "identity";
    case StatisticKind::kMeanOuter:
      return "mean_outer";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Mean-covariance backfitting

AtomicMeasure backfit_meancov(const Vec& v, const Mat& Q) {
  const Eigen::Index d = v.size();
  if (Q.rows() != d || Q.cols() != d) throw InputError("Q shape mismatch");

  Mat sigma = Q - v * v.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> esq(Q);
  Eigen::SelfAdjointEigenSolver<Mat> ess(sigma);
  if (Q.trace() > 1.0 + kMembershipTol ||
      esq.eigenvalues().minCoeff() < -kMembershipTol ||
      ess.eigenvalues().minCoeff() < -kMembershipTol)
    throw InputError("(v,Q) is not in the mean-covariance moment set");

  const double vnorm2 = v.squaredNorm();
  const double c0 = std::max(0.0, 1.0 - vnorm2);

  Vec sig = ess.eigenvalues().cwiseMax(0.0);
  // Against marginally feasible inputs: total spread cannot exceed the
  // available radial slack.
  const double total = sig.sum();
  if (total > c0) {
    if (c0 <= 0.0)
      sig.setZero();
    else
      sig *= c0 / total;
  }

  AtomicMeasure mu;
  double lambda_sum = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double s = sig[i];
    if (s <= 1e-12) continue;
    const Vec u = ess.eigenvectors().col(i);
    const double b = v.dot(u);
    const double disc = std::sqrt(b * b + c0);
    double tp, tm;  // roots of t^2 + 2 t b - c0 = 0, stable against cancellation
    if (b >= 0.0) {
      tm = -(b + disc);
      tp = c0 / (b + disc);
    } else {
      tp = -b + disc;
      tm = -c0 / (-b + disc);
    }
    const double lp = s / (tp * (tp - tm));
    const double lm = s / (tm * (tm - tp));
    mu.atoms.push_back(v + tp * u);
    mu.weights.push_back(lp);
    mu.atoms.push_back(v + tm * u);
    mu.weights.push_back(lm);
    lambda_sum += lp + lm;
  }
  double lambda0 = 1.0 - lambda_sum;
  if (lambda0 < -kWeightClipTol)
    throw InputError("mean-covariance backfit produced negative residual mass");
  lambda0 = std::max(lambda0, 0.0);
  if (lambda0 > 0.0 || mu.atoms.empty()) {
    mu.atoms.push_back(v);
    mu.weights.push_back(lambda0);
  }
  double norm = 0.0;
  for (double w : mu.weights) norm += w;
  for (double& w : mu.weights) w /= norm;
  return mu;
}

// ---------------------------------------------------------------------------
// Univariate moment backfitting

namespace {

Vec measure_moments(const AtomicMeasure& mu, Eigen::Index max_degree) {
  Vec m = Vec::Zero(max_degree + 1);
  for (std::size_t i = 0; i < mu.atoms.size(); ++i)
    m += mu.weights[i] *
         UnivariateMomentDomain::moments_of_point(mu.atoms[i][0], max_degree);
  return m;
}

// Moments of the uniform measure on [-1,1]: 1/(k+1) for even k.
Vec uniform_moments(Eigen::Index max_degree) {
  Vec u = Vec::Zero(max_degree + 1);
  for (Eigen::Index k = 0; k <= max_degree; k += 2) u[k] = 1.0 / double(k + 1);
  return u;
}

// Damped Gauss-Newton on atom positions and weights toward the target
// moments; positions clamped to [-1,1], weights to [0,1].
bool polish_measure(AtomicMeasure& mu, const Vec& target, double tol) {
  const Eigen::Index nm = target.size();
  const auto na = static_cast<Eigen::Index>(mu.atoms.size());
  for (int it = 0; it < 80; ++it) {
    Vec r = measure_moments(mu, nm - 1) - target;
    if (r.cwiseAbs().maxCoeff() < tol) return true;
    Mat J(nm, 2 * na);
    for (Eigen::Index j = 0; j < na; ++j) {
      const double y = mu.atoms[j][0];
      const double w = mu.weights[j];
      double pk = 1.0, pk1 = 0.0;
      for (Eigen::Index k = 0; k < nm; ++k) {
        J(k, j) = pk;                        // d r_k / d w_j
        J(k, na + j) = double(k) * w * pk1;  // d r_k / d y_j
        pk1 = pk;
        pk *= y;
      }
    }
    Vec step = (J.transpose() * J + 1e-12 * Mat::Identity(2 * na, 2 * na))
                   .ldlt()
                   .solve(J.transpose() * r);
    for (Eigen::Index j = 0; j < na; ++j) {
      mu.weights[j] = std::clamp(mu.weights[j] - step[j], 0.0, 1.0);
      mu.atoms[j][0] = std::clamp(mu.atoms[j][0] - step[na + j], -1.0, 1.0);
    }
  }
  return (measure_moments(mu, nm - 1) - target).cwiseAbs().maxCoeff() < tol;
}

void drop_tiny_weights(AtomicMeasure& mu) {
  AtomicMeasure out;
  double total = 0.0;
  for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
    if (mu.weights[i] < kWeightClipTol) continue;
    out.atoms.push_back(mu.atoms[i]);
    out.weights.push_back(mu.weights[i]);
    total += mu.weights[i];
  }
  for (double& w : out.weights) w /= total;
  mu = std::move(out);
}

}  // namespace

AtomicMeasure backfit_univariate(const Vec& m) {
  const Eigen::Index deg = m.size() - 1;
  UnivariateMomentDomain domain(deg);
  if (!domain.contains(m, kMembershipTol))
    throw InputError("moment vector is not in the truncated moment set");
  const Eigen::Index d = deg / 2;

  // Interior mix keeps the Hankel factorization definite on boundary input.
  const double mix = 1e-10;
  Vec mm = (1.0 - mix) * m + mix * uniform_moments(deg);

  AtomicMeasure mu;
  bool have_candidate = false;

  Mat H = domain.hankel(mm);
  Eigen::LLT<Mat> llt(H);
  if (llt.info() == Eigen::Success) {
    // Three-term recurrence from the Cholesky factor (Golub & Welsch), one
    // free trailing diagonal entry; any choice reproduces moments 0..2d.
    Mat R = llt.matrixL().transpose();
    Vec alpha = Vec::Zero(d + 1), beta = Vec::Zero(d + 1);
    for (Eigen::Index k = 0; k < d; ++k) {
      alpha[k] = R(k, k + 1) / R(k, k) - (k > 0 ? R(k - 1, k) / R(k - 1, k - 1) : 0.0);
      beta[k + 1] = R(k + 1, k + 1) / R(k, k);
    }
    alpha[d] = 0.0;

    Mat J = Mat::Zero(d + 1, d + 1);
    for (Eigen::Index k = 0; k <= d; ++k) J(k, k) = alpha[k];
    for (Eigen::Index k = 1; k <= d; ++k) {
      J(k, k - 1) = beta[k];
      J(k - 1, k) = beta[k];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    mu.atoms.clear();
    mu.weights.clear();
    for (Eigen::Index j = 0; j <= d; ++j) {
      const double node = std::clamp(es.eigenvalues()[j], -1.0, 1.0);
      const double w0 = es.eigenvectors()(0, j);
      mu.atoms.push_back(Vec::Constant(1, node));
      mu.weights.push_back(w0 * w0);  // first-component weights, mass mm[0]=1
    }
    have_candidate = true;
  }

  const double tol = 1e-9;
  if (have_candidate) {
    double err = (measure_moments(mu, deg) - m).cwiseAbs().maxCoeff();
    double wmin = *std::min_element(mu.weights.begin(), mu.weights.end());
    if (wmin >= -1e-10 && (err < tol || polish_measure(mu, m, tol))) {
      drop_tiny_weights(mu);
      return mu;
    }
  }

  // Grid fallback: nonnegative least squares over 2001 nodes, then polish.
  const int grid = 2001;
  Mat A(deg + 1, grid);
  for (int g = 0; g < grid; ++g) {
    const double y = -1.0 + 2.0 * double(g) / double(grid - 1);
    A.col(g) = UnivariateMomentDomain::moments_of_point(y, deg);
  }
  NnlsResult sol = nnls(A, m);
  mu.atoms.clear();
  mu.weights.clear();
  for (int g = 0; g < grid; ++g) {
    if (sol.x[g] <= 0.0) continue;
    mu.atoms.push_back(Vec::Constant(1, -1.0 + 2.0 * double(g) / double(grid - 1)));
    mu.weights.push_back(sol.x[g]);
  }
  if (mu.atoms.empty() || !polish_measure(mu, m, tol))
    throw std::logic_error(
        "univariate backfit failed on a certified member (defect)");
  drop_tiny_weights(mu);
  if (static_cast<Eigen::Index>(mu.atoms.size()) > deg + 1)
    throw std::logic_error("univariate backfit produced too many atoms");
  return mu;
}

// ---------------------------------------------------------------------------
// GenerationEngine

GenerationEngine::GenerationEngine(StatisticMap map, MatrixKernel kernel,
                                   EngineConfig config)
    : map_(std::move(map)),
      engine_(std::move(kernel), map_.prediction_domain(), config) {}

GenerationEngine::Output GenerationEngine::round(const Vec& x) {
  const RoundRecord& rec = engine_.round(x);
  Output out;
  out.p = rec.p_sampled;
  out.mu = map_.backfit(rec.p_sampled);
  pending_mu_ = out.mu;
  mu_pending_ = true;
  return out;
}

void GenerationEngine::reveal_outcome(const Vec& y) {
  if (!mu_pending_) throw ProtocolError("outcome revealed without a round");
  if (!map_.outcome_valid(y))
    throw InputError("revealed outcome is outside the outcome space");
  engine_.reveal(map_.s(y));
  measures_.push_back(std::move(pending_mu_));
  outcomes_.push_back(y);
  mu_pending_ = false;
}

// ---------------------------------------------------------------------------

double oigap_bound(double h_norm, double T, double diameter, double g_bound) {
  return h_norm * std::sqrt(2.0 * diameter * diameter * g_bound * T);
}

double oigap_bound_multiclass(double sum_norms, double T, double g_bound) {
  return 4.0 * sum_norms * std::sqrt(T * g_bound);
}

double oigap_bound_linear_multiclass(Eigen::Index d, double B, double T) {
  return 4.0 * double(d) * B * std::sqrt(T);
}

double oigap_bound_meancov(double h_norm, double T, double g_bound) {
  return 4.0 * h_norm * std::sqrt(T * g_bound);
}

}  // namespace defgen
