#include "defgen/kernels.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace defgen {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r *= double(n - k + i) / double(i);
  return r;
}

// Exponent vectors alpha with |alpha| <= r over n variables, lexicographic.
void enumerate_exponents(int n, int r, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == n) {
    out.push_back(cur);
    return;
  }
  for (int e = 0; e <= r; ++e) {
    cur.push_back(e);
    enumerate_exponents(n, r - e, cur, out);
    cur.pop_back();
  }
}

}  // namespace

ScalarKernel::ScalarKernel(ScalarKernelKind kind, Eigen::Index x_dim,
                           Eigen::Index p_dim, int degree)
    : kind_(kind), x_dim_(x_dim), p_dim_(p_dim), degree_(degree) {
  switch (kind_) {
    case ScalarKernelKind::kLinear:
      feature_dim_ = x_dim_;
      break;
    case ScalarKernelKind::kAffinePair:
      feature_dim_ = x_dim_ + p_dim_;
      break;
    case ScalarKernelKind::kConstant:
      feature_dim_ = 1;
      break;
    case ScalarKernelKind::kPolynomial: {
      if (degree_ < 1) throw InputError("polynomial kernel degree must be >= 1");
      std::vector<int> cur;
      enumerate_exponents(static_cast<int>(x_dim_), degree_, cur, poly_exponents_);
      poly_scales_.reserve(poly_exponents_.size());
      for (const auto& alpha : poly_exponents_) {
        int total = 0;
        double mult = 1.0;  // j! / prod alpha_i!
        for (int e : alpha) {
          for (int i = 1; i <= e; ++i) mult *= double(total + i) / double(i);
          total += e;
        }
        poly_scales_.push_back(std::sqrt(binomial(degree_, total) * mult));
      }
      feature_dim_ = static_cast<Eigen::Index>(poly_exponents_.size());
      break;
    }
  }
}

double ScalarKernel::eval(const Vec& x, const Vec& p, const Vec& x2,
                          const Vec& p2) const {
  switch (kind_) {
    case ScalarKernelKind::kLinear:
      return x.dot(x2);
    case ScalarKernelKind::kAffinePair:
      return x.dot(x2) + p.dot(p2);
    case ScalarKernelKind::kConstant:
      return 1.0;
    case ScalarKernelKind::kPolynomial:
      return std::pow(1.0 + x.dot(x2), degree_);
  }
  return 0.0;
}

Vec ScalarKernel::features(const Vec& x, const Vec& p) const {
  switch (kind_) {
    case ScalarKernelKind::kLinear:
      return x;
    case ScalarKernelKind::kAffinePair: {
      Vec f(x.size() + p.size());
      f << x, p;
      return f;
    }
    case ScalarKernelKind::kConstant:
      return Vec::Ones(1);
    case ScalarKernelKind::kPolynomial: {
      Vec f(feature_dim_);
      for (Eigen::Index i = 0; i < feature_dim_; ++i) {
        double prod = poly_scales_[i];
        const auto& alpha = poly_exponents_[i];
        for (std::size_t j = 0; j < alpha.size(); ++j)
          for (int e = 0; e < alpha[j]; ++e) prod *= x[static_cast<Eigen::Index>(j)];
        f[i] = prod;
      }
      return f;
    }
  }
  return Vec();
}

double ScalarKernel::bound(const InputBounds& b) const {
  if (!std::isfinite(b.x_norm) || !std::isfinite(b.p_norm))
    throw InputError("kernel bound requires finite input norm bounds");
  switch (kind_) {
    case ScalarKernelKind::kLinear:
      return b.x_norm * b.x_norm;
    case ScalarKernelKind::kAffinePair:
      return b.x_norm * b.x_norm + b.p_norm * b.p_norm;
    case ScalarKernelKind::kConstant:
      return 1.0;
    case ScalarKernelKind::kPolynomial:
      return std::pow(1.0 + b.x_norm * b.x_norm, degree_);
  }
  return 0.0;
}

std::string ScalarKernel::name() const {
  switch (kind_) {
    case ScalarKernelKind::kLinear:
      return "linear";
    case ScalarKernelKind::kAffinePair:
      return "affine_pair";
    case ScalarKernelKind::kConstant:
      return "constant";
    case ScalarKernelKind::kPolynomial:
      return "polynomial_" + std::to_string(degree_);
  }
  return "?";
}

// ---------------------------------------------------------------------------

FeatureMap make_feature_map(const std::string& name, Eigen::Index x_dim,
                            Eigen::Index p_dim, Eigen::Index d) {
  FeatureMap m;
  m.name = name;
  m.d = d;
  m.x_dim = x_dim;
  m.p_dim = p_dim;
  if (name == "raw_x") {
    // Phi(a) u = vec(phi u^T) with phi = x; span of all h(x,p) = A x.
    m.r = x_dim * d;
    m.fn = [x_dim, d](const Vec& x, const Vec&) {
      Mat phi = Mat::Zero(x_dim * d, d);
      for (Eigen::Index i = 0; i < x_dim; ++i)
        for (Eigen::Index j = 0; j < d; ++j) phi(i * d + j, j) = x[i];
      return phi;
    };
    m.op_bound = [](const InputBounds& b) { return b.x_norm * b.x_norm; };
  } else if (name == "raw_xp") {
    m.r = (x_dim + p_dim) * d;
    m.fn = [x_dim, p_dim, d](const Vec& x, const Vec& p) {
      Mat phi = Mat::Zero((x_dim + p_dim) * d, d);
      for (Eigen::Index i = 0; i < x_dim; ++i)
        for (Eigen::Index j = 0; j < d; ++j) phi(i * d + j, j) = x[i];
      for (Eigen::Index i = 0; i < p_dim; ++i)
        for (Eigen::Index j = 0; j < d; ++j) phi((x_dim + i) * d + j, j) = p[i];
      return phi;
    };
    m.op_bound = [](const InputBounds& b) {
      return b.x_norm * b.x_norm + b.p_norm * b.p_norm;
    };
  } else if (name == "columns_xp") {
    // Phi(x,p)^T = [x | p]; requires x and p to share the output dimension.
    if (x_dim != d || p_dim != d)
      throw InputError("columns_xp requires x_dim == p_dim == d");
    m.r = 2;
    m.fn = [d](const Vec& x, const Vec& p) {
      Mat phi(2, d);
      phi.row(0) = x.transpose();
      phi.row(1) = p.transpose();
      return phi;
    };
    m.op_bound = [](const InputBounds& b) {
      return b.x_norm * b.x_norm + b.p_norm * b.p_norm;
    };
  } else {
    throw InputError("unknown feature map: " + name);
  }
  return m;
}

MatrixKernel MatrixKernel::identity_scaled(ScalarKernel k, Eigen::Index d,
                                           const InputBounds& bounds) {
  MatrixKernel mk;
  mk.d_ = d;
  mk.feature_dim_ = k.feature_dim() * d;
  mk.g_bound_ = k.bound(bounds);
  mk.g_certification_ = "analytic";
  mk.scalar_ = std::move(k);
  return mk;
}

MatrixKernel MatrixKernel::from_feature_map(FeatureMap map,
                                            const InputBounds& bounds,
                                            std::uint64_t search_seed) {
  MatrixKernel mk;
  mk.d_ = map.d;
  mk.feature_dim_ = map.r;
  if (map.op_bound) {
    mk.g_bound_ = map.op_bound(bounds);
    mk.g_certification_ = "analytic";
  } else {
    // Random search over admissible inputs plus a 10% safety margin.
    std::mt19937_64 rng(search_seed);
    double worst = 0.0;
    for (int it = 0; it < 100000; ++it) {
      Vec x = gaussian_vector(map.x_dim, rng);
      if (x.norm() > 0) x *= bounds.x_norm * uniform01(rng) / x.norm();
      Vec p = gaussian_vector(map.p_dim, rng);
      if (p.norm() > 0) p *= bounds.p_norm * uniform01(rng) / p.norm();
      Mat phi = map.fn(x, p);
      Eigen::JacobiSVD<Mat> svd(phi);
      worst = std::max(worst, svd.singularValues()[0]);
    }
    mk.g_bound_ = 1.1 * worst * worst;
    mk.g_certification_ = "random_search_margin_1.1";
  }
  mk.map_ = std::move(map);
  return mk;
}

Mat MatrixKernel::eval(const Vec& x, const Vec& p, const Vec& x2,
                       const Vec& p2) const {
  if (scalar_) return scalar_->eval(x, p, x2, p2) * Mat::Identity(d_, d_);
  return map_->fn(x, p).transpose() * map_->fn(x2, p2);
}

Vec MatrixKernel::feature_apply(const Vec& x, const Vec& p, const Vec& u) const {
  require_dim(u, d_, "residual");
  if (scalar_) {
    Vec phi = scalar_->features(x, p);
    Vec out(feature_dim_);
    for (Eigen::Index i = 0; i < phi.size(); ++i)
      out.segment(i * d_, d_) = phi[i] * u;
    return out;
  }
  return map_->fn(x, p) * u;
}

Vec MatrixKernel::feature_adjoint(const Vec& x, const Vec& p,
                                  const Vec& acc) const {
  require_dim(acc, feature_dim_, "feature accumulator");
  if (scalar_) {
    Vec phi = scalar_->features(x, p);
    Vec out = Vec::Zero(d_);
    for (Eigen::Index i = 0; i < phi.size(); ++i)
      out += phi[i] * acc.segment(i * d_, d_);
    return out;
  }
  return map_->fn(x, p).transpose() * acc;
}

std::string MatrixKernel::name() const {
  if (scalar_) return "identity_scaled(" + scalar_->name() + ")";
  return "feature_map(" + map_->name + ")";
}

// ---------------------------------------------------------------------------

RkhsFunction RkhsFunction::feature_form(Vec theta) {
  RkhsFunction h;
  h.feature_ = true;
  h.theta_ = std::move(theta);
  return h;
}

RkhsFunction RkhsFunction::expansion_form(std::vector<RkhsAnchor> anchors) {
  RkhsFunction h;
  h.feature_ = false;
  h.anchors_ = std::move(anchors);
  return h;
}

Vec RkhsFunction::eval(const MatrixKernel& kernel, const Vec& x,
                       const Vec& p) const {
  if (feature_) return kernel.feature_adjoint(x, p, theta_);
  Vec out = Vec::Zero(kernel.out_dim());
  for (const auto& a : anchors_) out += kernel.eval(a.x, a.p, x, p) * a.theta;
  return out;
}

double RkhsFunction::norm(const MatrixKernel& kernel) const {
  if (feature_) return theta_.norm();
  double sq = 0.0;
  for (const auto& a : anchors_)
    for (const auto& b : anchors_)
      sq += a.theta.dot(kernel.eval(a.x, a.p, b.x, b.p) * b.theta);
  return std::sqrt(std::max(0.0, sq));
}

}  // namespace defgen
