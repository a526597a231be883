#pragma once

#include "defgen/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace defgen {

// Declared sup-norm bounds on kernel inputs; G certificates are computed
// from these.
struct InputBounds {
  double x_norm = 1.0;
  double p_norm = 1.0;
};

enum class ScalarKernelKind { kLinear, kAffinePair, kPolynomial, kConstant };

// Scalar kernel k((x,p),(x',p')).  Every built-in variant carries an explicit
// finite feature map phi with k(a,b) = phi(a).phi(b), which is what the
// calibration engine amortizes over.
class ScalarKernel {
 public:
  ScalarKernel(ScalarKernelKind kind, Eigen::Index x_dim, Eigen::Index p_dim,
               int degree = 1);

  double eval(const Vec& x, const Vec& p, const Vec& x2, const Vec& p2) const;

  Eigen::Index feature_dim() const { return feature_dim_; }
  Vec features(const Vec& x, const Vec& p) const;

  // sup over admissible inputs of k(a,a); exact per variant.
  double bound(const InputBounds& b) const;

  ScalarKernelKind kind() const { return kind_; }
  int degree() const { return degree_; }
  Eigen::Index x_dim() const { return x_dim_; }
  Eigen::Index p_dim() const { return p_dim_; }
  std::string name() const;

  // Polynomial-kernel expansion layout (exponent vectors and feature scales).
  const std::vector<std::vector<int>>& poly_exponents() const {
    return poly_exponents_;
  }
  const std::vector<double>& poly_scales() const { return poly_scales_; }

 private:
  ScalarKernelKind kind_;
  Eigen::Index x_dim_, p_dim_;
  int degree_;
  Eigen::Index feature_dim_;
  // Exponent vectors and scale factors of the polynomial kernel expansion.
  std::vector<std::vector<int>> poly_exponents_;
  std::vector<double> poly_scales_;
};

// Explicit feature map Phi(x,p) in R^{r x d}; Gamma(a,b) = Phi(a)^T Phi(b).
struct FeatureMap {
  std::string name;
  Eigen::Index r = 0;
  Eigen::Index d = 0;
  Eigen::Index x_dim = 0;
  Eigen::Index p_dim = 0;
  std::function<Mat(const Vec& x, const Vec& p)> fn;
  // Analytic bound on ||Phi(a)||_op^2 given input bounds, when known.
  std::function<double(const InputBounds&)> op_bound;
};

FeatureMap make_feature_map(const std::string& name, Eigen::Index x_dim,
                            Eigen::Index p_dim, Eigen::Index d);

// Matrix-valued kernel Gamma((x,p),(x',p')) in R^{d x d} with a certified
// operator-norm bound G.
class MatrixKernel {
 public:
  static MatrixKernel identity_scaled(ScalarKernel k, Eigen::Index d,
                                      const InputBounds& bounds);
  static MatrixKernel from_feature_map(FeatureMap map, const InputBounds& bounds,
                                       std::uint64_t search_seed = 20240501);

  Eigen::Index out_dim() const { return d_; }
  Mat eval(const Vec& x, const Vec& p, const Vec& x2, const Vec& p2) const;

  // Generic feature space of dimension feature_dim(); the engine accumulates
  // residual features there.  apply embeds a residual u at input a, adjoint
  // evaluates the accumulated functional at a.
  Eigen::Index feature_dim() const { return feature_dim_; }
  Vec feature_apply(const Vec& x, const Vec& p, const Vec& u) const;
  Vec feature_adjoint(const Vec& x, const Vec& p, const Vec& acc) const;

  double g_bound() const { return g_bound_; }
  const std::string& g_certification() const { return g_certification_; }
  bool is_identity_scaled() const { return scalar_.has_value(); }
  const ScalarKernel& scalar() const { return *scalar_; }
  std::string name() const;

 private:
  MatrixKernel() = default;
  Eigen::Index d_ = 0;
  Eigen::Index feature_dim_ = 0;
  std::optional<ScalarKernel> scalar_;
  std::optional<FeatureMap> map_;
  double g_bound_ = 0.0;
  std::string g_certification_;
};

// A member of the vector-valued RKHS, either as generic-feature weights
// (norm = ||theta||) or as a kernel expansion over anchor points.
struct RkhsAnchor {
  Vec x;
  Vec p;
  Vec theta;  // coefficient vector in R^d
};

class RkhsFunction {
 public:
  static RkhsFunction feature_form(Vec theta);
  static RkhsFunction expansion_form(std::vector<RkhsAnchor> anchors);

  bool is_feature_form() const { return feature_; }
  const Vec& theta() const { return theta_; }
  const std::vector<RkhsAnchor>& anchors() const { return anchors_; }

  Vec eval(const MatrixKernel& kernel, const Vec& x, const Vec& p) const;
  double norm(const MatrixKernel& kernel) const;

 private:
  bool feature_ = true;
  Vec theta_;
  std::vector<RkhsAnchor> anchors_;
};

}  // namespace defgen
