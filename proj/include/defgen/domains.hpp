#pragma once

#include "defgen/types.hpp"

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>

namespace defgen {

// Strictly separating hyperplane: normal.dot(w) > offset for the queried
// outside point, normal.dot(z) <= offset for every member.  normal has unit
// Euclidean norm.
struct Hyperplane {
  Vec normal;
  double offset = 0.0;
};

struct LinearMaxResult {
  Vec point;     // a member attaining the maximum
  double value;  // c.dot(point)
};

// Oracle bundle for a compact convex prediction set Z.  All oracles are
// pure after construction and safe to share across threads.
class ConvexDomain {
 public:
  virtual ~ConvexDomain() = default;

  Eigen::Index dimension() const { return dim_; }

  // Upper bound on max ||z - z'||, exact where a closed form exists.
  virtual double diameter() const = 0;

  // Upper bound on sup ||z|| over Z.
  virtual double norm_bound() const = 0;

  virtual bool contains(const Vec& w, double tol = kMembershipTol) const = 0;

  // nullopt when w is a member (within membership tolerance).
  virtual std::optional<Hyperplane> separate(const Vec& w) const = 0;

  virtual Vec project(const Vec& w) const = 0;

  virtual LinearMaxResult linear_max(const Vec& c) const = 0;

  // A random member; the distribution is unspecified but covers Z.
  virtual Vec sample(std::mt19937_64& rng) const;

  virtual std::string name() const = 0;

 protected:
  explicit ConvexDomain(Eigen::Index dim) : dim_(dim) {
    if (dim <= 0) throw InputError("domain dimension must be positive");
  }
  void check_input(const Vec& w) const {
    require_dim(w, dim_, "domain point");
    require_finite(w, "domain point");
  }

  Eigen::Index dim_;
};

// Probability simplex {p >= 0, sum p = 1} in R^d.
class SimplexDomain final : public ConvexDomain {
 public:
  explicit SimplexDomain(Eigen::Index d) : ConvexDomain(d) {}
  double diameter() const override { return std::sqrt(2.0); }
  double norm_bound() const override { return 1.0; }
  bool contains(const Vec& w, double tol) const override;
  std::optional<Hyperplane> separate(const Vec& w) const override;
  Vec project(const Vec& w) const override;
  LinearMaxResult linear_max(const Vec& c) const override;
  Vec sample(std::mt19937_64& rng) const override;
  std::string name() const override { return "simplex"; }
};

// Axis-aligned box [lower, upper]^d.
class BoxDomain final : public ConvexDomain {
 public:
  BoxDomain(Vec lower, Vec upper);
  static BoxDomain symmetric(Eigen::Index d, double half_side = 1.0);
  double diameter() const override { return (upper_ - lower_).norm(); }
  double norm_bound() const override;
  bool contains(const Vec& w, double tol) const override;
  std::optional<Hyperplane> separate(const Vec& w) const override;
  Vec project(const Vec& w) const override;
  LinearMaxResult linear_max(const Vec& c) const override;
  Vec sample(std::mt19937_64& rng) const override;
  std::string name() const override { return "box"; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

 private:
  Vec lower_, upper_;
};

// Euclidean ball of given radius centered at the origin.
class BallDomain final : public ConvexDomain {
 public:
  explicit BallDomain(Eigen::Index d, double radius = 1.0);
  double diameter() const override { return 2.0 * radius_; }
  double norm_bound() const override { return radius_; }
  bool contains(const Vec& w, double tol) const override;
  std::optional<Hyperplane> separate(const Vec& w) const override;
  Vec project(const Vec& w) const override;
  LinearMaxResult linear_max(const Vec& c) const override;
  Vec sample(std::mt19937_64& rng) const override;
  std::string name() const override { return "ball"; }
  double radius() const { return radius_; }

 private:
  double radius_;
};

// First and second moments (v, Q) of probability measures on the unit ball,
// flattened as (v, upper triangle of Q row-major).  Membership is the
// positive-semidefinite characterization {Q >= vv^T, Q >= 0, Tr Q <= 1}.
class MeanCovDomain final : public ConvexDomain {
 public:
  explicit MeanCovDomain(Eigen::Index outcome_dim);
  static Eigen::Index ambient_dim(Eigen::Index outcome_dim) {
    return outcome_dim + outcome_dim * (outcome_dim + 1) / 2;
  }
  // Flattened coordinate of Q(i,j), i <= j, after the d mean coordinates.
  static Eigen::Index q_index(Eigen::Index i, Eigen::Index j, Eigen::Index d) {
    return d + i * d - i * (i - 1) / 2 + (j - i);
  }
  Eigen::Index outcome_dim() const { return d_; }

  Vec pack(const Vec& v, const Mat& Q) const;
  void unpack(const Vec& w, Vec& v, Mat& Q) const;

  double diameter() const override { return std::sqrt(8.0); }
  double norm_bound() const override { return std::sqrt(2.0); }
  bool contains(const Vec& w, double tol) const override;
  std::optional<Hyperplane> separate(const Vec& w) const override;
  Vec project(const Vec& w) const override;
  LinearMaxResult linear_max(const Vec& c) const override;
  Vec sample(std::mt19937_64& rng) const override;
  std::string name() const override { return "mean_cov"; }

 private:
  Eigen::Index d_;
};

// Power moments (m_0, ..., m_{2d}) of probability measures on [-1,1].
// Membership: m_0 = 1, moment Hankel matrix PSD, and the (1-y^2)-localizing
// Hankel matrix PSD.
class UnivariateMomentDomain final : public ConvexDomain {
 public:
  explicit UnivariateMomentDomain(Eigen::Index max_degree);
  Eigen::Index max_degree() const { return deg_; }

  Mat hankel(const Vec& m) const;             // (d+1)x(d+1), entries m_{i+j}
  Mat localizing_hankel(const Vec& m) const;  // d x d, entries m_{i+j}-m_{i+j+2}
  static Vec moments_of_point(double y, Eigen::Index max_degree);

  double diameter() const override { return 2.0 * std::sqrt(double(deg_ / 2)); }
  double norm_bound() const override { return std::sqrt(double(deg_ + 1)); }
  bool contains(const Vec& w, double tol) const override;
  std::optional<Hyperplane> separate(const Vec& w) const override;
  Vec project(const Vec& w) const override;
  LinearMaxResult linear_max(const Vec& c) const override;
  Vec sample(std::mt19937_64& rng) const override;
  std::string name() const override { return "univariate_moments"; }

 private:
  Eigen::Index deg_;  // even max degree 2d
};

// Maximum of the polynomial sum_k c_k y^k over [-1,1]; returns (y*, value).
std::pair<double, double> max_polynomial_on_interval(const Vec& coeffs);

std::shared_ptr<ConvexDomain> make_domain(const std::string& name,
                                          Eigen::Index dim, double lower = -1.0,
                                          double upper = 1.0);

}  // namespace defgen
