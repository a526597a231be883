#pragma once

#include "defgen/calibrate.hpp"
#include "defgen/domains.hpp"
#include "defgen/kernels.hpp"
#include "defgen/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace defgen {

// Finitely supported probability measure over outcome points.
struct AtomicMeasure {
  std::vector<Vec> atoms;
  std::vector<double> weights;

  Vec mean() const;
  template <typename Rng>
  const Vec& sample(Rng& rng) const {
    return atoms[sample_index(weights, rng)];
  }
};

enum class StatisticKind { kOneHot, kPowerMoments, kIdentity, kMeanOuter };

// The map s: Y -> Z together with its backfitting inverse: given p in Z,
// an atomic measure mu over Y with E_mu[s] = p.
class StatisticMap {
 public:
  static StatisticMap one_hot(Eigen::Index classes);
  static StatisticMap power_moments(Eigen::Index max_degree);
  static StatisticMap identity(std::shared_ptr<const ConvexDomain> outcome_set);
  static StatisticMap mean_outer(Eigen::Index outcome_dim);

  StatisticKind kind() const { return kind_; }
  Eigen::Index statistic_dim() const;  // ambient dimension of Z
  Eigen::Index outcome_dim() const;    // dimension of stored outcome points

  Vec s(const Vec& y) const;
  bool outcome_valid(const Vec& y, double tol = kMembershipTol) const;

  // Prediction set Z matching this statistic.
  std::shared_ptr<const ConvexDomain> prediction_domain() const;

  // Atomic measure with statistics p (p must be a member of Z).
  AtomicMeasure backfit(const Vec& p) const;

  // Outcome whose statistic is the given extreme point of Z, as returned by
  // the domain's linear_max oracle.
  Vec outcome_from_extreme(const Vec& z) const;

  std::string name() const;

 private:
  StatisticKind kind_ = StatisticKind::kIdentity;
  Eigen::Index classes_ = 0;
  Eigen::Index degree_ = 0;
  Eigen::Index dim_ = 0;
  std::shared_ptr<const ConvexDomain> outcome_set_;
  std::shared_ptr<const ConvexDomain> prediction_set_;
};

// Algorithm: SVD of Q - vv^T, a pair of unit-sphere crossings per direction,
// and closed-form weights; at most 2d+1 atoms on the unit ball with mean v
// and second moment Q.
AtomicMeasure backfit_meancov(const Vec& v, const Mat& Q);

// Gauss-type construction from the moment Hankel matrix: interior mix,
// Jacobi matrix, eigenvalue nodes, Golub-Welsch weights; grid NNLS plus a
// Newton polish as fallback.  At most 2d+1 atoms in [-1,1] matching all
// moments through order 2d to 1e-8.
AtomicMeasure backfit_univariate(const Vec& m);

// Distinguisher f(x,p,y) = h(x,p).s(y).
struct Distinguisher {
  RkhsFunction h;
  double norm_h = 0.0;
  std::string label;
};

// Defensive Generation: calibrated statistics plus backfit conditional
// measures.
class GenerationEngine {
 public:
  GenerationEngine(StatisticMap map, MatrixKernel kernel,
                   EngineConfig config = {});

  struct Output {
    AtomicMeasure mu;
    Vec p;
  };

  // One generation round: calibrated statistic p_t sampled from the round
  // EVI solution, then mu_t backfit from p_t.
  Output round(const Vec& x);

  // Record the true outcome; z_t = s(y_t) completes the calibration round.
  void reveal_outcome(const Vec& y);

  const StatisticMap& map() const { return map_; }
  CalibrationEngine& calibrator() { return engine_; }
  const CalibrationEngine& calibrator() const { return engine_; }
  const std::vector<AtomicMeasure>& measures() const { return measures_; }
  const std::vector<Vec>& outcomes() const { return outcomes_; }

 private:
  StatisticMap map_;
  CalibrationEngine engine_;
  std::vector<AtomicMeasure> measures_;  // sampled-path mu_t per round
  std::vector<Vec> outcomes_;            // revealed y_t per round
  AtomicMeasure pending_mu_;
  bool mu_pending_ = false;
};

// Theorem-level OIGap bounds.
double oigap_bound(double h_norm, double T, double diameter, double g_bound);
double oigap_bound_multiclass(double sum_norms, double T, double g_bound);
double oigap_bound_linear_multiclass(Eigen::Index d, double B, double T);
double oigap_bound_meancov(double h_norm, double T, double g_bound);

}  // namespace defgen
