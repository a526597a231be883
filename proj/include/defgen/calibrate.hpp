#pragma once

#include "defgen/domains.hpp"
#include "defgen/evi.hpp"
#include "defgen/kernels.hpp"
#include "defgen/types.hpp"

#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace defgen {

// One completed protocol round.
struct RoundRecord {
  int t = 0;
  Vec x;
  AtomicDistribution dist;
  Vec p_sampled;
  Vec z;  // target; size 0 while the round is pending
  double epsilon_used = 0.0;     // EVI tolerance this round certifies
  double certified_residual = 0.0;
  // Certificate functional: E[S(p).(z - p)] = cert_gradient.z - cert_inner.
  Vec cert_gradient;
  double cert_inner = 0.0;
};

struct EngineConfig {
  std::optional<double> epsilon_target;  // default 2 D^2 G
  long long k_cap = 10000;
  // When true a round whose certified residual exceeds the target throws;
  // otherwise the round is re-certified at the achieved residual.
  bool strict_epsilon = false;
  std::uint64_t seed = 0;
};

// Online high-dimensional multicalibration: maintain residual features,
// solve the round EVI, record outcomes, and measure calibration error.
class CalibrationEngine {
 public:
  CalibrationEngine(MatrixKernel kernel,
                    std::shared_ptr<const ConvexDomain> domain,
                    EngineConfig config = {});

  // Round operator in kernel-expansion form,
  //   S_t(p) = sum_tau sum_atoms w Gamma((x_t,p),(x_tau,p_atom)) (z_tau - p_atom).
  // The closure references engine history; keep the engine alive and
  // unmodified while using it.
  EviOperator make_operator(const Vec& x) const;

  // Same operator through the accumulated feature vector,
  //   S_t(p) = Phi(x_t,p)^T m_t.
  EviOperator make_operator_amortized(const Vec& x) const;

  // Solve the round EVI, sample p_t, and leave the record pending until the
  // target is revealed.  Returns the round's distribution.
  const RoundRecord& round(const Vec& x);

  void reveal(const Vec& z);

  // |sum_t E_{p~D_t} h(x_t,p).(z_t - p)| over completed rounds.
  double calibration_error(const RkhsFunction& h) const;
  // Diagnostic variant along the sampled path p_t instead of D_t.
  double calibration_error_sampled(const RkhsFunction& h) const;

  // h_norm * sqrt(T D^2 G + sum_t eps_t) from the recorded schedule.
  double theoretical_bound(double h_norm) const;

  // Exact residual-feature accumulator m_t and its recomputation from
  // stored history (they agree up to roundoff).
  const Vec& accumulator() const { return m_; }
  Vec recompute_accumulator() const;

  // ||m_t||, the RKHS norm of the accumulated residual; also the exact
  // multicalibration error of the worst unit-norm function.
  double potential() const { return m_.norm(); }

  // sum_t E[(z_t - p)^T Gamma(a,a) (z_t - p)], the realized kernel residual.
  double kernel_residual_sum() const { return kernel_residual_sum_; }

  double sum_epsilon() const { return sum_epsilon_; }
  double max_residual() const { return max_residual_; }

  const std::vector<RoundRecord>& history() const { return history_; }
  bool has_pending() const { return pending_.has_value(); }
  const RoundRecord& pending() const;
  int completed_rounds() const { return static_cast<int>(history_.size()); }

  const MatrixKernel& kernel() const { return kernel_; }
  const ConvexDomain& domain() const { return *domain_; }
  double diameter() const { return domain_->diameter(); }
  double g_bound() const { return kernel_.g_bound(); }
  double epsilon_target() const;
  const EngineConfig& config() const { return config_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  MatrixKernel kernel_;
  std::shared_ptr<const ConvexDomain> domain_;
  EngineConfig config_;
  std::vector<RoundRecord> history_;
  std::optional<RoundRecord> pending_;
  Vec m_;
  double kernel_residual_sum_ = 0.0;
  double sum_epsilon_ = 0.0;
  double max_residual_ = 0.0;
  std::mt19937_64 rng_;
};

}  // namespace defgen
