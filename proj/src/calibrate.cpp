#include "defgen/calibrate.hpp"

#include "defgen/log.hpp"

#include <cmath>

namespace defgen {

CalibrationEngine::CalibrationEngine(MatrixKernel kernel,
                                     std::shared_ptr<const ConvexDomain> domain,
                                     EngineConfig config)
    : kernel_(std::move(kernel)),
      domain_(std::move(domain)),
      config_(config),
      rng_(config.seed) {
  if (kernel_.out_dim() != domain_->dimension())
    throw InputError("kernel output dimension does not match the domain");
  m_ = Vec::Zero(kernel_.feature_dim());
}

double CalibrationEngine::epsilon_target() const {
  if (config_.epsilon_target) {
    if (!(*config_.epsilon_target >= 0.0))
      throw InputError("epsilon target must be nonnegative");
    return *config_.epsilon_target;
  }
  const double d = domain_->diameter();
  return 2.0 * d * d * kernel_.g_bound();
}

EviOperator CalibrationEngine::make_operator(const Vec& x) const {
  EviOperator op;
  const auto* hist = &history_;
  const auto* kernel = &kernel_;
  Vec xt = x;
  op.map = [hist, kernel, xt](const Vec& p) {
    Vec s = Vec::Zero(kernel->out_dim());
    for (const auto& rec : *hist) {
      for (std::size_t k = 0; k < rec.dist.atoms.size(); ++k) {
        s += rec.dist.weights[k] * (kernel->eval(xt, p, rec.x, rec.dist.atoms[k]) *
                                    (rec.z - rec.dist.atoms[k]));
      }
    }
    return s;
  };
  op.norm_bound = double(history_.size()) * kernel_.g_bound() * domain_->diameter();
  return op;
}

EviOperator CalibrationEngine::make_operator_amortized(const Vec& x) const {
  EviOperator op;
  const auto* kernel = &kernel_;
  const Vec* m = &m_;
  Vec xt = x;
  op.map = [kernel, m, xt](const Vec& p) {
    return kernel->feature_adjoint(xt, p, *m);
  };
  // ||S_t(p)|| = ||Phi(a)^T m|| <= sqrt(G) ||m||, and ||m|| <= t G^1/2 D by
  // the potential recursion, so this never exceeds the worst-case t G D.
  op.norm_bound = std::sqrt(kernel_.g_bound()) * m_.norm();
  return op;
}

const RoundRecord& CalibrationEngine::pending() const {
  if (!pending_) throw ProtocolError("no pending round");
  return *pending_;
}

const RoundRecord& CalibrationEngine::round(const Vec& x) {
  if (pending_)
    throw ProtocolError("round started while another round awaits its target");
  require_finite(x, "features");

  const double diam = domain_->diameter();
  const double eps = epsilon_target();
  EviOperator op = make_operator_amortized(x);

  // Iteration budget from the certified operator bound: residual after K
  // ascent steps is at most 2 G' D / sqrt(K).
  long long K = 1;
  double eta = 0.0;
  if (op.norm_bound > 0.0 && diam > 0.0) {
    if (eps > 0.0) {
      const double need = 2.0 * op.norm_bound * diam / eps;
      K = static_cast<long long>(std::ceil(need * need));
      K = std::max<long long>(1, std::min(K, config_.k_cap));
    } else {
      K = config_.k_cap;
    }
    eta = diam / (op.norm_bound * std::sqrt(double(K)));
  }

  EviSolution sol = solve_evi(op, *domain_, eps, K, eta);
  const int t = completed_rounds() + 1;
  double eps_used = eps;
  if (!sol.certified) {
    if (config_.strict_epsilon)
      throw CertificationError("EVI residual above target at round " +
                                   std::to_string(t),
                               t, sol.certified_residual, eps);
    // Re-certify at the achieved residual; the bound accounting uses it.
    eps_used = sol.certified_residual;
    log_info("round ", t, ": re-certified at residual ", sol.certified_residual,
             " (target ", eps, ", K ", K, ")");
  }

  RoundRecord rec;
  rec.t = t;
  rec.x = x;
  rec.dist = std::move(sol.dist);
  rec.epsilon_used = eps_used;
  rec.certified_residual = sol.certified_residual;
  rec.cert_gradient = std::move(sol.cert_gradient);
  rec.cert_inner = sol.cert_inner;
  rec.p_sampled = rec.dist.atoms[rec.dist.sample_atom(rng_)];
  pending_ = std::move(rec);
  return *pending_;
}

void CalibrationEngine::reveal(const Vec& z) {
  if (!pending_) throw ProtocolError("reveal without a pending round");
  require_dim(z, domain_->dimension(), "target");
  require_finite(z, "target");
  if (!domain_->contains(z, kMembershipTol))
    throw InputError("revealed target is outside the prediction set");

  RoundRecord& rec = *pending_;
  rec.z = z;

  Vec increment = Vec::Zero(kernel_.feature_dim());
  double jensen = 0.0;
  for (std::size_t k = 0; k < rec.dist.atoms.size(); ++k) {
    Vec phi_res = kernel_.feature_apply(rec.x, rec.dist.atoms[k],
                                        z - rec.dist.atoms[k]);
    increment += rec.dist.weights[k] * phi_res;
    jensen += rec.dist.weights[k] * phi_res.squaredNorm();
  }
  m_ += increment;
  kernel_residual_sum_ += jensen;
  sum_epsilon_ += rec.epsilon_used;
  max_residual_ = std::max(max_residual_, rec.certified_residual);

  history_.push_back(std::move(rec));
  pending_.reset();
}

Vec CalibrationEngine::recompute_accumulator() const {
  Vec m = Vec::Zero(kernel_.feature_dim());
  for (const auto& rec : history_)
    for (std::size_t k = 0; k < rec.dist.atoms.size(); ++k)
      m += rec.dist.weights[k] *
           kernel_.feature_apply(rec.x, rec.dist.atoms[k],
                                 rec.z - rec.dist.atoms[k]);
  return m;
}

double CalibrationEngine::calibration_error(const RkhsFunction& h) const {
  if (h.is_feature_form()) {
    require_dim(h.theta(), kernel_.feature_dim(), "rkhs weights");
    return std::abs(h.theta().dot(m_));
  }
  double acc = 0.0;
  for (const auto& rec : history_)
    for (std::size_t k = 0; k < rec.dist.atoms.size(); ++k)
      acc += rec.dist.weights[k] *
             h.eval(kernel_, rec.x, rec.dist.atoms[k])
                 .dot(rec.z - rec.dist.atoms[k]);
  return std::abs(acc);
}

double CalibrationEngine::calibration_error_sampled(const RkhsFunction& h) const {
  double acc = 0.0;
  for (const auto& rec : history_)
    acc += h.eval(kernel_, rec.x, rec.p_sampled).dot(rec.z - rec.p_sampled);
  return std::abs(acc);
}

double CalibrationEngine::theoretical_bound(double h_norm) const {
  const double T = double(completed_rounds());
  const double d = domain_->diameter();
  return h_norm * std::sqrt(T * d * d * kernel_.g_bound() + sum_epsilon_);
}

}  // namespace defgen
