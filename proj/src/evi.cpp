#include "defgen/evi.hpp"

#include <cmath>

namespace defgen {

Vec AtomicDistribution::mean() const {
  Vec m = Vec::Zero(atoms.empty() ? 0 : atoms.front().size());
  for (std::size_t i = 0; i < atoms.size(); ++i) m += weights[i] * atoms[i];
  return m;
}

void AtomicDistribution::validate(const ConvexDomain* domain,
                                  double weight_tol) const {
  if (atoms.size() != weights.size())
    throw InputError("atom/weight count mismatch");
  if (atoms.empty()) throw InputError("empty distribution");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InputError("negative atom weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > weight_tol)
    throw InputError("atom weights do not sum to one");
  if (domain != nullptr) {
    for (const auto& a : atoms)
      if (!domain->contains(a, kMembershipTol))
        throw InputError("distribution atom outside the domain");
  }
}

EviSchedule default_schedule(long long t, double diameter, double g_bound) {
  EviSchedule s;
  s.iterations = t * t;
  s.epsilon = 2.0 * diameter * diameter * g_bound;
  const double grad_bound = double(t) * g_bound * diameter;
  const double denom = grad_bound * std::sqrt(double(s.iterations));
  s.step = denom > 0.0 ? diameter / denom : 0.0;
  return s;
}

double certify_residual(const AtomicDistribution& dist, const EviOperator& op,
                        const ConvexDomain& domain) {
  Vec gradient = Vec::Zero(domain.dimension());
  double inner = 0.0;
  for (std::size_t k = 0; k < dist.atoms.size(); ++k) {
    Vec s = op.map(dist.atoms[k]);
    if (!s.allFinite()) throw InputError("EVI operator returned non-finite value");
    gradient += dist.weights[k] * s;
    inner += dist.weights[k] * s.dot(dist.atoms[k]);
  }
  return domain.linear_max(gradient).value - inner;
}

EviSolution solve_evi(const EviOperator& op, const ConvexDomain& domain,
                      double epsilon, long long iterations, double step) {
  if (iterations < 1) throw InputError("EVI iteration count must be >= 1");
  if (!(step >= 0.0)) throw InputError("EVI step must be nonnegative");

  EviSolution sol;
  sol.iterations = iterations;

  Vec p = domain.project(Vec::Zero(domain.dimension()));
  Vec gradient_acc = Vec::Zero(domain.dimension());
  double inner_acc = 0.0;
  const double w = 1.0 / double(iterations);

  std::vector<Vec>& atoms = sol.dist.atoms;
  std::vector<double>& weights = sol.dist.weights;
  auto same = [](const Vec& a, const Vec& b) {
    return a.size() == b.size() && (a - b).isZero(0.0);
  };
  for (long long k = 0; k < iterations; ++k) {
    // Gradient ascent on the running linear utility p -> S(p_k).p; the
    // uniform distribution over the iterates inherits the regret bound as
    // its EVI residual.
    Vec g = op.map(p);
    if (!g.allFinite()) throw InputError("EVI operator returned non-finite value");
    gradient_acc += w * g;
    inner_acc += w * g.dot(p);

    // Exactly repeated iterates collapse into one atom.
    if (!atoms.empty() && same(atoms.back(), p)) {
      weights.back() += w;
    } else {
      atoms.push_back(p);
      weights.push_back(w);
    }
    if (k + 1 < iterations && step > 0.0) {
      Vec q = p + step * g;
      if (!same(q, p)) p = domain.project(q);
    }
  }

  // Drop negligible atoms and renormalize.
  double total = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (weights[i] < kWeightClipTol) continue;
    atoms[kept] = atoms[i];
    weights[kept] = weights[i];
    total += weights[i];
    ++kept;
  }
  atoms.resize(kept);
  weights.resize(kept);
  for (double& x : weights) x /= total;

  sol.cert_gradient = gradient_acc;
  sol.cert_inner = inner_acc;
  sol.certified_residual =
      domain.linear_max(gradient_acc).value - inner_acc;
  sol.certified = sol.certified_residual <= epsilon;
  return sol;
}

}  // namespace defgen
