#pragma once

#include "defgen/domains.hpp"
#include "defgen/types.hpp"

#include <functional>
#include <vector>

namespace defgen {

// Finitely supported distribution over points of a convex domain.
struct AtomicDistribution {
  std::vector<Vec> atoms;
  std::vector<double> weights;

  Vec mean() const;
  // Weights sum to one within tol and every atom is a member.
  void validate(const ConvexDomain* domain = nullptr,
                double weight_tol = 1e-12) const;
  template <typename Rng>
  std::size_t sample_atom(Rng& rng) const {
    return sample_index(weights, rng);
  }
};

// Bounded operator S: Z -> R^d driving one expected variational inequality.
struct EviOperator {
  std::function<Vec(const Vec&)> map;
  double norm_bound = 0.0;  // certified bound on sup ||S(p)||
};

struct EviSchedule {
  long long iterations = 1;  // K
  double step = 0.0;         // eta
  double epsilon = 0.0;      // target EVI error
};

// Paper-constant schedule: K = t^2, gradient bound G' = t*G*D,
// eta = D / (G' sqrt(K)), epsilon = 2 D^2 G.
EviSchedule default_schedule(long long t, double diameter, double g_bound);

struct EviSolution {
  AtomicDistribution dist;
  double certified_residual = 0.0;
  long long iterations = 0;
  bool certified = false;
  // Cached certificate: residual(z) = gradient.dot(z) - inner for all z.
  Vec cert_gradient;
  double cert_inner = 0.0;
};

// Exact residual max_z E_{p~dist}[S(p)^T (z - p)] via one linear_max call.
double certify_residual(const AtomicDistribution& dist, const EviOperator& op,
                        const ConvexDomain& domain);

// Uniform distribution over K projected-gradient iterates starting at
// project(0); the solution is certified after solving and flagged if the
// residual exceeds epsilon.
EviSolution solve_evi(const EviOperator& op, const ConvexDomain& domain,
                      double epsilon, long long iterations, double step);

}  // namespace defgen
