#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace defgen {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Tolerances shared across the library.  Membership separates numerical
// noise from genuine constraint violations at double precision; projection
// accuracy is what the iterative projectors are driven to.
inline constexpr double kMembershipTol = 1e-9;
inline constexpr double kProjectionTol = 1e-7;
inline constexpr double kWeightClipTol = 1e-12;

// Invalid caller-supplied data (bad dimensions, out-of-set points, ...).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Out-of-order use of the online protocol (reveal without a pending round).
struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

// An EVI solution whose certified residual exceeds the requested tolerance.
struct CertificationError : std::runtime_error {
  CertificationError(const std::string& what, int round, double residual,
                     double requested)
      : std::runtime_error(what),
        round(round),
        residual(residual),
        requested(requested) {}
  int round;
  double residual;
  double requested;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw InputError(std::string(what) + ": non-finite entries");
}

inline void require_dim(const Vec& v, Eigen::Index d, const char* what) {
  if (v.size() != d)
    throw InputError(std::string(what) + ": dimension " +
                     std::to_string(v.size()) + ", expected " +
                     std::to_string(d));
}

// Deterministic uniform double in [0,1) from the top 53 bits of the engine.
// Kept explicit so that sampled paths are stable across standard libraries.
template <typename Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Index sample from a normalized weight vector (inverse CDF walk).
template <typename Rng>
std::size_t sample_index(const std::vector<double>& weights, Rng& rng) {
  const double u = uniform01<Rng>(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.empty() ? 0 : weights.size() - 1;
}

// Deterministic standard normal via Box-Muller on the explicit uniform.
template <typename Rng>
double gaussian(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

template <typename Rng>
Vec gaussian_vector(Eigen::Index n, Rng& rng) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian(rng);
  return v;
}

}  // namespace defgen
