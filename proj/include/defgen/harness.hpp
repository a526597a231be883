#pragma once

#include "defgen/config.hpp"
#include "defgen/generate.hpp"
#include "defgen/transcript.hpp"

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace defgen {

// Nature: emits features before each round and the outcome after seeing the
// round's prediction distribution.  Outcomes may depend on D_t and features
// on the past; the sampled statistic is deliberately not part of the
// interface.
class NatureScenario {
 public:
  virtual ~NatureScenario() = default;
  virtual std::string name() const = 0;
  virtual Vec next_features(std::mt19937_64& rng) = 0;
  virtual Vec reveal_outcome(const AtomicDistribution& dist,
                             std::mt19937_64& rng) = 0;
};

std::unique_ptr<NatureScenario> build_scenario(const RunConfig& config,
                                               const StatisticMap& map,
                                               const MatrixKernel& kernel);

// Distinguisher families with per-member bound coefficients.
struct FamilyMember {
  Distinguisher f;
  double bound_coef = 0.0;  // magnitude the family bound formula consumes
};

struct RunStats {
  double T = 0.0;
  double diameter = 0.0;
  double g_bound = 0.0;
  double sum_epsilon = 0.0;
  double kernel_residual_sum = 0.0;
  double lag = 0.0;
};

struct BuiltFamily {
  std::string name;
  std::string bound_label;
  std::vector<FamilyMember> members;
  double (*bound)(const RunStats&, double coef) = nullptr;
};

std::vector<BuiltFamily> build_families(const RunConfig& config,
                                        const StatisticMap& map,
                                        const MatrixKernel& kernel,
                                        Eigen::Index x_dim);

struct FamilyReport {
  std::string family;
  std::string bound_label;
  double max_oigap = 0.0;  // OIGap of the worst-ratio member
  double bound = 0.0;      // that member's bound
  double ratio = 0.0;
  int violations = 0;
  std::string worst_label;
};

struct ExperimentResult {
  Transcript transcript;
  std::vector<FamilyReport> families;
  RunStats stats;
  Eigen::Index prediction_dim = 0;  // ambient dimension of Z
  double potential = 0.0;           // ||m_T||
  double potential_bound = 0.0;     // sqrt(T D^2 G + sum eps)
  double max_residual = 0.0;
  double seconds_per_round = 0.0;
};

ExperimentResult run_experiment(const RunConfig& config);

// Least-squares slope of log(error) against log(T); nonpositive errors are
// excluded and at least three points must remain.
double fit_rate(const std::vector<std::pair<double, double>>& t_and_error);

// Report CSV: scenario,T,d,kernel,family,max_oigap,bound,ratio,max_residual,
// seconds_per_round.
std::string report_csv(const ExperimentResult& result, const RunConfig& config);

// Random decision tree over {-1,+1}^n used by the boolean_scores scenario
// and the tree_powers family.
struct DecisionTree {
  struct Node {
    int coord = -1;  // -1 marks a leaf
    double value = 0.0;
    int lo = -1, hi = -1;
  };
  std::vector<Node> nodes;
  int root = 0;

  double eval(const Vec& x) const;
  // Coefficients of the multilinear expansion, keyed by sorted coordinate
  // subsets.
  std::vector<std::pair<std::vector<int>, double>> multilinear() const;

  static DecisionTree random(int n_bits, int depth, bool boolean_leaves,
                             std::mt19937_64& rng);
};

// Exact polynomial-kernel RKHS norm of a multilinear function on the
// hypercube, from its subset coefficients.
double poly_rkhs_norm(const std::vector<std::pair<std::vector<int>, double>>& coeffs,
                      const ScalarKernel& kernel);

}  // namespace defgen
