#pragma once

#include "defgen/generate.hpp"
#include "defgen/kernels.hpp"
#include "defgen/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// vendored single-header nlohmann/json
#include "json.hpp"

namespace defgen {

using Json = nlohmann::ordered_json;

struct MapSpec {
  std::string name;                  // one_hot|power_moments|identity|mean_outer
  Eigen::Index classes = 0;          // one_hot
  Eigen::Index degree = 0;           // power_moments (even max degree)
  Eigen::Index dim = 0;              // identity / mean_outer outcome dimension
  std::string domain = "box";        // identity: box|ball
  double lower = 0.0, upper = 1.0;   // identity box bounds
};

struct KernelSpec {
  std::string name;  // constant|linear|affine_pair|polynomial|feature_map
  int degree = 2;    // polynomial
  std::string feature_map;  // raw_x|raw_xp|columns_xp
};

struct ScenarioSpec {
  std::string name;  // iid|adversarial_flip|token_markov|lds|rain|boolean_scores
  Eigen::Index x_dim = 2;
  double x_norm = 1.0;
  Eigen::Index outcome_atoms = 4;  // iid: support size of mu*
  Eigen::Index lag = 3;            // lds window length
  double spectral_radius = 0.9;    // lds
  double noise = 0.05;             // lds / rain / boolean_scores
  Eigen::Index factors = 2;        // rain
  Eigen::Index n_bits = 6;         // boolean_scores hypercube dimension
  int tree_depth = 2;              // boolean_scores
};

struct FamilySpec {
  std::string name;  // unit_rkhs|linear_multiclass|meancov_linear|tree_powers|lds_quadratic
  int count = 50;
  double B = 1.0;
};

struct RunConfig {
  int version = 1;
  ScenarioSpec scenario;
  MapSpec map;
  KernelSpec kernel;
  long long T = 100;
  std::uint64_t seed = 0;
  std::string epsilon_mode = "default";  // default (2D^2G) | theorem (D^2G) | value
  double epsilon_value = 0.0;
  long long k_cap = 10000;
  bool strict = false;
  std::vector<FamilySpec> families;  // empty: defaults for the scenario
  Json raw;                          // canonical echo for transcripts
};

// Strict parse: unknown keys anywhere are errors.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::string& path);
Json config_to_json(const RunConfig& c);

StatisticMap build_map(const MapSpec& spec);
MatrixKernel build_kernel(const KernelSpec& spec, Eigen::Index x_dim,
                          Eigen::Index z_dim, const InputBounds& bounds);
std::optional<double> epsilon_target(const RunConfig& c, double diameter,
                                     double g_bound);

// Scenario/statistic-map compatibility; throws InputError on a mismatch.
void check_compatibility(const RunConfig& c);

// Feature dimension and norm bound implied by a scenario configuration.
struct FeatureDims {
  Eigen::Index x_dim = 1;
  double x_norm = 1.0;
};
FeatureDims scenario_feature_dims(const ScenarioSpec& s, const StatisticMap& map);

}  // namespace defgen
