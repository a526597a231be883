#include "defgen/config.hpp"

#include <fstream>
#include <set>

namespace defgen {

namespace {

void check_keys(const Json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (allowed.find(key) == allowed.end())
      throw InputError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig parse_run_config(const Json& j) {
  check_keys(j, "config",
             {"version", "scenario", "map", "kernel", "T", "seed", "epsilon",
              "k_cap", "strict", "families", "sweep_T"});
  RunConfig c;
  c.version = get_or<int>(j, "version", 0);
  if (c.version != 1) throw InputError("config version must be 1");

  if (!j.contains("scenario") || !j.contains("map") || !j.contains("kernel"))
    throw InputError("config requires scenario, map, and kernel");

  {
    const Json& s = j.at("scenario");
    check_keys(s, "scenario",
               {"name", "x_dim", "x_norm", "outcome_atoms", "lag",
                "spectral_radius", "noise", "factors", "n_bits", "tree_depth"});
    c.scenario.name = get_or<std::string>(s, "name", "");
    c.scenario.x_dim = get_or<Eigen::Index>(s, "x_dim", 2);
    c.scenario.x_norm = get_or<double>(s, "x_norm", 1.0);
    c.scenario.outcome_atoms = get_or<Eigen::Index>(s, "outcome_atoms", 4);
    c.scenario.lag = get_or<Eigen::Index>(s, "lag", 3);
    c.scenario.spectral_radius = get_or<double>(s, "spectral_radius", 0.9);
    c.scenario.noise = get_or<double>(s, "noise", 0.05);
    c.scenario.factors = get_or<Eigen::Index>(s, "factors", 2);
    c.scenario.n_bits = get_or<Eigen::Index>(s, "n_bits", 6);
    c.scenario.tree_depth = get_or<int>(s, "tree_depth", 2);
    static const std::set<std::string> names = {
        "iid",  "adversarial_flip", "token_markov",
        "lds",  "rain",             "boolean_scores"};
    if (names.find(c.scenario.name) == names.end())
      throw InputError("unknown scenario: '" + c.scenario.name + "'");
  }

  {
    const Json& m = j.at("map");
    check_keys(m, "map",
               {"name", "classes", "degree", "dim", "domain", "lower", "upper"});
    c.map.name = get_or<std::string>(m, "name", "");
    c.map.classes = get_or<Eigen::Index>(m, "classes", 0);
    c.map.degree = get_or<Eigen::Index>(m, "degree", 0);
    c.map.dim = get_or<Eigen::Index>(m, "dim", 0);
    c.map.domain = get_or<std::string>(m, "domain", "box");
    c.map.lower = get_or<double>(m, "lower", 0.0);
    c.map.upper = get_or<double>(m, "upper", 1.0);
    static const std::set<std::string> names = {"one_hot", "power_moments",
                                                "identity", "mean_outer"};
    if (names.find(c.map.name) == names.end())
      throw InputError("unknown statistic map: '" + c.map.name + "'");
  }

  {
    const Json& k = j.at("kernel");
    check_keys(k, "kernel", {"name", "degree", "feature_map"});
    c.kernel.name = get_or<std::string>(k, "name", "");
    c.kernel.degree = get_or<int>(k, "degree", 2);
    c.kernel.feature_map = get_or<std::string>(k, "feature_map", "raw_x");
    static const std::set<std::string> names = {
        "constant", "linear", "affine_pair", "polynomial", "feature_map"};
    if (names.find(c.kernel.name) == names.end())
      throw InputError("unknown kernel: '" + c.kernel.name + "'");
  }

  c.T = get_or<long long>(j, "T", 100);
  if (c.T < 1) throw InputError("T must be >= 1");
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("epsilon")) {
    const Json& e = j.at("epsilon");
    check_keys(e, "epsilon", {"mode", "value"});
    c.epsilon_mode = get_or<std::string>(e, "mode", "default");
    c.epsilon_value = get_or<double>(e, "value", 0.0);
    if (c.epsilon_mode != "default" && c.epsilon_mode != "theorem" &&
        c.epsilon_mode != "value")
      throw InputError("epsilon mode must be default, theorem, or value");
    if (c.epsilon_mode == "value" && !(c.epsilon_value >= 0))
      throw InputError("epsilon value must be nonnegative");
  }
  c.k_cap = get_or<long long>(j, "k_cap", 10000);
  if (c.k_cap < 1) throw InputError("k_cap must be >= 1");
  c.strict = get_or<bool>(j, "strict", false);

  if (j.contains("families")) {
    if (!j.at("families").is_array())
      throw InputError("families must be an array");
    for (const Json& f : j.at("families")) {
      check_keys(f, "family", {"name", "count", "B"});
      FamilySpec fs;
      fs.name = get_or<std::string>(f, "name", "");
      fs.count = get_or<int>(f, "count", 50);
      fs.B = get_or<double>(f, "B", 1.0);
      static const std::set<std::string> names = {
          "unit_rkhs", "linear_multiclass", "meancov_linear", "tree_powers",
          "lds_quadratic"};
      if (names.find(fs.name) == names.end())
        throw InputError("unknown distinguisher family: '" + fs.name + "'");
      c.families.push_back(fs);
    }
  }

  check_compatibility(c);
  c.raw = config_to_json(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InputError(std::string("config parse error: ") + e.what());
  }
  return parse_run_config(j);
}

Json config_to_json(const RunConfig& c) {
  Json j;
  j["version"] = c.version;
  Json s;
  s["name"] = c.scenario.name;
  s["x_dim"] = c.scenario.x_dim;
  s["x_norm"] = c.scenario.x_norm;
  s["outcome_atoms"] = c.scenario.outcome_atoms;
  s["lag"] = c.scenario.lag;
  s["spectral_radius"] = c.scenario.spectral_radius;
  s["noise"] = c.scenario.noise;
  s["factors"] = c.scenario.factors;
  s["n_bits"] = c.scenario.n_bits;
  s["tree_depth"] = c.scenario.tree_depth;
  j["scenario"] = s;
  Json m;
  m["name"] = c.map.name;
  m["classes"] = c.map.classes;
  m["degree"] = c.map.degree;
  m["dim"] = c.map.dim;
  m["domain"] = c.map.domain;
  m["lower"] = c.map.lower;
  m["upper"] = c.map.upper;
  j["map"] = m;
  Json k;
  k["name"] = c.kernel.name;
  k["degree"] = c.kernel.degree;
  k["feature_map"] = c.kernel.feature_map;
  j["kernel"] = k;
  j["T"] = c.T;
  j["seed"] = c.seed;
  Json e;
  e["mode"] = c.epsilon_mode;
  e["value"] = c.epsilon_value;
  j["epsilon"] = e;
  j["k_cap"] = c.k_cap;
  j["strict"] = c.strict;
  Json fams = Json::array();
  for (const auto& f : c.families) {
    Json fj;
    fj["name"] = f.name;
    fj["count"] = f.count;
    fj["B"] = f.B;
    fams.push_back(fj);
  }
  j["families"] = fams;
  return j;
}

StatisticMap build_map(const MapSpec& spec) {
  if (spec.name == "one_hot") {
    if (spec.classes < 2) throw InputError("one_hot map needs classes >= 2");
    return StatisticMap::one_hot(spec.classes);
  }
  if (spec.name == "power_moments") {
    if (spec.degree < 2 || spec.degree % 2 != 0)
      throw InputError("power_moments needs an even degree >= 2");
    return StatisticMap::power_moments(spec.degree);
  }
  if (spec.name == "identity") {
    if (spec.dim < 1) throw InputError("identity map needs dim >= 1");
    if (spec.domain == "ball")
      return StatisticMap::identity(std::make_shared<BallDomain>(spec.dim));
    if (spec.domain == "box")
      return StatisticMap::identity(std::make_shared<BoxDomain>(
          Vec::Constant(spec.dim, spec.lower), Vec::Constant(spec.dim, spec.upper)));
    throw InputError("identity map domain must be box or ball");
  }
  if (spec.name == "mean_outer") {
    if (spec.dim < 1) throw InputError("mean_outer map needs dim >= 1");
    return StatisticMap::mean_outer(spec.dim);
  }
  throw InputError("unknown statistic map: " + spec.name);
}

MatrixKernel build_kernel(const KernelSpec& spec, Eigen::Index x_dim,
                          Eigen::Index z_dim, const InputBounds& bounds) {
  if (spec.name == "feature_map")
    return MatrixKernel::from_feature_map(
        make_feature_map(spec.feature_map, x_dim, z_dim, z_dim), bounds);
  ScalarKernelKind kind;
  if (spec.name == "constant")
    kind = ScalarKernelKind::kConstant;
  else if (spec.name == "linear")
    kind = ScalarKernelKind::kLinear;
  else if (spec.name == "affine_pair")
    kind = ScalarKernelKind::kAffinePair;
  else if (spec.name == "polynomial")
    kind = ScalarKernelKind::kPolynomial;
  else
    throw InputError("unknown kernel: " + spec.name);
  return MatrixKernel::identity_scaled(
      ScalarKernel(kind, x_dim, z_dim, spec.degree), z_dim, bounds);
}

std::optional<double> epsilon_target(const RunConfig& c, double diameter,
                                     double g_bound) {
  if (c.epsilon_mode == "default") return std::nullopt;  // engine default 2D^2G
  if (c.epsilon_mode == "theorem") return diameter * diameter * g_bound;
  return c.epsilon_value;
}

FeatureDims scenario_feature_dims(const ScenarioSpec& s, const StatisticMap& map) {
  FeatureDims d;
  if (s.name == "lds") {
    d.x_dim = map.outcome_dim() * s.lag;
    d.x_norm = std::sqrt(double(s.lag));
  } else if (s.name == "boolean_scores") {
    d.x_dim = s.n_bits;
    d.x_norm = std::sqrt(double(s.n_bits));
  } else {
    d.x_dim = s.x_dim;
    d.x_norm = s.x_norm;
  }
  return d;
}

void check_compatibility(const RunConfig& c) {
  const std::string& s = c.scenario.name;
  const std::string& m = c.map.name;
  auto fail = [&] {
    throw InputError("scenario '" + s + "' is incompatible with map '" + m + "'");
  };
  if (s == "token_markov" && m != "one_hot") fail();
  if (s == "lds" && m != "mean_outer" && m != "identity") fail();
  if (s == "rain" && m != "mean_outer") fail();
  if (s == "boolean_scores" && m != "power_moments" && m != "identity") fail();
  // iid and adversarial_flip accept every map.

  if (c.kernel.name == "polynomial" && c.kernel.degree > 6)
    throw InputError("polynomial kernel degree above 6 is not supported");

  for (const auto& f : c.families) {
    if (f.name == "linear_multiclass" &&
        (m != "one_hot" || c.kernel.name != "affine_pair"))
      throw InputError(
          "linear_multiclass family needs the one_hot map and affine_pair kernel");
    if (f.name == "meancov_linear" &&
        (m != "mean_outer" ||
         (c.kernel.name != "affine_pair" && c.kernel.name != "linear")))
      throw InputError(
          "meancov_linear family needs the mean_outer map and a linear or "
          "affine_pair kernel");
    if (f.name == "tree_powers" &&
        (m != "power_moments" || c.kernel.name != "polynomial"))
      throw InputError(
          "tree_powers family needs the power_moments map and polynomial kernel");
    if (f.name == "lds_quadratic" &&
        (m != "mean_outer" || c.kernel.name != "linear"))
      throw InputError(
          "lds_quadratic family needs the mean_outer map and linear kernel");
  }
}

}  // namespace defgen
