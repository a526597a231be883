#include "defgen/harness.hpp"

#include "defgen/log.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace defgen {

namespace {

Vec ball_point(Eigen::Index dim, double radius, std::mt19937_64& rng) {
  Vec g = gaussian_vector(dim, rng);
  const double n = g.norm();
  if (n == 0.0) return Vec::Zero(dim);
  return g * (radius * std::pow(uniform01(rng), 1.0 / double(dim)) / n);
}

// ---------------------------------------------------------------------------
// Scenarios

class IidScenario final : public NatureScenario {
 public:
  IidScenario(const RunConfig& cfg, const StatisticMap& map, std::uint64_t seed)
      : x_dim_(scenario_feature_dims(cfg.scenario, map).x_dim),
        x_norm_(scenario_feature_dims(cfg.scenario, map).x_norm) {
    std::mt19937_64 rng(seed);
    const Eigen::Index atoms = std::max<Eigen::Index>(1, cfg.scenario.outcome_atoms);
    for (Eigen::Index i = 0; i < atoms; ++i) {
      switch (map.kind()) {
        case StatisticKind::kOneHot: {
          const auto label = static_cast<Eigen::Index>(
              uniform01(rng) * double(map.prediction_domain()->dimension()));
          mu_star_.atoms.push_back(Vec::Constant(1, double(label)));
          break;
        }
        case StatisticKind::kPowerMoments:
          mu_star_.atoms.push_back(Vec::Constant(1, 2.0 * uniform01(rng) - 1.0));
          break;
        case StatisticKind::kIdentity:
          mu_star_.atoms.push_back(map.prediction_domain()->sample(rng));
          break;
        case StatisticKind::kMeanOuter:
          mu_star_.atoms.push_back(ball_point(map.outcome_dim(), 1.0, rng));
          break;
      }
      mu_star_.weights.push_back(-std::log(std::max(uniform01(rng), 0x1.0p-53)));
    }
    double total = 0.0;
    for (double w : mu_star_.weights) total += w;
    for (double& w : mu_star_.weights) w /= total;
  }

  std::string name() const override { return "iid"; }
  Vec next_features(std::mt19937_64& rng) override {
    return ball_point(x_dim_, x_norm_, rng);
  }
  Vec reveal_outcome(const AtomicDistribution&, std::mt19937_64& rng) override {
    return mu_star_.atoms[sample_index(mu_star_.weights, rng)];
  }

 private:
  Eigen::Index x_dim_;
  double x_norm_;
  AtomicMeasure mu_star_;
};

// Picks the target after seeing D_t to maximize one fixed h's round term
// E_{p~D}[h(x,p).(z - p)], which is linear in z.
class AdversarialFlipScenario final : public NatureScenario {
 public:
  AdversarialFlipScenario(const RunConfig& cfg, const StatisticMap& map,
                          const MatrixKernel& kernel)
      : map_(map),
        kernel_(kernel),
        domain_(map.prediction_domain()),
        x_dim_(scenario_feature_dims(cfg.scenario, map).x_dim),
        x_norm_(scenario_feature_dims(cfg.scenario, map).x_norm) {
    Vec theta = Vec::Ones(kernel_.feature_dim());
    h_ = RkhsFunction::feature_form(theta / theta.norm());
    x_ = Vec::Zero(x_dim_);
    x_[0] = x_norm_;
  }

  std::string name() const override { return "adversarial_flip"; }
  Vec next_features(std::mt19937_64&) override { return x_; }
  Vec reveal_outcome(const AtomicDistribution& dist, std::mt19937_64&) override {
    Vec c = Vec::Zero(domain_->dimension());
    for (std::size_t k = 0; k < dist.atoms.size(); ++k)
      c += dist.weights[k] * h_.eval(kernel_, x_, dist.atoms[k]);
    Vec z_star = domain_->linear_max(c).point;
    return map_.outcome_from_extreme(z_star);
  }

  const RkhsFunction& adversary() const { return h_; }

 private:
  StatisticMap map_;
  MatrixKernel kernel_;
  std::shared_ptr<const ConvexDomain> domain_;
  Eigen::Index x_dim_;
  double x_norm_;
  RkhsFunction h_ = RkhsFunction::feature_form(Vec::Ones(1));
  Vec x_;
};

class TokenMarkovScenario final : public NatureScenario {
 public:
  TokenMarkovScenario(const RunConfig& cfg, const StatisticMap& map,
                      std::uint64_t seed)
      : classes_(map.prediction_domain()->dimension()),
        x_dim_(cfg.scenario.x_dim),
        x_norm_(cfg.scenario.x_norm) {
    std::mt19937_64 rng(seed);
    transition_.resize(classes_, std::vector<double>(classes_));
    for (Eigen::Index i = 0; i < classes_; ++i) {
      double total = 0.0;
      for (Eigen::Index j = 0; j < classes_; ++j) {
        transition_[i][j] = -std::log(std::max(uniform01(rng), 0x1.0p-53));
        total += transition_[i][j];
      }
      for (Eigen::Index j = 0; j < classes_; ++j) transition_[i][j] /= total;
    }
    // Frozen random embedding of the previous token.
    embedding_ = Mat(x_dim_, classes_);
    for (Eigen::Index j = 0; j < classes_; ++j) {
      Vec col = gaussian_vector(x_dim_, rng);
      embedding_.col(j) = col * (x_norm_ / std::max(col.norm(), 1e-12));
    }
  }

  std::string name() const override { return "token_markov"; }
  Vec next_features(std::mt19937_64&) override { return embedding_.col(state_); }
  Vec reveal_outcome(const AtomicDistribution&, std::mt19937_64& rng) override {
    state_ = static_cast<Eigen::Index>(
        sample_index(transition_[static_cast<std::size_t>(state_)], rng));
    return Vec::Constant(1, double(state_));
  }

 private:
  Eigen::Index classes_;
  Eigen::Index x_dim_;
  double x_norm_;
  std::vector<std::vector<double>> transition_;
  Mat embedding_;
  Eigen::Index state_ = 0;
};

// y_t = C z_t + nu_t with z_{t+1} = A z_t + zeta_t, A strictly stable and
// both noise terms bounded; observations are rescaled so ||y|| <= 1 by
// construction.  Features are the lag window (y_{t-1}, ..., y_{t-l}).
class LdsScenario final : public NatureScenario {
 public:
  LdsScenario(const RunConfig& cfg, const StatisticMap& map, std::uint64_t seed)
      : d_(map.outcome_dim()), lag_(cfg.scenario.lag), noise_(cfg.scenario.noise) {
    std::mt19937_64 rng(seed);
    const double rho = std::min(cfg.scenario.spectral_radius, 0.99);
    // Symmetric A with spectrum inside [-rho, rho]; operator norm equals the
    // spectral radius, which keeps the state bound elementary.
    Mat G(d_, d_);
    for (Eigen::Index i = 0; i < d_; ++i) G.col(i) = gaussian_vector(d_, rng);
    Eigen::HouseholderQR<Mat> qr(G);
    Mat U = qr.householderQ();
    Vec eig(d_);
    for (Eigen::Index i = 0; i < d_; ++i) eig[i] = rho * (2.0 * uniform01(rng) - 1.0);
    A_ = U * eig.asDiagonal() * U.transpose();

    Mat C(d_, d_);
    for (Eigen::Index i = 0; i < d_; ++i) C.col(i) = gaussian_vector(d_, rng);
    Eigen::JacobiSVD<Mat> svd(C);
    C_ = C / svd.singularValues()[0];  // ||C||_op = 1

    const double state_bound = noise_ / (1.0 - rho);
    scale_ = 1.0 / (state_bound + noise_ + 1e-12);
    state_ = Vec::Zero(d_);
    window_.assign(static_cast<std::size_t>(lag_), Vec::Zero(d_));
  }

  std::string name() const override { return "lds"; }
  Vec next_features(std::mt19937_64&) override {
    Vec x(d_ * lag_);
    for (Eigen::Index k = 0; k < lag_; ++k)
      x.segment(k * d_, d_) = window_[static_cast<std::size_t>(k)];
    return x;
  }
  Vec reveal_outcome(const AtomicDistribution&, std::mt19937_64& rng) override {
    state_ = A_ * state_ + ball_point(d_, noise_, rng);
    Vec y = scale_ * (C_ * state_ + ball_point(d_, noise_, rng));
    const double n = y.norm();
    if (n > 1.0) y /= n;  // cannot trigger under the configured scale
    window_.pop_back();
    window_.insert(window_.begin(), y);
    return y;
  }

 private:
  Eigen::Index d_;
  Eigen::Index lag_;
  double noise_;
  Mat A_, C_;
  double scale_ = 1.0;
  Vec state_;
  std::vector<Vec> window_;
};

// Correlated bounded vectors from a seeded factor model, projected to the
// unit ball; features share the factor draw.
class RainScenario final : public NatureScenario {
 public:
  RainScenario(const RunConfig& cfg, const StatisticMap& map, std::uint64_t seed)
      : d_(map.outcome_dim()),
        factors_(std::max<Eigen::Index>(1, cfg.scenario.factors)),
        x_dim_(cfg.scenario.x_dim),
        x_norm_(cfg.scenario.x_norm),
        noise_(cfg.scenario.noise) {
    std::mt19937_64 rng(seed);
    auto normalized = [&](Eigen::Index rows, Eigen::Index cols, double op) {
      Mat M(rows, cols);
      for (Eigen::Index j = 0; j < cols; ++j) M.col(j) = gaussian_vector(rows, rng);
      Eigen::JacobiSVD<Mat> svd(M);
      return Mat(M * (op / std::max(svd.singularValues()[0], 1e-12)));
    };
    loadings_ = normalized(d_, factors_, 0.6);
    feature_mix_ = normalized(x_dim_, factors_, 1.0);
  }

  std::string name() const override { return "rain"; }
  Vec next_features(std::mt19937_64& rng) override {
    factor_ = gaussian_vector(factors_, rng);
    Vec x = feature_mix_ * factor_ + noise_ * gaussian_vector(x_dim_, rng);
    const double n = x.norm();
    return x * (x_norm_ / std::max(n, x_norm_));
  }
  Vec reveal_outcome(const AtomicDistribution&, std::mt19937_64& rng) override {
    Vec y = loadings_ * factor_ + noise_ * ball_point(d_, 1.0, rng);
    const double n = y.norm();
    if (n > 1.0) y /= n;
    return y;
  }

 private:
  Eigen::Index d_;
  Eigen::Index factors_;
  Eigen::Index x_dim_;
  double x_norm_;
  double noise_;
  Mat loadings_;
  Mat feature_mix_;
  Vec factor_;
};

// Boolean features, scalar scores in [0,1] from a planted depth-r tree.
class BooleanScoresScenario final : public NatureScenario {
 public:
  BooleanScoresScenario(const RunConfig& cfg, std::uint64_t seed)
      : n_(cfg.scenario.n_bits), noise_(cfg.scenario.noise) {
    std::mt19937_64 rng(seed);
    planted_ = DecisionTree::random(static_cast<int>(n_), cfg.scenario.tree_depth,
                                    false, rng);
  }

  std::string name() const override { return "boolean_scores"; }
  Vec next_features(std::mt19937_64& rng) override {
    x_ = Vec(n_);
    for (Eigen::Index i = 0; i < n_; ++i) x_[i] = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    return x_;
  }
  Vec reveal_outcome(const AtomicDistribution&, std::mt19937_64& rng) override {
    const double base = planted_.eval(x_);
    const double y = std::clamp(base + noise_ * (2.0 * uniform01(rng) - 1.0), 0.0, 1.0);
    return Vec::Constant(1, y);
  }

 private:
  Eigen::Index n_;
  double noise_;
  DecisionTree planted_;
  Vec x_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Decision trees

double DecisionTree::eval(const Vec& x) const {
  int i = root;
  while (true) {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    if (n.coord < 0) return n.value;
    i = x[n.coord] > 0 ? n.hi : n.lo;
  }
}

std::vector<std::pair<std::vector<int>, double>> DecisionTree::multilinear() const {
  std::map<std::vector<int>, double> acc;
  // Walk root-to-leaf paths; each leaf contributes value * prod (1+s x_i)/2.
  struct Frame {
    int node;
    std::vector<std::pair<int, double>> path;  // (coord, sign)
  };
  std::vector<Frame> stack{{root, {}}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const Node& n = nodes[static_cast<std::size_t>(f.node)];
    if (n.coord < 0) {
      const std::size_t k = f.path.size();
      const double base = n.value / double(1ull << k);
      // Expand over subsets of the path.
      for (std::size_t mask = 0; mask < (1ull << k); ++mask) {
        std::vector<int> subset;
        double coef = base;
        for (std::size_t b = 0; b < k; ++b) {
          if (mask & (1ull << b)) {
            subset.push_back(f.path[b].first);
            coef *= f.path[b].second;
          }
        }
        std::sort(subset.begin(), subset.end());
        acc[subset] += coef;
      }
      continue;
    }
    Frame lo = f, hi = f;
    lo.node = n.lo;
    lo.path.emplace_back(n.coord, -1.0);
    hi.node = n.hi;
    hi.path.emplace_back(n.coord, 1.0);
    stack.push_back(lo);
    stack.push_back(hi);
  }
  std::vector<std::pair<std::vector<int>, double>> out;
  for (auto& [k, v] : acc)
    if (std::abs(v) > 0) out.emplace_back(k, v);
  return out;
}

DecisionTree DecisionTree::random(int n_bits, int depth, bool boolean_leaves,
                                  std::mt19937_64& rng) {
  DecisionTree t;
  // Full tree of the requested depth with distinct coordinates per path.
  struct Builder {
    DecisionTree& t;
    int n_bits;
    bool boolean_leaves;
    std::mt19937_64& rng;
    int build(int remaining, std::vector<int>& used) {
      Node n;
      if (remaining == 0) {
        n.coord = -1;
        n.value = boolean_leaves
                      ? (uniform01(rng) < 0.5 ? 0.0 : 1.0)
                      : 0.15 + 0.7 * uniform01(rng);
        t.nodes.push_back(n);
        return static_cast<int>(t.nodes.size()) - 1;
      }
      int coord;
      do {
        coord = static_cast<int>(uniform01(rng) * n_bits);
        coord = std::min(coord, n_bits - 1);
      } while (std::find(used.begin(), used.end(), coord) != used.end());
      used.push_back(coord);
      const int lo = build(remaining - 1, used);
      const int hi = build(remaining - 1, used);
      used.pop_back();
      n.coord = coord;
      n.lo = lo;
      n.hi = hi;
      t.nodes.push_back(n);
      return static_cast<int>(t.nodes.size()) - 1;
    }
  };
  std::vector<int> used;
  Builder b{t, n_bits, boolean_leaves, rng};
  t.root = b.build(std::min(depth, n_bits), used);
  return t;
}

double poly_rkhs_norm(
    const std::vector<std::pair<std::vector<int>, double>>& coeffs,
    const ScalarKernel& kernel) {
  if (kernel.kind() != ScalarKernelKind::kPolynomial)
    throw InputError("poly_rkhs_norm needs a polynomial kernel");
  // W_S aggregates the squared feature scales of every exponent vector with
  // odd pattern S; the minimum-norm representer splits mass accordingly.
  std::map<std::vector<int>, double> wS;
  const auto& exps = kernel.poly_exponents();
  const auto& scales = kernel.poly_scales();
  for (std::size_t i = 0; i < exps.size(); ++i) {
    std::vector<int> s;
    for (std::size_t j = 0; j < exps[i].size(); ++j)
      if (exps[i][j] % 2 == 1) s.push_back(static_cast<int>(j));
    wS[s] += scales[i] * scales[i];
  }
  double norm_sq = 0.0;
  for (const auto& [subset, c] : coeffs) {
    auto it = wS.find(subset);
    if (it == wS.end() || it->second <= 0.0)
      throw InputError("function is outside the polynomial kernel span");
    norm_sq += c * c / it->second;
  }
  return std::sqrt(norm_sq);
}

// ---------------------------------------------------------------------------

std::unique_ptr<NatureScenario> build_scenario(const RunConfig& config,
                                               const StatisticMap& map,
                                               const MatrixKernel& kernel) {
  const std::uint64_t seed = config.seed * 0x9E3779B97F4A7C15ull + 0x51ull;
  const std::string& n = config.scenario.name;
  if (n == "iid") return std::make_unique<IidScenario>(config, map, seed);
  if (n == "adversarial_flip")
    return std::make_unique<AdversarialFlipScenario>(config, map, kernel);
  if (n == "token_markov")
    return std::make_unique<TokenMarkovScenario>(config, map, seed);
  if (n == "lds") return std::make_unique<LdsScenario>(config, map, seed);
  if (n == "rain") return std::make_unique<RainScenario>(config, map, seed);
  if (n == "boolean_scores")
    return std::make_unique<BooleanScoresScenario>(config, seed);
  throw InputError("unknown scenario: " + n);
}

// ---------------------------------------------------------------------------
// Families

namespace {

double bound_prop31(const RunStats& s, double coef) {
  return coef * std::sqrt(s.T * s.diameter * s.diameter * s.g_bound + s.sum_epsilon);
}
double bound_linear_multiclass(const RunStats& s, double coef) {
  return 4.0 * coef * std::sqrt(s.T);  // coef = d * B
}
double bound_meancov(const RunStats& s, double coef) {
  return 4.0 * coef * std::sqrt(s.T * s.g_bound);
}
double bound_scalar_realized(const RunStats& s, double coef) {
  return coef * std::sqrt(s.kernel_residual_sum +
                          s.g_bound * s.diameter * s.diameter * s.T);
}
double bound_lds(const RunStats& s, double coef) {
  return coef * std::sqrt(4.0 * s.T * s.lag);
}

BuiltFamily make_unit_rkhs(const MatrixKernel& kernel, int count,
                           std::uint64_t seed) {
  BuiltFamily fam;
  fam.name = "unit_rkhs";
  fam.bound_label = "|h| sqrt(T D^2 G + sum eps)";
  fam.bound = &bound_prop31;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    Vec theta = gaussian_vector(kernel.feature_dim(), rng);
    theta /= theta.norm();
    FamilyMember m;
    m.f.h = RkhsFunction::feature_form(theta);
    m.f.norm_h = 1.0;
    m.f.label = "unit_rkhs[" + std::to_string(i) + "]";
    m.bound_coef = 1.0;
    fam.members.push_back(std::move(m));
  }
  return fam;
}

// Example-style linear tests per class: f(x,p,j) = <x,theta_j> + <p,theta'_j>
// with |theta_j| + |theta'_j| <= B.
BuiltFamily make_linear_multiclass(const MatrixKernel& kernel, Eigen::Index x_dim,
                                   Eigen::Index classes, int count, double B,
                                   std::uint64_t seed) {
  BuiltFamily fam;
  fam.name = "linear_multiclass";
  fam.bound_label = "4 d B sqrt(T)";
  fam.bound = &bound_linear_multiclass;
  std::mt19937_64 rng(seed);
  const Eigen::Index s_dim = x_dim + classes;  // affine_pair scalar features
  auto add = [&](const Mat& W, const std::string& label) {
    FamilyMember m;
    Vec theta(s_dim * classes);
    for (Eigen::Index i = 0; i < s_dim; ++i)
      for (Eigen::Index j = 0; j < classes; ++j) theta[i * classes + j] = W(i, j);
    m.f.h = RkhsFunction::feature_form(theta);
    m.f.norm_h = W.norm();
    m.f.label = label;
    m.bound_coef = double(classes) * B;
    fam.members.push_back(std::move(m));
  };
  // Axis tests: one class at a time, features-only direction.
  for (Eigen::Index j = 0; j < classes; ++j) {
    Mat W = Mat::Zero(s_dim, classes);
    W(0, j) = B;
    add(W, "axis_x[" + std::to_string(j) + "]");
  }
  for (int i = 0; i < count; ++i) {
    Mat W = Mat::Zero(s_dim, classes);
    for (Eigen::Index j = 0; j < classes; ++j) {
      Vec tx = gaussian_vector(x_dim, rng);
      Vec tp = gaussian_vector(classes, rng);
      const double split = uniform01(rng);
      if (tx.norm() > 0) tx *= split * B / tx.norm();
      if (tp.norm() > 0) tp *= (1.0 - split) * B / tp.norm();
      W.col(j).head(x_dim) = tx;
      W.col(j).tail(classes) = tp;
    }
    add(W, "random[" + std::to_string(i) + "]");
  }
  return fam;
}

// Mean and covariance tests against linear functions of the features, plus
// the self-consistency test against the predicted means.
BuiltFamily make_meancov_linear(const MatrixKernel& kernel, Eigen::Index x_dim,
                                Eigen::Index outcome_dim, int count, double B,
                                std::uint64_t seed) {
  BuiltFamily fam;
  fam.name = "meancov_linear";
  fam.bound_label = "4 |h| sqrt(T G)";
  fam.bound = &bound_meancov;
  std::mt19937_64 rng(seed);
  const Eigen::Index m_dim = MeanCovDomain::ambient_dim(outcome_dim);
  const bool with_p = kernel.is_identity_scaled() &&
                      kernel.scalar().kind() == ScalarKernelKind::kAffinePair;
  const Eigen::Index s_dim = with_p ? x_dim + m_dim : x_dim;

  auto add = [&](Eigen::Index feature_row_base, const Vec& dir,
                 Eigen::Index stat_coord, double norm, const std::string& label) {
    Vec theta = Vec::Zero(s_dim * m_dim);
    for (Eigen::Index i = 0; i < dir.size(); ++i)
      theta[(feature_row_base + i) * m_dim + stat_coord] = dir[i];
    FamilyMember m;
    m.f.h = RkhsFunction::feature_form(theta);
    m.f.norm_h = norm;
    m.f.label = label;
    m.bound_coef = norm;
    fam.members.push_back(std::move(m));
  };

  auto random_dir = [&](Eigen::Index n) {
    Vec v = gaussian_vector(n, rng);
    return Vec(v * (B / std::max(v.norm(), 1e-300)));
  };

  // f_theta: y_i against theta^T x, every coordinate plus random directions.
  for (Eigen::Index i = 0; i < outcome_dim; ++i)
    add(0, random_dir(x_dim), i, B, "mean[" + std::to_string(i) + "]");
  // f_beta: y_i y_j against beta^T x over all pairs.
  for (Eigen::Index i = 0; i < outcome_dim; ++i)
    for (Eigen::Index j = i; j < outcome_dim; ++j)
      add(0, random_dir(x_dim), MeanCovDomain::q_index(i, j, outcome_dim) , B,
          "cov[" + std::to_string(i) + "," + std::to_string(j) + "]");
  // f_w: y_i against w^T E[y], available when the kernel sees p.
  if (with_p)
    for (Eigen::Index i = 0; i < outcome_dim; ++i) {
      Vec w = random_dir(outcome_dim);
      Vec dir = Vec::Zero(m_dim);
      dir.head(outcome_dim) = w;
      add(x_dim, dir, i, B, "selfconsistent[" + std::to_string(i) + "]");
    }
  for (int r = 0; r < count; ++r) {
    const auto coord = static_cast<Eigen::Index>(uniform01(rng) * double(m_dim));
    add(0, random_dir(x_dim), std::min(coord, m_dim - 1), B,
        "random[" + std::to_string(r) + "]");
  }
  return fam;
}

// Decision-tree subpopulations crossed with outcome powers (polynomial
// kernel): f(x,p,y) = 1{c(x)=1} y^j.
BuiltFamily make_tree_powers(const MatrixKernel& kernel, Eigen::Index n_bits,
                             int tree_count, std::uint64_t seed) {
  BuiltFamily fam;
  fam.name = "tree_powers";
  fam.bound_label = "|h| sqrt(sum E|Phi(z-p)|^2 + G D^2 T)";
  fam.bound = &bound_scalar_realized;
  const ScalarKernel& sk = kernel.scalar();
  const Eigen::Index m_dim = kernel.out_dim();  // 2d+1 statistic coordinates
  std::mt19937_64 rng(seed);
  for (int tix = 0; tix < tree_count; ++tix) {
    DecisionTree tree = DecisionTree::random(static_cast<int>(n_bits),
                                             std::min(sk.degree(), 3), true, rng);
    auto coeffs = tree.multilinear();
    if (coeffs.empty()) continue;  // the all-zeros tree tests nothing
    const double cnorm = poly_rkhs_norm(coeffs, sk);

    // Scalar-feature weights of the minimum-norm representer of c(x).
    std::map<std::vector<int>, double> wS, cS;
    const auto& exps = sk.poly_exponents();
    const auto& scales = sk.poly_scales();
    for (std::size_t i = 0; i < exps.size(); ++i) {
      std::vector<int> s;
      for (std::size_t j = 0; j < exps[i].size(); ++j)
        if (exps[i][j] % 2 == 1) s.push_back(static_cast<int>(j));
      wS[s] += scales[i] * scales[i];
    }
    for (const auto& [s, c] : coeffs) cS[s] = c;
    Vec theta_scalar = Vec::Zero(sk.feature_dim());
    for (std::size_t i = 0; i < exps.size(); ++i) {
      std::vector<int> s;
      for (std::size_t j = 0; j < exps[i].size(); ++j)
        if (exps[i][j] % 2 == 1) s.push_back(static_cast<int>(j));
      auto it = cS.find(s);
      if (it != cS.end()) theta_scalar[static_cast<Eigen::Index>(i)] =
          it->second * scales[i] / wS[s];
    }

    for (Eigen::Index j = 1; j < m_dim; ++j) {
      Vec theta = Vec::Zero(sk.feature_dim() * m_dim);
      for (Eigen::Index i = 0; i < sk.feature_dim(); ++i)
        theta[i * m_dim + j] = theta_scalar[i];
      FamilyMember m;
      m.f.h = RkhsFunction::feature_form(theta);
      m.f.norm_h = cnorm;
      m.f.label = "tree[" + std::to_string(tix) + "]*y^" + std::to_string(j);
      m.bound_coef = cnorm;
      fam.members.push_back(std::move(m));
    }
  }
  return fam;
}

// Linear-kernel tests of the lag window against means and second moments
// simultaneously: f = sum_i x.alpha_i y_i + sum_{i<=j} x.beta_ij y_i y_j.
BuiltFamily make_lds_quadratic(const MatrixKernel& kernel, Eigen::Index x_dim,
                               Eigen::Index outcome_dim, int count, double B,
                               std::uint64_t seed) {
  BuiltFamily fam;
  fam.name = "lds_quadratic";
  fam.bound_label = "(sum|a|+sum|b|) sqrt(4 T l)";
  fam.bound = &bound_lds;
  std::mt19937_64 rng(seed);
  const Eigen::Index m_dim = MeanCovDomain::ambient_dim(outcome_dim);
  for (int r = 0; r < count; ++r) {
    Mat W = Mat::Zero(x_dim, m_dim);
    double coefsum = 0.0;
    for (Eigen::Index c = 0; c < m_dim; ++c) {
      if (r > 0 && uniform01(rng) < 0.5) continue;  // sparse combinations
      Vec dir = gaussian_vector(x_dim, rng);
      dir *= B / std::max(dir.norm(), 1e-300);
      W.col(c) = dir;
      coefsum += dir.norm();
    }
    if (coefsum == 0.0) continue;
    Vec theta(x_dim * m_dim);
    for (Eigen::Index i = 0; i < x_dim; ++i)
      for (Eigen::Index j = 0; j < m_dim; ++j) theta[i * m_dim + j] = W(i, j);
    FamilyMember m;
    m.f.h = RkhsFunction::feature_form(theta);
    m.f.norm_h = W.norm();
    m.f.label = "window[" + std::to_string(r) + "]";
    m.bound_coef = coefsum;
    fam.members.push_back(std::move(m));
  }
  return fam;
}

std::vector<FamilySpec> default_family_specs(const RunConfig& c) {
  std::vector<FamilySpec> specs;
  specs.push_back({"unit_rkhs", 50, 1.0});
  if (c.map.name == "one_hot" && c.kernel.name == "affine_pair")
    specs.push_back({"linear_multiclass", 8, 1.0});
  if (c.map.name == "mean_outer" &&
      (c.kernel.name == "linear" || c.kernel.name == "affine_pair"))
    specs.push_back({"meancov_linear", 8, 1.0});
  if (c.map.name == "mean_outer" && c.kernel.name == "linear" &&
      c.scenario.name == "lds")
    specs.push_back({"lds_quadratic", 8, 1.0});
  if (c.map.name == "power_moments" && c.kernel.name == "polynomial")
    specs.push_back({"tree_powers", 5, 1.0});
  return specs;
}

}  // namespace

std::vector<BuiltFamily> build_families(const RunConfig& config,
                                        const StatisticMap& map,
                                        const MatrixKernel& kernel,
                                        Eigen::Index x_dim) {
  const std::vector<FamilySpec> specs =
      config.families.empty() ? default_family_specs(config) : config.families;
  std::vector<BuiltFamily> out;
  for (const auto& spec : specs) {
    const std::uint64_t seed = config.seed ^ 0xD1B54A32D192ED03ull;
    if (spec.name == "unit_rkhs")
      out.push_back(make_unit_rkhs(kernel, spec.count, seed));
    else if (spec.name == "linear_multiclass")
      out.push_back(make_linear_multiclass(kernel, x_dim, map.statistic_dim(),
                                           spec.count, spec.B, seed));
    else if (spec.name == "meancov_linear")
      out.push_back(make_meancov_linear(kernel, x_dim, map.outcome_dim(),
                                        spec.count, spec.B, seed));
    else if (spec.name == "tree_powers")
      out.push_back(make_tree_powers(kernel, x_dim, spec.count, seed));
    else if (spec.name == "lds_quadratic")
      out.push_back(make_lds_quadratic(kernel, x_dim, map.outcome_dim(),
                                       spec.count, spec.B, seed));
    else
      throw InputError("unknown distinguisher family: " + spec.name);
  }
  return out;
}

// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const RunConfig& config) {
  StatisticMap map = build_map(config.map);
  auto domain = map.prediction_domain();
  const FeatureDims dims = scenario_feature_dims(config.scenario, map);
  MatrixKernel kernel = build_kernel(config.kernel, dims.x_dim,
                                     domain->dimension(),
                                     InputBounds{dims.x_norm, domain->norm_bound()});

  EngineConfig ecfg;
  ecfg.epsilon_target =
      epsilon_target(config, domain->diameter(), kernel.g_bound());
  ecfg.k_cap = config.k_cap;
  ecfg.strict_epsilon = config.strict;
  ecfg.seed = config.seed;

  GenerationEngine gen(map, kernel, ecfg);
  auto scenario = build_scenario(config, map, kernel);
  std::mt19937_64 nature_rng(config.seed * 0x2545F4914F6CDD1Dull + 0x9Eull);

  const auto start = std::chrono::steady_clock::now();
  for (long long t = 0; t < config.T; ++t) {
    Vec x = scenario->next_features(nature_rng);
    gen.round(x);
    Vec y = scenario->reveal_outcome(gen.calibrator().pending().dist, nature_rng);
    gen.reveal_outcome(y);
  }
  const auto stop = std::chrono::steady_clock::now();

  ExperimentResult result;
  result.seconds_per_round =
      std::chrono::duration<double>(stop - start).count() / double(config.T);
  result.transcript = build_transcript(gen, config.raw);

  const CalibrationEngine& cal = gen.calibrator();
  result.prediction_dim = domain->dimension();
  result.stats.T = double(cal.completed_rounds());
  result.stats.diameter = cal.diameter();
  result.stats.g_bound = cal.g_bound();
  result.stats.sum_epsilon = cal.sum_epsilon();
  result.stats.kernel_residual_sum = cal.kernel_residual_sum();
  result.stats.lag = double(config.scenario.lag);
  result.potential = cal.potential();
  result.potential_bound = cal.theoretical_bound(1.0);
  result.max_residual = cal.max_residual();

  TranscriptAnalyzer analyzer(result.transcript);
  const auto families = build_families(config, map, kernel, dims.x_dim);
  for (const auto& fam : families) {
    FamilyReport rep;
    rep.family = fam.name;
    rep.bound_label = fam.bound_label;
    double worst_ratio = -1.0;
    for (const auto& member : fam.members) {
      const OigapValue v = analyzer.oigap(member.f);
      const double bound = fam.bound(result.stats, member.bound_coef);
      const double ratio = bound > 0 ? v.value / bound
                                     : (v.value > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (v.value > bound + 1e-9) ++rep.violations;
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        rep.max_oigap = v.value;
        rep.bound = bound;
        rep.ratio = ratio;
        rep.worst_label = member.f.label;
      }
    }
    result.families.push_back(std::move(rep));
  }
  return result;
}

double fit_rate(const std::vector<std::pair<double, double>>& t_and_error) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& [t, err] : t_and_error) {
    if (!(err > 0.0)) continue;  // excluded point
    const double lx = std::log(t), ly = std::log(err);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 3) throw InputError("fit_rate needs at least 3 positive errors");
  const double denom = double(n) * sxx - sx * sx;
  if (denom == 0.0) throw InputError("fit_rate needs distinct T values");
  return (double(n) * sxy - sx * sy) / denom;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string report_csv(const ExperimentResult& result, const RunConfig& config) {
  std::ostringstream os;
  os << "scenario,T,d,kernel,family,max_oigap,bound,ratio,max_residual,"
        "seconds_per_round\n";
  for (const auto& f : result.families) {
    os << config.scenario.name << "," << config.T << "," << result.prediction_dim
       << "," << config.kernel.name << "," << f.family << "," << fmt(f.max_oigap)
       << "," << fmt(f.bound) << "," << fmt(f.ratio) << ","
       << fmt(result.max_residual) << "," << fmt(result.seconds_per_round)
       << "\n";
  }
  return os.str();
}

}  // namespace defgen
