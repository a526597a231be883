#include "defgen/transcript.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace defgen {

namespace {

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const Json& a, const char* what) {
  if (!a.is_array()) throw TranscriptError(std::string(what) + ": expected array");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw TranscriptError(std::string(what) + ": expected number");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

Json vecs_to_json(const std::vector<Vec>& vs) {
  Json a = Json::array();
  for (const auto& v : vs) a.push_back(vec_to_json(v));
  return a;
}

std::vector<Vec> vecs_from_json(const Json& a, const char* what) {
  if (!a.is_array()) throw TranscriptError(std::string(what) + ": expected array");
  std::vector<Vec> out;
  out.reserve(a.size());
  for (const auto& e : a) out.push_back(vec_from_json(e, what));
  return out;
}

std::vector<double> doubles_from_json(const Json& a, const char* what) {
  Vec v = vec_from_json(a, what);
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Transcript build_transcript(const GenerationEngine& engine, const Json& config) {
  const CalibrationEngine& cal = engine.calibrator();
  Transcript t;
  t.header["schema"] = "defgen-transcript/1";
  t.header["config"] = config;
  t.header["T"] = cal.completed_rounds();
  t.header["D"] = cal.diameter();
  t.header["G"] = cal.g_bound();
  t.header["g_certification"] = cal.kernel().g_certification();
  t.header["kernel"] = cal.kernel().name();
  t.header["domain"] = cal.domain().name();
  t.header["map"] = engine.map().name();

  const auto& mus = engine.measures();
  const auto& ys = engine.outcomes();
  for (int i = 0; i < cal.completed_rounds(); ++i) {
    const RoundRecord& rec = cal.history()[static_cast<std::size_t>(i)];
    TranscriptRound r;
    r.t = rec.t;
    r.x = rec.x;
    r.atoms = rec.dist.atoms;
    r.weights = rec.dist.weights;
    r.p = rec.p_sampled;
    r.z = rec.z;
    r.eps = rec.epsilon_used;
    r.res = rec.certified_residual;
    r.mu_atoms = mus[static_cast<std::size_t>(i)].atoms;
    r.mu_weights = mus[static_cast<std::size_t>(i)].weights;
    r.y = ys[static_cast<std::size_t>(i)];
    t.rounds.push_back(std::move(r));
  }
  return t;
}

void write_transcript(std::ostream& out, const Transcript& t) {
  out << t.header.dump() << "\n";
  for (const auto& r : t.rounds) {
    Json j;
    j["t"] = r.t;
    j["x"] = vec_to_json(r.x);
    j["atoms"] = vecs_to_json(r.atoms);
    j["weights"] = vec_to_json(
        Eigen::Map<const Vec>(r.weights.data(), static_cast<Eigen::Index>(r.weights.size())));
    j["p"] = vec_to_json(r.p);
    j["z"] = vec_to_json(r.z);
    j["eps"] = r.eps;
    j["res"] = r.res;
    if (!r.mu_atoms.empty()) {
      j["mu_atoms"] = vecs_to_json(r.mu_atoms);
      j["mu_weights"] = vec_to_json(Eigen::Map<const Vec>(
          r.mu_weights.data(), static_cast<Eigen::Index>(r.mu_weights.size())));
      j["y"] = vec_to_json(r.y);
    }
    out << j.dump() << "\n";
  }
}

std::string transcript_to_string(const Transcript& t) {
  std::ostringstream os;
  write_transcript(os, t);
  return os.str();
}

Transcript read_transcript(std::istream& in) {
  Transcript t;
  std::string line;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw TranscriptError("line " + std::to_string(lineno) +
                            ": parse error: " + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("schema") ||
          j["schema"] != "defgen-transcript/1")
        throw TranscriptError("missing or unsupported transcript schema");
      t.header = j;
      have_header = true;
      continue;
    }
    TranscriptRound r;
    if (!j.contains("t") || !j["t"].is_number_integer())
      throw TranscriptError("line " + std::to_string(lineno) + ": missing round index");
    r.t = j["t"].get<int>();
    r.x = vec_from_json(j.at("x"), "x");
    r.atoms = vecs_from_json(j.at("atoms"), "atoms");
    r.weights = doubles_from_json(j.at("weights"), "weights");
    r.p = vec_from_json(j.at("p"), "p");
    r.z = vec_from_json(j.at("z"), "z");
    r.eps = j.at("eps").get<double>();
    r.res = j.at("res").get<double>();
    if (j.contains("mu_atoms")) {
      r.mu_atoms = vecs_from_json(j.at("mu_atoms"), "mu_atoms");
      r.mu_weights = doubles_from_json(j.at("mu_weights"), "mu_weights");
      r.y = vec_from_json(j.at("y"), "y");
    }
    t.rounds.push_back(std::move(r));
  }
  if (!have_header) throw TranscriptError("empty transcript file");
  return t;
}

Transcript read_transcript_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TranscriptError("cannot open transcript: " + path);
  return read_transcript(in);
}

RunConfig config_from_header(const Json& header) {
  if (!header.contains("config"))
    throw TranscriptError("transcript header carries no config echo");
  return parse_run_config(header.at("config"));
}

MatrixKernel kernel_from_config(const RunConfig& c, const StatisticMap& map) {
  auto domain = map.prediction_domain();
  FeatureDims dims = scenario_feature_dims(c.scenario, map);
  return build_kernel(c.kernel, dims.x_dim, domain->dimension(),
                      InputBounds{dims.x_norm, domain->norm_bound()});
}

// ---------------------------------------------------------------------------

TranscriptAnalyzer::TranscriptAnalyzer(const Transcript& t)
    : transcript_(&t),
      config_(config_from_header(t.header)),
      map_(build_map(config_.map)),
      kernel_(kernel_from_config(config_, map_)),
      domain_(map_.prediction_domain()) {
  m_cal_ = Vec::Zero(kernel_.feature_dim());
  m_gen_ = Vec::Zero(kernel_.feature_dim());
  for (const auto& r : t.rounds) {
    for (std::size_t k = 0; k < r.atoms.size(); ++k) {
      const Vec& pk = r.atoms[k];
      Vec cal_res = kernel_.feature_apply(r.x, pk, r.z - pk);
      m_cal_ += r.weights[k] * cal_res;
      kernel_residual_sum_ += r.weights[k] * cal_res.squaredNorm();
      // Simulated statistic through the actual backfit measure, not its
      // nominal target: the difference is the moment-matching error.
      AtomicMeasure mu = map_.backfit(pk);
      Vec sim = Vec::Zero(domain_->dimension());
      for (std::size_t a = 0; a < mu.atoms.size(); ++a)
        sim += mu.weights[a] * map_.s(mu.atoms[a]);
      m_gen_ += r.weights[k] * kernel_.feature_apply(r.x, pk, r.z - sim);
    }
    sum_epsilon_ += r.eps;
    max_residual_ = std::max(max_residual_, r.res);
  }
}

OigapValue TranscriptAnalyzer::oigap(const Distinguisher& f) const {
  OigapValue v;
  if (f.h.is_feature_form()) {
    v.f_difference = f.h.theta().dot(m_gen_);
    v.multicalibration = f.h.theta().dot(m_cal_);
  } else {
    double fd = 0.0, mc = 0.0;
    for (const auto& r : transcript_->rounds) {
      for (std::size_t k = 0; k < r.atoms.size(); ++k) {
        const Vec& pk = r.atoms[k];
        Vec h = f.h.eval(kernel_, r.x, pk);
        mc += r.weights[k] * h.dot(r.z - pk);
        AtomicMeasure mu = map_.backfit(pk);
        Vec sim = Vec::Zero(domain_->dimension());
        for (std::size_t a = 0; a < mu.atoms.size(); ++a)
          sim += mu.weights[a] * map_.s(mu.atoms[a]);
        fd += r.weights[k] * h.dot(r.z - sim);
      }
    }
    v.f_difference = fd;
    v.multicalibration = mc;
  }
  v.value = std::abs(v.f_difference);
  if (std::abs(v.f_difference - v.multicalibration) >
      1e-6 * (1.0 + std::abs(v.multicalibration)))
    throw std::logic_error(
        "OIGap reduction identity violated beyond tolerance (defect)");
  return v;
}

double TranscriptAnalyzer::calibration_error(const RkhsFunction& h) const {
  if (h.is_feature_form()) return std::abs(h.theta().dot(m_cal_));
  double acc = 0.0;
  for (const auto& r : transcript_->rounds)
    for (std::size_t k = 0; k < r.atoms.size(); ++k)
      acc += r.weights[k] *
             h.eval(kernel_, r.x, r.atoms[k]).dot(r.z - r.atoms[k]);
  return std::abs(acc);
}

// ---------------------------------------------------------------------------

VerifyResult verify_transcript(const Transcript& t) {
  VerifyResult out;
  auto fail = [&](int round, const std::string& msg) {
    out.pass = false;
    out.failed_round = round;
    out.message = msg;
    return out;
  };

  RunConfig config;
  StatisticMap map = StatisticMap::one_hot(2);
  try {
    config = config_from_header(t.header);
    map = build_map(config.map);
  } catch (const std::exception& e) {
    return fail(-1, std::string("header: ") + e.what());
  }
  MatrixKernel kernel = kernel_from_config(config, map);
  auto domain = map.prediction_domain();
  const double diam = domain->diameter();
  const double g = kernel.g_bound();

  Vec m = Vec::Zero(kernel.feature_dim());
  double sum_eps = 0.0;
  int expected_t = 1;
  for (const auto& r : t.rounds) {
    const int rt = r.t;
    if (rt != expected_t) return fail(rt, "round indices are not sequential");
    ++expected_t;

    if (r.atoms.size() != r.weights.size() || r.atoms.empty())
      return fail(rt, "malformed atom list");
    double wsum = 0.0;
    for (double w : r.weights) {
      if (!(w >= 0.0)) return fail(rt, "negative atom weight");
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) return fail(rt, "atom weights do not sum to 1");
    for (const auto& a : r.atoms)
      if (!domain->contains(a, 10 * kMembershipTol))
        return fail(rt, "distribution atom outside the prediction set");

    bool p_is_atom = false;
    for (const auto& a : r.atoms)
      if (a.size() == r.p.size() && (a - r.p).isZero(0.0)) {
        p_is_atom = true;
        break;
      }
    if (!p_is_atom) return fail(rt, "sampled statistic is not an atom");

    if (!domain->contains(r.z, 10 * kMembershipTol))
      return fail(rt, "target statistic outside the prediction set");

    if (!r.mu_atoms.empty()) {
      if (r.y.size() != map.outcome_dim()) return fail(rt, "outcome dimension mismatch");
      if (!map.outcome_valid(r.y, 1e-7)) return fail(rt, "outcome outside the outcome space");
      Vec z_of_y = map.s(r.y);
      if ((z_of_y - r.z).cwiseAbs().maxCoeff() > 1e-9)
        return fail(rt, "target does not equal the statistic of the outcome");
      double muw = 0.0;
      Vec sim = Vec::Zero(domain->dimension());
      for (std::size_t a = 0; a < r.mu_atoms.size(); ++a) {
        if (!(r.mu_weights[a] >= 0.0)) return fail(rt, "negative measure weight");
        if (!map.outcome_valid(r.mu_atoms[a], 1e-7))
          return fail(rt, "measure atom outside the outcome space");
        muw += r.mu_weights[a];
        sim += r.mu_weights[a] * map.s(r.mu_atoms[a]);
      }
      if (std::abs(muw - 1.0) > 1e-9) return fail(rt, "measure weights do not sum to 1");
      if ((sim - r.p).cwiseAbs().maxCoeff() > 1e-8)
        return fail(rt, "measure statistics do not match the sampled statistic");
    }

    // Re-certify the EVI residual against the accumulated features.
    Vec gradient = Vec::Zero(domain->dimension());
    double inner = 0.0;
    for (std::size_t k = 0; k < r.atoms.size(); ++k) {
      Vec s = kernel.feature_adjoint(r.x, r.atoms[k], m);
      gradient += r.weights[k] * s;
      inner += r.weights[k] * s.dot(r.atoms[k]);
    }
    const double residual = domain->linear_max(gradient).value - inner;
    if (std::abs(residual - r.res) > 1e-6 * (1.0 + std::abs(r.res)))
      return fail(rt, "recomputed residual differs from the recorded one");
    if (residual > r.eps + 1e-7) return fail(rt, "residual above the round tolerance");

    for (std::size_t k = 0; k < r.atoms.size(); ++k)
      m += r.weights[k] * kernel.feature_apply(r.x, r.atoms[k], r.z - r.atoms[k]);
    sum_eps += r.eps;
    ++out.rounds_checked;
  }

  // Potential form of the multicalibration bound: ||m_T|| is the exact error
  // of the worst unit-norm function.
  const double T = double(t.rounds.size());
  const double bound = std::sqrt(T * diam * diam * g + std::max(sum_eps, 0.0));
  if (m.norm() > bound + 1e-7)
    return fail(-1, "potential exceeds the multicalibration bound");
  return out;
}

}  // namespace defgen
