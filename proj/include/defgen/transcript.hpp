#pragma once

#include "defgen/config.hpp"
#include "defgen/generate.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace defgen {

struct TranscriptError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TranscriptRound {
  int t = 0;
  Vec x;
  std::vector<Vec> atoms;
  std::vector<double> weights;
  Vec p;  // sampled statistic
  Vec z;  // revealed target statistic
  double eps = 0.0;
  double res = 0.0;
  // Generation runs also carry the conditional measure and the raw outcome.
  std::vector<Vec> mu_atoms;
  std::vector<double> mu_weights;
  Vec y;
};

// Newline-delimited JSON: one header object, then one object per round.
// Serialization round-trips bit-exactly.
struct Transcript {
  Json header;
  std::vector<TranscriptRound> rounds;
};

Transcript build_transcript(const GenerationEngine& engine, const Json& config);
void write_transcript(std::ostream& out, const Transcript& t);
std::string transcript_to_string(const Transcript& t);
Transcript read_transcript(std::istream& in);
Transcript read_transcript_file(const std::string& path);

struct VerifyResult {
  bool pass = true;
  int failed_round = -1;  // -1 when no round-level failure
  std::string message;    // first violation
  int rounds_checked = 0;
};

// Recheck a transcript end to end: distribution validity, atom membership,
// statistic consistency, measure moment matching, re-certified EVI
// residuals, and the potential bound.
VerifyResult verify_transcript(const Transcript& t);

struct OigapValue {
  double f_difference = 0.0;      // real-vs-simulated distinguisher sums
  double multicalibration = 0.0;  // sum E[h(x,p).(z - p)]
  double value = 0.0;             // |f_difference|
};

// Transcript analysis: rebuilds the map/kernel from the header and caches
// the per-atom backfit statistics so OIGap evaluation is one inner product
// for feature-form distinguishers.
class TranscriptAnalyzer {
 public:
  explicit TranscriptAnalyzer(const Transcript& t);

  OigapValue oigap(const Distinguisher& f) const;
  double calibration_error(const RkhsFunction& h) const;
  double potential() const { return m_cal_.norm(); }
  double sum_epsilon() const { return sum_epsilon_; }
  double kernel_residual_sum() const { return kernel_residual_sum_; }
  double max_residual() const { return max_residual_; }
  int rounds() const { return static_cast<int>(transcript_->rounds.size()); }

  const StatisticMap& map() const { return map_; }
  const MatrixKernel& kernel() const { return kernel_; }
  const ConvexDomain& domain() const { return *domain_; }
  const RunConfig& config() const { return config_; }

 private:
  const Transcript* transcript_;
  RunConfig config_;
  StatisticMap map_;
  MatrixKernel kernel_;
  std::shared_ptr<const ConvexDomain> domain_;
  Vec m_cal_;    // features of (z_t - p) residuals
  Vec m_gen_;    // features of (s(y_t) - E_{backfit(p)}[s]) residuals
  double sum_epsilon_ = 0.0;
  double kernel_residual_sum_ = 0.0;
  double max_residual_ = 0.0;
};

RunConfig config_from_header(const Json& header);
MatrixKernel kernel_from_config(const RunConfig& c, const StatisticMap& map);

}  // namespace defgen
