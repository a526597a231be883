// defgen: run, verify, sweep, and report Defensive Generation experiments.
//
// Exit codes: 0 success, 1 runtime/verification failure, 2 invalid
// configuration or corrupt input, 3 EVI certification failure.

#include "defgen/harness.hpp"
#include "defgen/log.hpp"
#include "defgen/transcript.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace defgen;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  long long seed_override = -1;
  int threads = 1;
};

RunConfig load_config(const CommonOpts& opts) {
  RunConfig config = load_run_config(opts.config_path);
  if (opts.seed_override >= 0) {
    config.seed = static_cast<std::uint64_t>(opts.seed_override);
    config.raw = config_to_json(config);
  }
  return config;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

int cmd_run(const CommonOpts& opts) {
  RunConfig config = load_config(opts);
  ExperimentResult result = run_experiment(config);

  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "transcript.jsonl",
             transcript_to_string(result.transcript));
  write_file(fs::path(opts.out_dir) / "report.csv", report_csv(result, config));

  std::cout << "rounds: " << static_cast<long long>(result.stats.T)
            << "  potential: " << result.potential
            << "  bound: " << result.potential_bound
            << "  max_residual: " << result.max_residual << "\n";
  for (const auto& f : result.families) {
    std::cout << "family " << f.family << ": max_oigap " << f.max_oigap
              << "  bound " << f.bound << "  ratio " << f.ratio
              << (f.violations > 0 ? "  VIOLATIONS" : "") << "\n";
    if (f.violations > 0) return 1;
  }
  std::cout << "wrote " << (fs::path(opts.out_dir) / "transcript.jsonl").string()
            << " and report.csv\n";
  return 0;
}

int cmd_verify(const std::string& transcript_path) {
  Transcript t = read_transcript_file(transcript_path);
  VerifyResult v = verify_transcript(t);
  if (v.pass) {
    std::cout << "PASS: " << v.rounds_checked << " rounds verified\n";
    return 0;
  }
  std::cout << "FAIL";
  if (v.failed_round >= 0) std::cout << " at round " << v.failed_round;
  std::cout << ": " << v.message << "\n";
  return 1;
}

int cmd_sweep(const CommonOpts& opts, std::vector<long long> t_values) {
  if (t_values.size() < 3)
    throw InputError("sweep needs at least 3 values of T");
  RunConfig base = load_config(opts);

  std::vector<std::pair<double, double>> points(t_values.size());
  std::vector<ExperimentResult> results(t_values.size());
  auto run_one = [&](std::size_t i) {
    RunConfig c = base;
    c.T = t_values[i];
    c.raw = config_to_json(c);
    ExperimentResult r = run_experiment(c);
    // Error of the maximizing distinguisher across the evaluated families.
    double err = r.potential;
    for (const auto& f : r.families) err = std::max(err, f.max_oigap);
    points[i] = {double(t_values[i]), err};
    results[i] = std::move(r);
  };

  if (opts.threads > 1) {
    std::vector<std::future<void>> futures;
    std::size_t next = 0;
    std::mutex mu;
    for (int w = 0; w < opts.threads; ++w)
      futures.push_back(std::async(std::launch::async, [&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= t_values.size()) return;
            i = next++;
          }
          run_one(i);
        }
      }));
    for (auto& f : futures) f.get();
  } else {
    for (std::size_t i = 0; i < t_values.size(); ++i) run_one(i);
  }

  const double slope = fit_rate(points);
  std::ostringstream csv;
  csv << "T,error\n";
  for (const auto& [t, e] : points) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", e);
    csv << static_cast<long long>(t) << "," << buf << "\n";
  }
  {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", slope);
    csv << "slope," << buf << "\n";
  }
  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "sweep.csv", csv.str());
  std::cout << csv.str();
  std::cout << "slope: " << slope << "\n";
  return 0;
}

int cmd_report(const std::string& transcript_path, const std::string& out_dir) {
  Transcript t = read_transcript_file(transcript_path);
  TranscriptAnalyzer analyzer(t);
  const RunConfig& config = analyzer.config();
  StatisticMap map = build_map(config.map);
  const FeatureDims dims = scenario_feature_dims(config.scenario, map);

  RunStats stats;
  stats.T = double(analyzer.rounds());
  stats.diameter = analyzer.domain().diameter();
  stats.g_bound = analyzer.kernel().g_bound();
  stats.sum_epsilon = analyzer.sum_epsilon();
  stats.kernel_residual_sum = analyzer.kernel_residual_sum();
  stats.lag = double(config.scenario.lag);

  ExperimentResult result;
  result.stats = stats;
  result.prediction_dim = analyzer.domain().dimension();
  result.max_residual = analyzer.max_residual();
  result.potential = analyzer.potential();

  const auto families =
      build_families(config, analyzer.map(), analyzer.kernel(), dims.x_dim);
  for (const auto& fam : families) {
    FamilyReport rep;
    rep.family = fam.name;
    rep.bound_label = fam.bound_label;
    double worst_ratio = -1.0;
    for (const auto& member : fam.members) {
      const OigapValue v = analyzer.oigap(member.f);
      const double bound = fam.bound(stats, member.bound_coef);
      const double ratio = bound > 0 ? v.value / bound : 0.0;
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
  const std::string csv = report_csv(result, config);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "report.csv", csv);
  }
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Defensive Generation: outcome-indistinguishable online generation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string transcript_path;
  std::string t_list;

  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("--config", opts.config_path, "config JSON path")->required();
  run->add_option("--out", opts.out_dir, "output directory");
  run->add_option("--seed", opts.seed_override, "override the config seed");
  run->add_option("--threads", opts.threads, "worker threads");

  auto* verify = app.add_subcommand("verify", "re-check a transcript");
  verify->add_option("transcript", transcript_path, "transcript.jsonl path")
      ->required();

  auto* sweep = app.add_subcommand("sweep", "run a T sweep and fit the rate");
  sweep->add_option("--config", opts.config_path, "config JSON path")->required();
  sweep->add_option("--T-list", t_list, "comma-separated T values (>= 3)")
      ->required();
  sweep->add_option("--out", opts.out_dir, "output directory");
  sweep->add_option("--seed", opts.seed_override, "override the config seed");
  sweep->add_option("--threads", opts.threads, "worker threads");

  auto* report = app.add_subcommand("report", "recompute the report from a transcript");
  report->add_option("transcript", transcript_path, "transcript.jsonl path")
      ->required();
  report->add_option("--out", opts.out_dir, "output directory (optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(opts);
    if (verify->parsed()) return cmd_verify(transcript_path);
    if (sweep->parsed()) {
      std::vector<long long> ts;
      std::stringstream ss(t_list);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) ts.push_back(std::stoll(item));
      return cmd_sweep(opts, ts);
    }
    if (report->parsed()) return cmd_report(transcript_path, opts.out_dir);
  } catch (const CertificationError& e) {
    std::cerr << "certification failure at round " << e.round << ": residual "
              << e.residual << " > " << e.requested << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TranscriptError& e) {
    std::cerr << "transcript error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
