#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lleda/data.hpp"
#include "lleda/eval.hpp"
#include "lleda/networks.hpp"
#include "lleda/trainer.hpp"

namespace lleda {

enum class Method { lleda, baseline, both };

std::string to_string(Method m);

/// One entry of the domain sequence: a synthetic domain or a pair of IDX files.
struct DomainConfig {
  DomainTransform transform;
  /// Domains with equal groups draw identical samples; defaults to the
  /// 1-based position in the sequence.
  std::optional<std::uint64_t> sample_group;
  std::optional<std::filesystem::path> idx_images;
  std::optional<std::filesystem::path> idx_labels;
  double eval_fraction = 0.2;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  Method method = Method::both;
  std::filesystem::path output_dir = "runs/default";
  NetworkConfig network;
  TrainConfig train;
  AugmentationPolicy augmentation;
  ProbeOptions probe;
  /// Shared generator settings; transform and seeds are filled per domain.
  SyntheticDomainSpec data;
  std::vector<DomainConfig> domains;

  /// Copies the top-level seed into every component that draws randomness.
  void apply_seed(std::uint64_t s);
};

struct ConfigIssue {
  int line = 0;  // 1-based; 0 when unknown
  std::string key;
  std::string message;
};

/// Every problem found in a config file, reported together.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Parses YAML text. Unknown keys, wrong types and invalid values are all
/// collected and thrown as one ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The defaults shipped in configs/default.yaml.
ExperimentConfig default_config();

/// Domain sources in sequence order.
std::vector<DomainSource> build_domains(const ExperimentConfig& config);

/// Trains and evaluates one method (lleda or baseline) with `sink` receiving
/// every step report.
MethodRun<float> run_method(const ExperimentConfig& config, Method method, const ReportSink& sink = {});

/// JSON line for one step report, keys in StepReport field order.
std::string step_report_json(const StepReport& r);

/// Runs the configured methods and writes
///   <out>/run.log
///   <out>/<method>/{metrics.jsonl, accuracy_matrix.csv, summary.json}
///   <out>/<method>/checkpoints/domain_<t>.llck
/// Returns 0, or 3 on divergence (the last step report goes to `err`).
int run_experiment(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

struct RunReport {
  std::vector<std::pair<std::string, SequenceMetrics>> methods;
  std::vector<std::string> warnings;
  /// method,after_domain,eval_domain,accuracy
  std::string long_csv;
};

/// Reads a run directory written by run_experiment.
RunReport read_run(const std::filesystem::path& run_dir);
/// Prints the summary blocks and writes <run_dir>/report.csv. Returns 0, or 1
/// when the run was incomplete.
int report_run(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

}  // namespace lleda
