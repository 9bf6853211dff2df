#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lleda/data.hpp"
#include "lleda/networks.hpp"
#include "lleda/trainer.hpp"

namespace lleda {

/// Which final-block features the probe sees. Projector heads never enter.
enum class ProbeRepresentation { slow, fast, concat };

std::string to_string(ProbeRepresentation r);

struct ProbeOptions {
  int iterations = 500;
  double learning_rate = 0.1;
  double train_fraction = 0.8;  // per class, of each domain's evaluation set
  std::uint64_t seed = 0;
  ProbeRepresentation representation = ProbeRepresentation::slow;

  void validate() const;
};

struct ProbeResult {
  std::size_t domain_index = 0;  // evaluated domain
  std::size_t after_domain = 0;  // checkpoint used
  double accuracy = 0.0;
  Eigen::Index n_test = 0;
};

/// Multinomial logistic regression on standardised features, full-batch
/// gradient descent from zero weights. The step size is halved whenever a step
/// would increase the training loss. Returns test accuracy.
ProbeResult linear_probe(const Eigen::MatrixXd& train_reps, const GatedLabels& train_labels,
                         const Eigen::MatrixXd& test_reps, const GatedLabels& test_labels,
                         const ProbeOptions& options = {});

/// Class-stratified split: for each class, a seeded shuffle puts
/// floor(train_fraction * n_c) items (at least one when n_c > 1) in train.
struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
ProbeSplit stratified_split(const GatedLabels& labels, double train_fraction, std::uint64_t seed);

/// Probe input features of `net` for `images`.
template <typename Scalar>
Eigen::MatrixXd probe_features(const DualNet<Scalar>& net, const ImageMatrix& images, ProbeRepresentation r);

struct SequenceMetrics {
  /// accuracy[t][d]: checkpoint after domain t+1, evaluated on domain d+1.
  /// Row t holds t+1 entries.
  std::vector<std::vector<double>> accuracy;
  double average = 0.0;             // mean of the final row
  std::vector<double> forgetting;   // max_t A[t][d] - A[T][d]

  std::size_t num_domains() const { return accuracy.size(); }
  double at(std::size_t after_domain, std::size_t eval_domain) const {
    return accuracy.at(after_domain - 1).at(eval_domain - 1);
  }
};

/// Fills the lower triangle of the accuracy matrix from per-domain checkpoints.
/// The split of every domain's evaluation set is fixed across checkpoints.
template <typename Scalar>
SequenceMetrics evaluate_sequence(std::span<const DualNet<Scalar>> checkpoints, const DomainStream& stream,
                                  const ProbeOptions& options = {});

/// Average and forgetting from a filled matrix.
SequenceMetrics summarize(std::vector<std::vector<double>> accuracy);

template <typename Scalar>
struct MethodRun {
  SequenceResult<Scalar> training;
  SequenceMetrics metrics;
};

/// LLEDA end to end: fresh network from `seed`, pretrain, freeze, continual
/// training with memory and DA losses, then probes.
template <typename Scalar>
MethodRun<Scalar> run_lleda(const NetworkConfig& net_config, DomainStream& stream, const TrainConfig& config,
                            const ProbeOptions& probe = {}, const ReportSink& sink = {});

/// Naive sequential finetuning of the slow encoder with the SSL loss only and
/// the same network initialisation, data order and step budget as run_lleda.
template <typename Scalar>
MethodRun<Scalar> finetune_baseline(const NetworkConfig& net_config, DomainStream& stream, const TrainConfig& config,
                                    const ProbeOptions& probe = {}, const ReportSink& sink = {});

/// "after_domain,domain_1,...,domain_T" then one row per checkpoint; cells
/// above the diagonal are empty.
std::string accuracy_matrix_csv(const SequenceMetrics& m);
SequenceMetrics parse_accuracy_matrix_csv(const std::string& text);

/// {"average": ..., "final_accuracy": [...], "forgetting_per_domain": [...]}
std::string summary_json(const SequenceMetrics& m);

}  // namespace lleda
