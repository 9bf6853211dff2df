#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lleda/data.hpp"
#include "lleda/losses.hpp"
#include "lleda/networks.hpp"
#include "lleda/replay.hpp"

namespace lleda {

struct TrainConfig {
  Index epochs_per_domain = 20;
  /// SSL-only epochs on the first domain before the lower blocks are frozen.
  Index pretrain_epochs = 20;
  Index batch_size = 32;
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  double alpha1 = 1.0;  // weight of DA1 (data and memory)
  double alpha2 = 1.0;  // weight of DA2
  VicRegWeights vicreg;
  std::size_t buffer_capacity = 512;
  std::size_t sample_size = 8;
  /// Memory entries drawn per step; 0 means "same as batch_size".
  std::size_t replay_batch_size = 0;
  BufferMode buffer_mode = BufferMode::fill;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t replay_batch() const {
    return replay_batch_size == 0 ? static_cast<std::size_t>(batch_size) : replay_batch_size;
  }
};

struct StepReport {
  std::size_t domain_index = 0;
  std::size_t step = 0;
  double l_ssl = 0.0;
  double l_da1_data = 0.0;
  double l_da1_mem = 0.0;
  double l_da2 = 0.0;
  double total = 0.0;
  std::size_t buffer_size = 0;

  bool all_finite() const;
};

/// A loss became non-finite; carries the offending step.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(StepReport report);
  const StepReport& report() const { return report_; }

 private:
  StepReport report_;
};

/// Stacked view-a latents drawn from memory.
template <typename Scalar>
struct MemoryBatch {
  Tensor<Scalar> s_latent;
  Tensor<Scalar> d_latent;
};

/// MMD bandwidths per loss term. Unset entries are chosen by the median
/// heuristic on the (detached) arguments of that term.
struct BandwidthPlan {
  std::optional<std::vector<double>> da1_data;
  std::optional<std::vector<double>> da1_mem;
  std::optional<std::vector<double>> da2;
};

template <typename Scalar>
struct StepLosses {
  Tensor<Scalar> ssl;
  Tensor<Scalar> da1_data;
  std::optional<Tensor<Scalar>> da1_mem;  // only when memory was used
  std::optional<Tensor<Scalar>> da2;
  Tensor<Scalar> total;
  BandwidthPlan bandwidths;  // the bandwidths actually used
  /// Replay-layer activations of the current batch, [batch x width].
  Matrix<Scalar> s_latent_a, s_latent_b, d_latent_a, d_latent_b;
};

/// The per-minibatch objective: L_SSL on both views, DA1 on the current batch
/// and, when `memory` is given, DA1 on memory plus DA2 between memory and
/// current fused features. Terms with a zero weight stay out of `total`.
template <typename Scalar>
StepLosses<Scalar> compute_step_losses(const DualNet<Scalar>& net, const Tensor<Scalar>& view_a,
                                       const Tensor<Scalar>& view_b, const std::optional<MemoryBatch<Scalar>>& memory,
                                       double alpha1, double alpha2, const SslLoss<Scalar>& ssl_loss,
                                       const BandwidthPlan& plan = {});

/// p <- p - lr * (g + weight_decay * p) for every parameter that has a
/// gradient; frozen parameters and ones without a gradient are skipped.
template <typename Scalar>
void sgd_step(std::span<Tensor<Scalar>> params, double learning_rate, double weight_decay);

/// Per-domain checkpoints and step reports of a sequential run.
template <typename Scalar>
struct SequenceResult {
  std::vector<StepReport> reports;
  std::vector<DualNet<Scalar>> checkpoints;  // one per completed domain
};

using ReportSink = std::function<void(const StepReport&)>;

/// Runs the lifelong procedure over a fixed network, memory and config.
template <typename Scalar>
class Trainer {
 public:
  Trainer(DualNet<Scalar>& net, ReplayBuffer<Scalar>& buffer, TrainConfig config,
          std::shared_ptr<const SslLoss<Scalar>> ssl_loss = nullptr);

  /// One minibatch update on `domain_index` (1-based).
  StepReport train_step(const ImageMatrix& view_a, const ImageMatrix& view_b, std::size_t domain_index);

  /// SSL-only update of the slow stack and its projector (pretraining).
  StepReport ssl_step(const ImageMatrix& view_a, const ImageMatrix& view_b, std::size_t domain_index);

  /// Pretrains on the first domain, freezes below the replay layer, then
  /// trains every domain in order, checkpointing after each one.
  SequenceResult<Scalar> train_sequence(DomainStream& stream, const ReportSink& sink = {});

  std::size_t steps_taken() const { return step_; }
  const TrainConfig& config() const { return config_; }

 private:
  StepReport finish_step(StepReport report, const Tensor<Scalar>& total);

  DualNet<Scalar>& net_;
  ReplayBuffer<Scalar>& buffer_;
  TrainConfig config_;
  std::shared_ptr<const SslLoss<Scalar>> ssl_loss_;
  std::size_t step_ = 0;
};

/// Free-function form of Trainer::train_step.
template <typename Scalar>
StepReport train_step(DualNet<Scalar>& net, ReplayBuffer<Scalar>& buffer, const ImageMatrix& view_a,
                      const ImageMatrix& view_b, std::size_t domain_index, const TrainConfig& config);

/// Free-function form of Trainer::train_sequence.
template <typename Scalar>
SequenceResult<Scalar> train_sequence(DualNet<Scalar>& net, ReplayBuffer<Scalar>& buffer, DomainStream& stream,
                                      const TrainConfig& config, const ReportSink& sink = {});

/// Sequential SSL-only finetuning of the slow encoder: same budget and data
/// order as train_sequence, but no freezing, no memory and no DA losses.
/// With `freeze_lower` the lower blocks are frozen after pretraining exactly
/// as train_sequence does.
template <typename Scalar>
SequenceResult<Scalar> finetune_sequence(DualNet<Scalar>& net, DomainStream& stream, const TrainConfig& config,
                                         const ReportSink& sink = {}, bool freeze_lower = false);

/// Converts an image batch to a tensor of the training precision.
template <typename Scalar>
Tensor<Scalar> to_tensor(const ImageMatrix& m) {
  return Tensor<Scalar>(m.template cast<Scalar>().eval());
}

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace lleda
