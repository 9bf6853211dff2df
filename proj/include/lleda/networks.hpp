#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lleda/serialize.hpp"
#include "lleda/tensor.hpp"

namespace lleda {

struct NetworkConfig {
  Index input_dim = 256;
  /// Output width of each encoder block; both stacks share this layout.
  std::vector<Index> widths{128, 64, 64, 64};
  /// Number of blocks below the replay layer (blocks 1..replay_index).
  Index replay_index = 1;
  Index projector_hidden = 64;
  Index projector_out = 32;
  /// When false only the fast stack is frozen below the replay layer.
  bool freeze_slow_lower = true;

  void validate() const;
  Index latent_dim() const { return widths.at(static_cast<std::size_t>(replay_index) - 1); }
  Index feature_dim() const { return widths.back(); }
};

/// y = x W + b, with W stored [in x out].
template <typename Scalar>
struct Affine {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
  bool frozen = false;

  /// He-uniform fan-in initialisation, zero bias.
  static Affine init(Index in, Index out, Rng& rng);

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    return matmul(x, weight) + broadcast_rows(bias, x.rows());
  }
  Index in_dim() const { return weight.rows(); }
  Index out_dim() const { return weight.cols(); }
  void set_frozen(bool on);
  Affine clone() const { return {weight.clone(), bias.clone(), frozen}; }
};

/// Ordered affine+ReLU blocks with a replay split after `replay_index` blocks.
template <typename Scalar>
class EncoderStack {
 public:
  EncoderStack() = default;
  EncoderStack(Index input_dim, std::span<const Index> widths, Index replay_index, Rng& rng);

  /// Runs 0-based blocks [first, last).
  Tensor<Scalar> forward(const Tensor<Scalar>& x, Index first, Index last) const;

  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  Index replay_index() const { return replay_index_; }
  Index input_dim() const { return blocks_.front().in_dim(); }
  Index latent_dim() const { return blocks_[static_cast<std::size_t>(replay_index_) - 1].out_dim(); }
  Index output_dim() const { return blocks_.back().out_dim(); }

  void freeze_below_replay();
  bool frozen_below_replay() const { return frozen_below_replay_; }

  Affine<Scalar>& block(Index i) { return blocks_.at(static_cast<std::size_t>(i)); }
  const Affine<Scalar>& block(Index i) const { return blocks_.at(static_cast<std::size_t>(i)); }

  EncoderStack clone() const;

 private:
  std::vector<Affine<Scalar>> blocks_;
  Index replay_index_ = 1;
  bool frozen_below_replay_ = false;
};

/// Two-layer MLP head: affine -> ReLU -> affine.
template <typename Scalar>
struct Projector {
  Affine<Scalar> hidden;
  Affine<Scalar> output;

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const { return output(relu(hidden(x))); }
  Projector clone() const { return {hidden.clone(), output.clone()}; }
};

enum class ParamRole : std::uint8_t { slow = 0, fast = 1, slow_projector = 2, fast_projector = 3 };

std::string to_string(ParamRole role);

template <typename Scalar>
struct ParamRef {
  ParamRole role;
  Index block;  // 1-based block (or projector layer) index
  bool is_bias;
  bool frozen;
  Tensor<Scalar> tensor;
};

template <typename Scalar>
struct ForwardOutputs {
  Tensor<Scalar> s_latent;       // slow activation at the replay layer
  Tensor<Scalar> d_latent;       // fast activation at the replay layer
  Tensor<Scalar> s4;             // slow final block
  Tensor<Scalar> d4;             // fast final block
  Tensor<Scalar> d4_fused;       // d4 (*) s4
  Tensor<Scalar> ssl_embedding;  // slow projector on s4
  Tensor<Scalar> da_feature;     // fast projector on d4_fused
};

/// Slow self-supervised encoder and fast domain-adaptation encoder with their
/// projector heads.
template <typename Scalar>
class DualNet {
 public:
  DualNet(const NetworkConfig& config, std::uint64_t seed);

  /// Runs both stacks from raw input.
  ForwardOutputs<Scalar> forward_full(const Tensor<Scalar>& x) const;

  /// Resumes both stacks above the replay layer from stored activations.
  ForwardOutputs<Scalar> forward_from_latent(const Tensor<Scalar>& s_latent, const Tensor<Scalar>& d_latent) const;

  /// Fast projector ("DA head") applied to any final-block-width features.
  Tensor<Scalar> da_head(const Tensor<Scalar>& features) const { return fast_projector_(features); }

  /// Slow encoder's final block only; projector heads are not involved.
  Tensor<Scalar> slow_features(const Tensor<Scalar>& x) const;
  Tensor<Scalar> fast_features(const Tensor<Scalar>& x) const;

  /// Marks blocks 1..replay_index of the fast stack (and of the slow stack when
  /// configured) frozen. Frozen parameters no longer receive gradients.
  void freeze_below_replay();

  std::vector<ParamRef<Scalar>> parameters() const;
  std::vector<Tensor<Scalar>> trainable_parameters() const;
  void zero_grad() const;

  /// FNV-1a over the raw parameter bytes, optionally restricted to one role
  /// and to blocks [first_block, last_block].
  std::uint64_t checksum() const;
  std::uint64_t checksum(ParamRole role, Index first_block = 1, Index last_block = 1 << 30) const;

  DualNet clone() const;

  const NetworkConfig& config() const { return config_; }
  EncoderStack<Scalar>& slow() { return slow_; }
  EncoderStack<Scalar>& fast() { return fast_; }
  const EncoderStack<Scalar>& slow() const { return slow_; }
  const EncoderStack<Scalar>& fast() const { return fast_; }
  Projector<Scalar>& slow_projector() { return slow_projector_; }
  Projector<Scalar>& fast_projector() { return fast_projector_; }

  /// Checkpoint: "LLCK", u16 version, u32 manifest length, JSON manifest
  /// (architecture plus one entry per parameter: role, block, kind, frozen),
  /// u32 record count, then one tensor record per parameter in manifest order.
  Bytes save_checkpoint() const;
  static DualNet load_checkpoint(std::span<const std::uint8_t> bytes);

 private:
  DualNet() = default;
  ForwardOutputs<Scalar> finish(Tensor<Scalar> s_latent, Tensor<Scalar> d_latent) const;

  NetworkConfig config_;
  EncoderStack<Scalar> slow_;
  EncoderStack<Scalar> fast_;
  Projector<Scalar> slow_projector_;
  Projector<Scalar> fast_projector_;
};

extern template class DualNet<float>;
extern template class DualNet<double>;

}  // namespace lleda
