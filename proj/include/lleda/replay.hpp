#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lleda/rng.hpp"
#include "lleda/serialize.hpp"
#include "lleda/tensor.hpp"

namespace lleda {

/// Replay-layer activations of both networks for the two views of one input.
/// Holds no input-space data and no label.
template <typename Scalar>
struct LatentPair {
  Tensor<Scalar> s_latent_a;
  Tensor<Scalar> s_latent_b;
  Tensor<Scalar> d_latent_a;
  Tensor<Scalar> d_latent_b;
  std::int64_t domain_id = 0;  // diagnostics only

  Index width() const { return s_latent_a.numel(); }
};

enum class BufferMode {
  /// Fill until capacity, then stop; existing entries are never evicted.
  fill,
  /// Each domain seen so far keeps at most capacity / domains_seen entries;
  /// over-quota domains are thinned uniformly at random.
  quota,
};

/// Capacity-bounded latent memory populated by per-batch random sampling.
template <typename Scalar>
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed, BufferMode mode = BufferMode::fill);

  /// Appends min(sample_size, capacity - size, batch.size()) entries drawn
  /// uniformly without replacement from `batch` (fill mode). Returns the count
  /// appended.
  std::size_t add_batch(std::span<const LatentPair<Scalar>> batch, std::size_t sample_size);

  /// `n` entries drawn uniformly with replacement. Throws EmptyMemoryError on an
  /// empty buffer. Contents are not modified.
  std::vector<LatentPair<Scalar>> sample(std::size_t n);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  BufferMode mode() const { return mode_; }
  const std::vector<LatentPair<Scalar>>& entries() const { return entries_; }

  /// "LLRB", u16 version, u64 capacity, u64 size, then per entry a u64 byte
  /// length followed by i64 domain_id and the four latent tensor records.
  /// RNG state is not stored.
  Bytes save() const;
  static ReplayBuffer load(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0,
                           BufferMode mode = BufferMode::fill);

 private:
  void validate_entry(const LatentPair<Scalar>& p) const;
  std::size_t quota_room(std::int64_t incoming_domain);

  std::size_t capacity_;
  BufferMode mode_;
  Rng rng_;
  std::vector<LatentPair<Scalar>> entries_;
  std::vector<std::int64_t> domains_seen_;
  Index width_ = 0;
};

/// Stacks view-a latents of `entries` into [n x width] slow and fast batches.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> stack_view_a(std::span<const LatentPair<Scalar>> entries);

extern template class ReplayBuffer<float>;
extern template class ReplayBuffer<double>;

}  // namespace lleda
