#include "lleda/replay.hpp"

#include <algorithm>

namespace lleda {

namespace {
constexpr std::string_view kBufferMagic = "LLRB";
constexpr std::uint16_t kBufferVersion = 1;
}  // namespace

template <typename Scalar>
ReplayBuffer<Scalar>::ReplayBuffer(std::size_t capacity, std::uint64_t seed, BufferMode mode)
    : capacity_(capacity), mode_(mode), rng_(seed) {
  if (capacity_ == 0) throw ParameterError("replay buffer capacity must be positive");
}

template <typename Scalar>
void ReplayBuffer<Scalar>::validate_entry(const LatentPair<Scalar>& p) const {
  const Index w = p.s_latent_a.numel();
  for (const auto* t : {&p.s_latent_a, &p.s_latent_b, &p.d_latent_a, &p.d_latent_b}) {
    if (t->rank() != 1 || t->numel() != w) {
      throw DimensionError("latent pair tensors must share one replay-layer width, got " + shape_to_string(t->shape()));
    }
  }
  if (width_ != 0 && w != width_) {
    throw DimensionError("latent width " + std::to_string(w) + " differs from buffer width " + std::to_string(width_));
  }
  if (p.domain_id < 0) throw ParameterError("domain_id must be non-negative");
}

template <typename Scalar>
std::size_t ReplayBuffer<Scalar>::quota_room(std::int64_t incoming) {
  if (std::find(domains_seen_.begin(), domains_seen_.end(), incoming) == domains_seen_.end()) {
    domains_seen_.push_back(incoming);
  }
  const std::size_t quota = capacity_ / domains_seen_.size();
  for (std::int64_t d : domains_seen_) {
    if (d == incoming) continue;
    std::vector<std::size_t> owned;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].domain_id == d) owned.push_back(i);
    }
    if (owned.size() <= quota) continue;
    auto picks = rng_.sample_without_replacement(owned.size(), owned.size() - quota);
    std::vector<std::size_t> drop;
    for (auto k : picks) drop.push_back(owned[k]);
    std::sort(drop.rbegin(), drop.rend());
    for (auto i : drop) entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
  }
  const auto own = static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.domain_id == incoming; }));
  const std::size_t free = capacity_ - entries_.size();
  return std::min(free, quota > own ? quota - own : std::size_t{0});
}

template <typename Scalar>
std::size_t ReplayBuffer<Scalar>::add_batch(std::span<const LatentPair<Scalar>> batch, std::size_t sample_size) {
  if (sample_size < 1) throw ParameterError("add_batch: sample size must be at least 1");
  if (batch.empty()) return 0;
  for (const auto& p : batch) {
    validate_entry(p);
    if (p.width() != batch.front().width()) throw DimensionError("add_batch: mixed latent widths in one batch");
  }

  std::size_t room = capacity_ - entries_.size();
  if (mode_ == BufferMode::quota) {
    const std::int64_t id = batch.front().domain_id;
    for (const auto& p : batch) {
      if (p.domain_id != id) throw ContractError("add_batch: quota mode expects one domain per batch");
    }
    room = quota_room(id);
  }
  const std::size_t take = std::min({sample_size, room, batch.size()});
  if (take == 0) return 0;
  for (std::size_t i : rng_.sample_without_replacement(batch.size(), take)) entries_.push_back(batch[i]);
  width_ = batch.front().width();
  return take;
}

template <typename Scalar>
std::vector<LatentPair<Scalar>> ReplayBuffer<Scalar>::sample(std::size_t n) {
  if (entries_.empty()) throw EmptyMemoryError("cannot sample from an empty replay buffer");
  std::vector<LatentPair<Scalar>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(entries_[rng_.index(entries_.size())]);
  return out;
}

template <typename Scalar>
Bytes ReplayBuffer<Scalar>::save() const {
  ByteWriter w;
  w.raw(kBufferMagic);
  w.u16(kBufferVersion);
  w.u64(capacity_);
  w.u64(entries_.size());
  for (const auto& e : entries_) {
    ByteWriter rec;
    rec.i64(e.domain_id);
    write_tensor(rec, e.s_latent_a);
    write_tensor(rec, e.s_latent_b);
    write_tensor(rec, e.d_latent_a);
    write_tensor(rec, e.d_latent_b);
    w.u64(rec.size());
    w.raw(rec.bytes());
  }
  return std::move(w).take();
}

template <typename Scalar>
ReplayBuffer<Scalar> ReplayBuffer<Scalar>::load(std::span<const std::uint8_t> bytes, std::uint64_t seed,
                                                BufferMode mode) {
  ByteReader r(bytes);
  r.expect_magic(kBufferMagic);
  const std::size_t version_at = r.offset();
  if (r.u16() != kBufferVersion) throw FormatError("unsupported replay buffer version", version_at);
  const std::size_t cap_at = r.offset();
  const std::uint64_t capacity = r.u64();
  const std::uint64_t size = r.u64();
  if (capacity == 0 || size > capacity) throw FormatError("invalid buffer capacity/size", cap_at);

  ReplayBuffer buf(capacity, seed, mode);
  for (std::uint64_t k = 0; k < size; ++k) {
    const std::size_t len_at = r.offset();
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw FormatError("replay record length exceeds stream", len_at);
    const std::size_t start = r.offset();
    LatentPair<Scalar> p;
    p.domain_id = r.i64();
    p.s_latent_a = read_tensor<Scalar>(r);
    p.s_latent_b = read_tensor<Scalar>(r);
    p.d_latent_a = read_tensor<Scalar>(r);
    p.d_latent_b = read_tensor<Scalar>(r);
    if (r.offset() - start != len) throw FormatError("replay record length mismatch", len_at);
    try {
      buf.validate_entry(p);
    } catch (const Error& e) {
      throw FormatError(e.what(), start);
    }
    buf.width_ = p.width();
    if (std::find(buf.domains_seen_.begin(), buf.domains_seen_.end(), p.domain_id) == buf.domains_seen_.end()) {
      buf.domains_seen_.push_back(p.domain_id);
    }
    buf.entries_.push_back(std::move(p));
  }
  if (!r.done()) r.fail("trailing bytes after replay buffer");
  return buf;
}

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> stack_view_a(std::span<const LatentPair<Scalar>> entries) {
  if (entries.empty()) throw EmptyMemoryError("stack_view_a: no entries");
  const Index n = static_cast<Index>(entries.size());
  const Index w = entries.front().width();
  Matrix<Scalar> s(n, w), d(n, w);
  for (Index i = 0; i < n; ++i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    s.row(i) = e.s_latent_a.value();
    d.row(i) = e.d_latent_a.value();
  }
  return {Tensor<Scalar>(std::move(s)), Tensor<Scalar>(std::move(d))};
}

template class ReplayBuffer<float>;
template class ReplayBuffer<double>;
template std::pair<Tensor<float>, Tensor<float>> stack_view_a<float>(std::span<const LatentPair<float>>);
template std::pair<Tensor<double>, Tensor<double>> stack_view_a<double>(std::span<const LatentPair<double>>);

}  // namespace lleda
