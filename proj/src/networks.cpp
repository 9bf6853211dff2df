#include "lleda/networks.hpp"

#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

namespace lleda {

namespace {
constexpr std::string_view kCheckpointMagic = "LLCK";
constexpr std::uint16_t kCheckpointVersion = 1;

ParamRole role_from_string(const std::string& s, std::size_t offset) {
  if (s == "slow") return ParamRole::slow;
  if (s == "fast") return ParamRole::fast;
  if (s == "slow_projector") return ParamRole::slow_projector;
  if (s == "fast_projector") return ParamRole::fast_projector;
  throw FormatError("unknown parameter role \"" + s + "\"", offset);
}
}  // namespace

std::string to_string(ParamRole role) {
  switch (role) {
    case ParamRole::slow: return "slow";
    case ParamRole::fast: return "fast";
    case ParamRole::slow_projector: return "slow_projector";
    case ParamRole::fast_projector: return "fast_projector";
  }
  return "unknown";
}

void NetworkConfig::validate() const {
  if (input_dim <= 0) throw ParameterError("network input_dim must be positive");
  if (widths.size() < 2) throw ParameterError("network needs at least two blocks");
  for (Index w : widths) {
    if (w <= 0) throw ParameterError("block widths must be positive");
  }
  if (replay_index < 1 || replay_index >= static_cast<Index>(widths.size())) {
    throw ParameterError("replay_index must satisfy 1 <= r < number of blocks");
  }
  if (projector_hidden <= 0 || projector_out <= 0) throw ParameterError("projector dims must be positive");
}

// ---------------------------------------------------------------------------

template <typename Scalar>
Affine<Scalar> Affine<Scalar>::init(Index in, Index out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  Affine a;
  a.weight = Tensor<Scalar>::random_uniform({in, out}, rng, -bound, bound, true);
  a.bias = Tensor<Scalar>(Shape{out}, Matrix<Scalar>::Zero(1, out), true);
  return a;
}

template <typename Scalar>
void Affine<Scalar>::set_frozen(bool on) {
  frozen = on;
  weight.set_requires_grad(!on);
  bias.set_requires_grad(!on);
  weight.zero_grad();
  bias.zero_grad();
}

template <typename Scalar>
EncoderStack<Scalar>::EncoderStack(Index input_dim, std::span<const Index> widths, Index replay_index, Rng& rng)
    : replay_index_(replay_index) {
  Index in = input_dim;
  for (Index w : widths) {
    blocks_.push_back(Affine<Scalar>::init(in, w, rng));
    in = w;
  }
}

template <typename Scalar>
Tensor<Scalar> EncoderStack<Scalar>::forward(const Tensor<Scalar>& x, Index first, Index last) const {
  if (first < 0 || last > num_blocks() || first >= last) throw ContractError("EncoderStack::forward: bad block range");
  if (x.rank() != 2 || x.cols() != blocks_[static_cast<std::size_t>(first)].in_dim()) {
    throw DimensionError("encoder block " + std::to_string(first + 1) + " expects width " +
                         std::to_string(blocks_[static_cast<std::size_t>(first)].in_dim()) + ", got " +
                         shape_to_string(x.shape()));
  }
  Tensor<Scalar> h = x;
  for (Index i = first; i < last; ++i) h = relu(blocks_[static_cast<std::size_t>(i)](h));
  return h;
}

template <typename Scalar>
void EncoderStack<Scalar>::freeze_below_replay() {
  for (Index i = 0; i < replay_index_; ++i) blocks_[static_cast<std::size_t>(i)].set_frozen(true);
  frozen_below_replay_ = true;
}

template <typename Scalar>
EncoderStack<Scalar> EncoderStack<Scalar>::clone() const {
  EncoderStack copy;
  copy.replay_index_ = replay_index_;
  copy.frozen_below_replay_ = frozen_below_replay_;
  for (const auto& b : blocks_) copy.blocks_.push_back(b.clone());
  return copy;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
DualNet<Scalar>::DualNet(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng root(seed);
  Rng slow_rng = root.fork();
  Rng fast_rng = root.fork();
  Rng slow_head_rng = root.fork();
  Rng fast_head_rng = root.fork();
  slow_ = EncoderStack<Scalar>(config_.input_dim, config_.widths, config_.replay_index, slow_rng);
  fast_ = EncoderStack<Scalar>(config_.input_dim, config_.widths, config_.replay_index, fast_rng);
  const Index feat = config_.feature_dim();
  slow_projector_ = {Affine<Scalar>::init(feat, config_.projector_hidden, slow_head_rng),
                     Affine<Scalar>::init(config_.projector_hidden, config_.projector_out, slow_head_rng)};
  fast_projector_ = {Affine<Scalar>::init(feat, config_.projector_hidden, fast_head_rng),
                     Affine<Scalar>::init(config_.projector_hidden, config_.projector_out, fast_head_rng)};
}

template <typename Scalar>
ForwardOutputs<Scalar> DualNet<Scalar>::finish(Tensor<Scalar> s_latent, Tensor<Scalar> d_latent) const {
  ForwardOutputs<Scalar> out;
  const Index r = config_.replay_index;
  const Index b = static_cast<Index>(config_.widths.size());
  out.s4 = slow_.forward(s_latent, r, b);
  out.d4 = fast_.forward(d_latent, r, b);
  out.d4_fused = mul(out.d4, out.s4);
  out.ssl_embedding = slow_projector_(out.s4);
  out.da_feature = fast_projector_(out.d4_fused);
  out.s_latent = std::move(s_latent);
  out.d_latent = std::move(d_latent);
  return out;
}

template <typename Scalar>
ForwardOutputs<Scalar> DualNet<Scalar>::forward_full(const Tensor<Scalar>& x) const {
  if (x.rank() != 2 || x.cols() != config_.input_dim) {
    throw DimensionError("forward_full: expected [batch x " + std::to_string(config_.input_dim) + "], got " +
                         shape_to_string(x.shape()));
  }
  const Index r = config_.replay_index;
  return finish(slow_.forward(x, 0, r), fast_.forward(x, 0, r));
}

template <typename Scalar>
ForwardOutputs<Scalar> DualNet<Scalar>::forward_from_latent(const Tensor<Scalar>& s_latent,
                                                            const Tensor<Scalar>& d_latent) const {
  const Index w = config_.latent_dim();
  for (const auto* t : {&s_latent, &d_latent}) {
    if (t->rank() != 2 || t->cols() != w) {
      throw DimensionError("forward_from_latent: replay layer width is " + std::to_string(w) + ", got " +
                           shape_to_string(t->shape()));
    }
  }
  if (s_latent.rows() != d_latent.rows()) {
    throw DimensionError("forward_from_latent: latent batch sizes differ " + shape_to_string(s_latent.shape()) +
                         " vs " + shape_to_string(d_latent.shape()));
  }
  return finish(s_latent, d_latent);
}

template <typename Scalar>
Tensor<Scalar> DualNet<Scalar>::slow_features(const Tensor<Scalar>& x) const {
  return slow_.forward(x, 0, slow_.num_blocks());
}

template <typename Scalar>
Tensor<Scalar> DualNet<Scalar>::fast_features(const Tensor<Scalar>& x) const {
  return fast_.forward(x, 0, fast_.num_blocks());
}

template <typename Scalar>
void DualNet<Scalar>::freeze_below_replay() {
  fast_.freeze_below_replay();
  if (config_.freeze_slow_lower) slow_.freeze_below_replay();
}

template <typename Scalar>
std::vector<ParamRef<Scalar>> DualNet<Scalar>::parameters() const {
  std::vector<ParamRef<Scalar>> out;
  auto push = [&out](ParamRole role, Index block, const Affine<Scalar>& a) {
    out.push_back({role, block, false, a.frozen, a.weight});
    out.push_back({role, block, true, a.frozen, a.bias});
  };
  for (Index i = 0; i < slow_.num_blocks(); ++i) push(ParamRole::slow, i + 1, slow_.block(i));
  for (Index i = 0; i < fast_.num_blocks(); ++i) push(ParamRole::fast, i + 1, fast_.block(i));
  push(ParamRole::slow_projector, 1, slow_projector_.hidden);
  push(ParamRole::slow_projector, 2, slow_projector_.output);
  push(ParamRole::fast_projector, 1, fast_projector_.hidden);
  push(ParamRole::fast_projector, 2, fast_projector_.output);
  return out;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> DualNet<Scalar>::trainable_parameters() const {
  std::vector<Tensor<Scalar>> out;
  for (auto& p : parameters()) {
    if (!p.frozen) out.push_back(p.tensor);
  }
  return out;
}

template <typename Scalar>
void DualNet<Scalar>::zero_grad() const {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

template <typename Scalar>
std::uint64_t DualNet<Scalar>::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : parameters()) {
    for (Scalar v : p.tensor.data()) {
      unsigned char bytes[sizeof(Scalar)];
      std::memcpy(bytes, &v, sizeof(Scalar));
      for (unsigned char b : bytes) h = (h ^ b) * 0x100000001b3ULL;
    }
  }
  return h;
}

template <typename Scalar>
std::uint64_t DualNet<Scalar>::checksum(ParamRole role, Index first_block, Index last_block) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : parameters()) {
    if (p.role != role || p.block < first_block || p.block > last_block) continue;
    for (Scalar v : p.tensor.data()) {
      unsigned char bytes[sizeof(Scalar)];
      std::memcpy(bytes, &v, sizeof(Scalar));
      for (unsigned char b : bytes) h = (h ^ b) * 0x100000001b3ULL;
    }
  }
  return h;
}

template <typename Scalar>
DualNet<Scalar> DualNet<Scalar>::clone() const {
  DualNet copy;
  copy.config_ = config_;
  copy.slow_ = slow_.clone();
  copy.fast_ = fast_.clone();
  copy.slow_projector_ = slow_projector_.clone();
  copy.fast_projector_ = fast_projector_.clone();
  return copy;
}

template <typename Scalar>
Bytes DualNet<Scalar>::save_checkpoint() const {
  nlohmann::json manifest;
  manifest["architecture"] = {{"input_dim", config_.input_dim},
                              {"widths", config_.widths},
                              {"replay_index", config_.replay_index},
                              {"projector_hidden", config_.projector_hidden},
                              {"projector_out", config_.projector_out},
                              {"freeze_slow_lower", config_.freeze_slow_lower}};
  manifest["scalar"] = sizeof(Scalar) == 4 ? "f32" : "f64";
  manifest["frozen_below_replay"] = {{"slow", slow_.frozen_below_replay()}, {"fast", fast_.frozen_below_replay()}};
  const auto params = parameters();
  auto& entries = manifest["parameters"] = nlohmann::json::array();
  for (const auto& p : params) {
    entries.push_back({{"role", to_string(p.role)},
                       {"block", p.block},
                       {"kind", p.is_bias ? "bias" : "weight"},
                       {"frozen", p.frozen}});
  }
  const std::string text = manifest.dump();

  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) write_tensor(w, p.tensor);
  return std::move(w).take();
}

template <typename Scalar>
DualNet<Scalar> DualNet<Scalar>::load_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kCheckpointMagic);
  const std::size_t version_at = r.offset();
  if (r.u16() != kCheckpointVersion) throw FormatError("unsupported checkpoint version", version_at);
  const std::size_t manifest_at = r.offset();
  const std::uint32_t len = r.u32();
  auto text = r.raw(len);
  nlohmann::json manifest = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("architecture") || !manifest.contains("parameters")) {
    throw FormatError("checkpoint manifest is not valid JSON", manifest_at);
  }

  NetworkConfig cfg;
  try {
    const auto& a = manifest.at("architecture");
    cfg.input_dim = a.at("input_dim").get<Index>();
    cfg.widths = a.at("widths").get<std::vector<Index>>();
    cfg.replay_index = a.at("replay_index").get<Index>();
    cfg.projector_hidden = a.at("projector_hidden").get<Index>();
    cfg.projector_out = a.at("projector_out").get<Index>();
    cfg.freeze_slow_lower = a.at("freeze_slow_lower").get<bool>();
    cfg.validate();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint architecture: ") + e.what(), manifest_at);
  } catch (const ParameterError& e) {
    throw FormatError(std::string("checkpoint architecture: ") + e.what(), manifest_at);
  }

  DualNet net(cfg, 0);
  auto params = net.parameters();
  const auto& entries = manifest.at("parameters");
  const std::size_t count_at = r.offset();
  const std::uint32_t count = r.u32();
  if (count != params.size() || entries.size() != params.size()) {
    throw FormatError("checkpoint parameter count does not match architecture", count_at);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t at = r.offset();
    const auto& e = entries[i];
    const ParamRole role = role_from_string(e.value("role", std::string{}), manifest_at);
    if (role != params[i].role || e.value("block", Index{-1}) != params[i].block ||
        (e.value("kind", std::string{}) == "bias") != params[i].is_bias) {
      throw FormatError("checkpoint manifest entry " + std::to_string(i) + " out of order", manifest_at);
    }
    Tensor<Scalar> t = read_tensor<Scalar>(r);
    if (t.shape() != params[i].tensor.shape()) {
      throw FormatError("parameter " + std::to_string(i) + " has shape " + shape_to_string(t.shape()) +
                            ", expected " + shape_to_string(params[i].tensor.shape()),
                        at);
    }
    params[i].tensor.assign(t.value());
  }
  if (!r.done()) r.fail("trailing bytes after checkpoint");

  const auto& fz = manifest.value("frozen_below_replay", nlohmann::json::object());
  if (fz.value("fast", false)) net.fast_.freeze_below_replay();
  if (fz.value("slow", false)) net.slow_.freeze_below_replay();
  // Per-parameter frozen flags are authoritative.
  auto apply = [&](Affine<Scalar>& a, std::size_t weight_idx) {
    a.set_frozen(entries[weight_idx].value("frozen", false));
  };
  std::size_t idx = 0;
  for (Index i = 0; i < net.slow_.num_blocks(); ++i, idx += 2) apply(net.slow_.block(i), idx);
  for (Index i = 0; i < net.fast_.num_blocks(); ++i, idx += 2) apply(net.fast_.block(i), idx);
  apply(net.slow_projector_.hidden, idx);
  apply(net.slow_projector_.output, idx + 2);
  apply(net.fast_projector_.hidden, idx + 4);
  apply(net.fast_projector_.output, idx + 6);
  return net;
}

template struct Affine<float>;
template struct Affine<double>;
template class EncoderStack<float>;
template class EncoderStack<double>;
template class DualNet<float>;
template class DualNet<double>;

}  // namespace lleda
