#include "lleda/trainer.hpp"

#include <cmath>
#include <sstream>

namespace lleda {

void TrainConfig::validate() const {
  if (epochs_per_domain < 1) throw ParameterError("epochs_per_domain must be positive");
  if (pretrain_epochs < 0) throw ParameterError("pretrain_epochs must be non-negative");
  if (batch_size < 2) throw ParameterError("batch_size must be at least 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning_rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ParameterError("weight_decay must be non-negative");
  }
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw ParameterError("alpha1 and alpha2 must be non-negative");
  vicreg.validate();
  if (buffer_capacity == 0) throw ParameterError("buffer_capacity must be positive");
  if (sample_size == 0) throw ParameterError("sample_size must be positive");
  if (replay_batch() < 2) throw ParameterError("replay batch must hold at least 2 entries");
}

bool StepReport::all_finite() const {
  return std::isfinite(l_ssl) && std::isfinite(l_da1_data) && std::isfinite(l_da1_mem) && std::isfinite(l_da2) &&
         std::isfinite(total);
}

namespace {

std::string describe(const StepReport& r) {
  std::ostringstream os;
  os << "non-finite loss at domain " << r.domain_index << " step " << r.step << " (ssl=" << r.l_ssl
     << " da1_data=" << r.l_da1_data << " da1_mem=" << r.l_da1_mem << " da2=" << r.l_da2 << " total=" << r.total
     << ")";
  return os.str();
}

template <typename Scalar>
Tensor<Scalar> mmd_term(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const std::optional<std::vector<double>>& fixed,
                        std::optional<std::vector<double>>& used) {
  used = fixed ? *fixed : median_heuristic_bandwidths<Scalar>(a.value(), b.value());
  return mmd(a, b, std::span<const double>(*used));
}

template <typename Scalar>
Tensor<Scalar> row_tensor(const Matrix<Scalar>& m, Index i) {
  return Tensor<Scalar>(Shape{m.cols()}, m.row(i), false);
}

}  // namespace

DivergenceError::DivergenceError(StepReport report) : Error(describe(report)), report_(report) {}

template <typename Scalar>
StepLosses<Scalar> compute_step_losses(const DualNet<Scalar>& net, const Tensor<Scalar>& view_a,
                                       const Tensor<Scalar>& view_b, const std::optional<MemoryBatch<Scalar>>& memory,
                                       double alpha1, double alpha2, const SslLoss<Scalar>& ssl_loss,
                                       const BandwidthPlan& plan) {
  if (view_a.shape() != view_b.shape()) {
    throw DimensionError("views differ in shape: " + shape_to_string(view_a.shape()) + " vs " +
                         shape_to_string(view_b.shape()));
  }
  StepLosses<Scalar> out;
  const auto fa = net.forward_full(view_a);
  const auto fb = net.forward_full(view_b);

  const ViewPair<Scalar> pairs[] = {{fa.ssl_embedding, fb.ssl_embedding}};
  out.ssl = ssl_objective(std::span<const ViewPair<Scalar>>(pairs), ssl_loss);

  out.da1_data = mmd_term(net.da_head(fa.d4), net.da_head(fa.s4), plan.da1_data, out.bandwidths.da1_data);
  Tensor<Scalar> total = out.ssl;
  if (alpha1 > 0.0) total = total + static_cast<Scalar>(alpha1) * out.da1_data;

  if (memory) {
    const auto fm = net.forward_from_latent(memory->s_latent, memory->d_latent);
    out.da1_mem = mmd_term(net.da_head(fm.d4), net.da_head(fm.s4), plan.da1_mem, out.bandwidths.da1_mem);
    out.da2 = mmd_term(fm.da_feature, fa.da_feature, plan.da2, out.bandwidths.da2);
    if (alpha1 > 0.0) total = total + static_cast<Scalar>(alpha1) * *out.da1_mem;
    if (alpha2 > 0.0) total = total + static_cast<Scalar>(alpha2) * *out.da2;
  }
  out.total = total;
  out.s_latent_a = fa.s_latent.value();
  out.s_latent_b = fb.s_latent.value();
  out.d_latent_a = fa.d_latent.value();
  out.d_latent_b = fb.d_latent.value();
  return out;
}

template <typename Scalar>
void sgd_step(std::span<Tensor<Scalar>> params, double learning_rate, double weight_decay) {
  const auto lr = static_cast<Scalar>(learning_rate);
  const auto wd = static_cast<Scalar>(weight_decay);
  for (auto& p : params) {
    // Parameters that took no part in the loss are left alone, decay included.
    if (!p.requires_grad() || !p.has_grad()) continue;
    auto& v = p.mutable_value();
    v -= lr * (p.grad() + wd * v);
  }
}

template <typename Scalar>
Trainer<Scalar>::Trainer(DualNet<Scalar>& net, ReplayBuffer<Scalar>& buffer, TrainConfig config,
                         std::shared_ptr<const SslLoss<Scalar>> ssl_loss)
    : net_(net), buffer_(buffer), config_(std::move(config)), ssl_loss_(std::move(ssl_loss)) {
  config_.validate();
  if (!ssl_loss_) ssl_loss_ = std::make_shared<VicRegLoss<Scalar>>(config_.vicreg);
}

template <typename Scalar>
StepReport Trainer<Scalar>::finish_step(StepReport report, const Tensor<Scalar>& total) {
  report.step = ++step_;
  report.buffer_size = buffer_.size();
  if (!report.all_finite()) throw DivergenceError(report);
  net_.zero_grad();
  backward(total);
  auto params = net_.trainable_parameters();
  sgd_step(std::span<Tensor<Scalar>>(params), config_.learning_rate, config_.weight_decay);
  net_.zero_grad();
  return report;
}

template <typename Scalar>
StepReport Trainer<Scalar>::train_step(const ImageMatrix& view_a, const ImageMatrix& view_b,
                                       std::size_t domain_index) {
  if (domain_index < 1) throw ParameterError("domain_index is 1-based");
  const auto xa = to_tensor<Scalar>(view_a);
  const auto xb = to_tensor<Scalar>(view_b);

  std::optional<MemoryBatch<Scalar>> memory;
  if (domain_index > 1 && !buffer_.empty()) {
    const auto drawn = buffer_.sample(config_.replay_batch());
    auto [s, d] = stack_view_a(std::span<const LatentPair<Scalar>>(drawn));
    memory = MemoryBatch<Scalar>{std::move(s), std::move(d)};
  }

  const auto losses = compute_step_losses(net_, xa, xb, memory, config_.alpha1, config_.alpha2, *ssl_loss_);
  StepReport report;
  report.domain_index = domain_index;
  report.l_ssl = static_cast<double>(losses.ssl.item());
  report.l_da1_data = static_cast<double>(losses.da1_data.item());
  if (losses.da1_mem) report.l_da1_mem = static_cast<double>(losses.da1_mem->item());
  if (losses.da2) report.l_da2 = static_cast<double>(losses.da2->item());
  report.total = static_cast<double>(losses.total.item());
  report = finish_step(report, losses.total);

  const auto& fa_s = losses.s_latent_a;
  const auto& fb_s = losses.s_latent_b;
  const auto& fa_d = losses.d_latent_a;
  const auto& fb_d = losses.d_latent_b;
  std::vector<LatentPair<Scalar>> latents;
  latents.reserve(static_cast<std::size_t>(fa_s.rows()));
  for (Index i = 0; i < fa_s.rows(); ++i) {
    latents.push_back({row_tensor(fa_s, i), row_tensor(fb_s, i), row_tensor(fa_d, i), row_tensor(fb_d, i),
                       static_cast<std::int64_t>(domain_index)});
  }
  buffer_.add_batch(std::span<const LatentPair<Scalar>>(latents), config_.sample_size);
  report.buffer_size = buffer_.size();
  return report;
}

template <typename Scalar>
StepReport Trainer<Scalar>::ssl_step(const ImageMatrix& view_a, const ImageMatrix& view_b, std::size_t domain_index) {
  if (domain_index < 1) throw ParameterError("domain_index is 1-based");
  const auto fa = net_.forward_full(to_tensor<Scalar>(view_a));
  const auto fb = net_.forward_full(to_tensor<Scalar>(view_b));
  const ViewPair<Scalar> pairs[] = {{fa.ssl_embedding, fb.ssl_embedding}};
  const auto loss = ssl_objective(std::span<const ViewPair<Scalar>>(pairs), *ssl_loss_);
  StepReport report;
  report.domain_index = domain_index;
  report.l_ssl = static_cast<double>(loss.item());
  report.total = report.l_ssl;
  return finish_step(report, loss);
}

namespace {

template <typename StepFn>
void run_epochs(DomainCursor& cursor, Index epochs, std::vector<StepReport>& reports, const ReportSink& sink,
                StepFn&& step) {
  for (Index e = 0; e < epochs; ++e) {
    cursor.begin_epoch();
    while (auto batch = cursor.next_batch()) {
      reports.push_back(step(*batch, cursor.domain_index()));
      if (sink) sink(reports.back());
    }
  }
}

}  // namespace

template <typename Scalar>
SequenceResult<Scalar> Trainer<Scalar>::train_sequence(DomainStream& stream, const ReportSink& sink) {
  if (!stream.has_next()) throw ContractError("train_sequence: stream has no domains");
  SequenceResult<Scalar> result;
  auto ssl = [this](const DomainBatch& b, std::size_t d) { return ssl_step(b.view_a, b.view_b, d); };
  auto full = [this](const DomainBatch& b, std::size_t d) { return train_step(b.view_a, b.view_b, d); };

  try {
    bool first = true;
    while (stream.has_next()) {
      auto cursor = stream.next_domain();
      if (first) {
        run_epochs(cursor, config_.pretrain_epochs, result.reports, sink, ssl);
        net_.freeze_below_replay();
        first = false;
      }
      run_epochs(cursor, config_.epochs_per_domain, result.reports, sink, full);
      result.checkpoints.push_back(net_.clone());
    }
  } catch (const DivergenceError& e) {
    if (sink) sink(e.report());
    throw;
  }
  return result;
}

template <typename Scalar>
StepReport train_step(DualNet<Scalar>& net, ReplayBuffer<Scalar>& buffer, const ImageMatrix& view_a,
                      const ImageMatrix& view_b, std::size_t domain_index, const TrainConfig& config) {
  Trainer<Scalar> trainer(net, buffer, config);
  return trainer.train_step(view_a, view_b, domain_index);
}

template <typename Scalar>
SequenceResult<Scalar> train_sequence(DualNet<Scalar>& net, ReplayBuffer<Scalar>& buffer, DomainStream& stream,
                                      const TrainConfig& config, const ReportSink& sink) {
  Trainer<Scalar> trainer(net, buffer, config);
  return trainer.train_sequence(stream, sink);
}

template <typename Scalar>
SequenceResult<Scalar> finetune_sequence(DualNet<Scalar>& net, DomainStream& stream, const TrainConfig& config,
                                         const ReportSink& sink, bool freeze_lower) {
  if (!stream.has_next()) throw ContractError("finetune_sequence: stream has no domains");
  ReplayBuffer<Scalar> unused(1, 0);
  Trainer<Scalar> trainer(net, unused, config);
  SequenceResult<Scalar> result;
  auto ssl = [&trainer](const DomainBatch& b, std::size_t d) { return trainer.ssl_step(b.view_a, b.view_b, d); };
  bool first = true;
  while (stream.has_next()) {
    auto cursor = stream.next_domain();
    if (first) {
      run_epochs(cursor, config.pretrain_epochs, result.reports, sink, ssl);
      if (freeze_lower) net.freeze_below_replay();
      first = false;
    }
    run_epochs(cursor, config.epochs_per_domain, result.reports, sink, ssl);
    result.checkpoints.push_back(net.clone());
  }
  return result;
}

#define LLEDA_INSTANTIATE(S)                                                                                        \
  template class Trainer<S>;                                                                                        \
  template StepLosses<S> compute_step_losses<S>(const DualNet<S>&, const Tensor<S>&, const Tensor<S>&,              \
                                                const std::optional<MemoryBatch<S>>&, double, double,               \
                                                const SslLoss<S>&, const BandwidthPlan&);                           \
  template void sgd_step<S>(std::span<Tensor<S>>, double, double);                                                  \
  template StepReport train_step<S>(DualNet<S>&, ReplayBuffer<S>&, const ImageMatrix&, const ImageMatrix&,          \
                                    std::size_t, const TrainConfig&);                                               \
  template SequenceResult<S> train_sequence<S>(DualNet<S>&, ReplayBuffer<S>&, DomainStream&, const TrainConfig&,    \
                                               const ReportSink&);                                                  \
  template SequenceResult<S> finetune_sequence<S>(DualNet<S>&, DomainStream&, const TrainConfig&, const ReportSink&, \
                                                  bool);

LLEDA_INSTANTIATE(float)
LLEDA_INSTANTIATE(double)

#undef LLEDA_INSTANTIATE

}  // namespace lleda
