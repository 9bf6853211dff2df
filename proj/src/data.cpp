#include "lleda/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lleda/serialize.hpp"

namespace lleda {

using Eigen::Index;

namespace {

double pixel_or_zero(const Eigen::RowVectorXd& img, Index side, Index y, Index x) {
  if (y < 0 || x < 0 || y >= side || x >= side) return 0.0;
  return img(y * side + x);
}

/// Bilinear sample, zero outside the image.
double bilinear_zero(const Eigen::RowVectorXd& img, Index side, double y, double x) {
  const double fy0 = std::floor(y);
  const double fx0 = std::floor(x);
  const auto y0 = static_cast<Index>(fy0);
  const auto x0 = static_cast<Index>(fx0);
  const double fy = y - fy0;
  const double fx = x - fx0;
  const double top = (1.0 - fx) * pixel_or_zero(img, side, y0, x0) + fx * pixel_or_zero(img, side, y0, x0 + 1);
  const double bottom =
      (1.0 - fx) * pixel_or_zero(img, side, y0 + 1, x0) + fx * pixel_or_zero(img, side, y0 + 1, x0 + 1);
  return (1.0 - fy) * top + fy * bottom;
}

/// Bilinear sample with edge clamping.
double bilinear_clamp(const Eigen::RowVectorXd& img, Index side, double y, double x) {
  const double max = static_cast<double>(side - 1);
  y = std::clamp(y, 0.0, max);
  x = std::clamp(x, 0.0, max);
  const auto y0 = static_cast<Index>(std::floor(y));
  const auto x0 = static_cast<Index>(std::floor(x));
  const Index y1 = std::min(y0 + 1, side - 1);
  const Index x1 = std::min(x0 + 1, side - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double top = (1.0 - fx) * img(y0 * side + x0) + fx * img(y0 * side + x1);
  const double bottom = (1.0 - fx) * img(y1 * side + x0) + fx * img(y1 * side + x1);
  return (1.0 - fy) * top + fy * bottom;
}

Eigen::RowVectorXd clamp01(Eigen::RowVectorXd v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

struct Blob {
  double y, x;
};

Eigen::RowVectorXd render_blobs(const std::vector<Blob>& blobs, const std::vector<double>& amps, double dy,
                                double dx, double sigma, Index side) {
  Eigen::RowVectorXd img = Eigen::RowVectorXd::Zero(side * side);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    const double cy = blobs[b].y + dy;
    const double cx = blobs[b].x + dx;
    for (Index y = 0; y < side; ++y) {
      for (Index x = 0; x < side; ++x) {
        const double r2 = (static_cast<double>(y) - cy) * (static_cast<double>(y) - cy) +
                          (static_cast<double>(x) - cx) * (static_cast<double>(x) - cx);
        img(y * side + x) += amps[b] * std::exp(-r2 * inv);
      }
    }
  }
  return img;
}

}  // namespace

// ---------------------------------------------------------------------------
// Transforms

std::string DomainTransform::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::identity: os << "identity"; break;
    case Kind::rotate: os << "rotate" << degrees; break;
    case Kind::pixel_permute: os << "permute" << permutation_seed; break;
    case Kind::channel_shift: os << "shift(" << bias << "," << scale << ")"; break;
    case Kind::noise: os << "noise" << sigma; break;
  }
  return os.str();
}

Eigen::RowVectorXd rotate_image(const Eigen::RowVectorXd& image, Index side, double degrees) {
  if (std::fmod(degrees, 360.0) == 0.0) return image;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double centre = static_cast<double>(side - 1) / 2.0;
  Eigen::RowVectorXd out(side * side);
  for (Index y = 0; y < side; ++y) {
    for (Index x = 0; x < side; ++x) {
      const double dx = static_cast<double>(x) - centre;
      const double dy = static_cast<double>(y) - centre;
      const double sx = c * dx + s * dy + centre;
      const double sy = -s * dx + c * dy + centre;
      out(y * side + x) = bilinear_zero(image, side, sy, sx);
    }
  }
  return out;
}

Eigen::RowVectorXd apply_transform(const Eigen::RowVectorXd& image, Index side, const DomainTransform& t, Rng& rng) {
  using Kind = DomainTransform::Kind;
  switch (t.kind) {
    case Kind::identity: return image;
    case Kind::rotate: return clamp01(rotate_image(image, side, t.degrees));
    case Kind::pixel_permute: {
      Rng perm_rng(t.permutation_seed);
      const auto perm = perm_rng.permutation(static_cast<std::size_t>(image.size()));
      Eigen::RowVectorXd out(image.size());
      for (Index k = 0; k < image.size(); ++k) out(k) = image(static_cast<Index>(perm[static_cast<std::size_t>(k)]));
      return out;
    }
    case Kind::channel_shift: return clamp01((image.array() * t.scale + t.bias).matrix());
    case Kind::noise: {
      Eigen::RowVectorXd out = image;
      for (Index k = 0; k < out.size(); ++k) out(k) += rng.normal(0.0, t.sigma);
      return clamp01(std::move(out));
    }
  }
  return image;
}

void SyntheticDomainSpec::validate() const {
  if (n_classes < 2) throw ParameterError("synthetic domain needs at least 2 classes");
  if (n_samples < 0 || n_eval < 0) throw ParameterError("sample counts must be non-negative");
  if (side < 4) throw ParameterError("image side must be at least 4");
  if (blobs_per_class < 1 || !(blob_sigma > 0)) throw ParameterError("invalid blob parameters");
  if (amplitude_min > amplitude_max || jitter < 0 || pixel_noise < 0) throw ParameterError("invalid sample noise");
  if (transform.kind == DomainTransform::Kind::noise && !(transform.sigma >= 0)) {
    throw ParameterError("noise transform sigma must be non-negative");
  }
}

DomainSource generate_domain(const SyntheticDomainSpec& spec) {
  spec.validate();
  const Index side = spec.side;
  const double lo = 2.5;
  const double hi = static_cast<double>(side) - 3.5;

  Rng proto_rng(spec.base_seed);
  std::vector<std::vector<Blob>> prototypes(static_cast<std::size_t>(spec.n_classes));
  for (auto& blobs : prototypes) {
    for (int b = 0; b < spec.blobs_per_class; ++b) blobs.push_back({proto_rng.uniform(lo, hi), proto_rng.uniform(lo, hi)});
  }

  auto make_set = [&](Index count, std::uint64_t stream_salt, ImageMatrix* scene) {
    Rng rng(mix_seed(spec.sample_seed, stream_salt));
    Rng transform_rng(mix_seed(spec.sample_seed, stream_salt + 1000));
    LabeledSet set;
    set.images.resize(count, side * side);
    if (scene) scene->resize(count, side * side);
    std::vector<int> labels(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
      const int cls = static_cast<int>(i % spec.n_classes);
      const auto& blobs = prototypes[static_cast<std::size_t>(cls)];
      std::vector<double> amps;
      for (std::size_t b = 0; b < blobs.size(); ++b) amps.push_back(rng.uniform(spec.amplitude_min, spec.amplitude_max));
      const double dy = spec.jitter > 0 ? rng.uniform(-spec.jitter, spec.jitter) : 0.0;
      const double dx = spec.jitter > 0 ? rng.uniform(-spec.jitter, spec.jitter) : 0.0;
      Eigen::RowVectorXd img = render_blobs(blobs, amps, dy, dx, spec.blob_sigma, side);
      if (spec.pixel_noise > 0) {
        for (Index k = 0; k < img.size(); ++k) img(k) += rng.normal(0.0, spec.pixel_noise);
      }
      img = clamp01(std::move(img));
      if (scene) scene->row(i) = img;
      set.images.row(i) = apply_transform(img, side, spec.transform, transform_rng);
      labels[static_cast<std::size_t>(i)] = cls;
    }
    set.labels = GatedLabels(std::move(labels));
    return set;
  };

  DomainSource src;
  src.name = spec.transform.name();
  src.side = side;
  const bool keep_scene = spec.augment_before_transform && spec.transform.kind != DomainTransform::Kind::identity;
  src.train = make_set(spec.n_samples, 1, keep_scene ? &src.train_scene : nullptr);
  src.eval = make_set(spec.n_eval, 2, nullptr);
  if (keep_scene) src.sensor = spec.transform;
  return src;
}

// ---------------------------------------------------------------------------
// Augmentation

void AugmentationPolicy::validate() const {
  if (!(crop_scale_min > 0) || crop_scale_min > crop_scale_max || crop_scale_max > 1.0) {
    throw ParameterError("crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (flip_probability < 0 || flip_probability > 1) throw ParameterError("flip probability must be in [0, 1]");
  if (noise_sigma < 0) throw ParameterError("augmentation noise must be non-negative");
  if (cutout < 0) throw ParameterError("cutout size must be non-negative");
}

Eigen::RowVectorXd augment_image(const Eigen::RowVectorXd& image, Index side, const AugmentationPolicy& policy,
                                 Rng& rng) {
  const double fside = static_cast<double>(side);
  Eigen::RowVectorXd out = image;

  const double scale = policy.crop_scale_max > policy.crop_scale_min
                           ? rng.uniform(policy.crop_scale_min, policy.crop_scale_max)
                           : policy.crop_scale_min;
  if (scale < 1.0) {
    const double crop = scale * fside;
    const double y0 = rng.uniform(0.0, fside - crop);
    const double x0 = rng.uniform(0.0, fside - crop);
    const double step = crop / fside;
    for (Index y = 0; y < side; ++y) {
      for (Index x = 0; x < side; ++x) {
        const double sy = y0 + (static_cast<double>(y) + 0.5) * step - 0.5;
        const double sx = x0 + (static_cast<double>(x) + 0.5) * step - 0.5;
        out(y * side + x) = bilinear_clamp(image, side, sy, sx);
      }
    }
  }

  if (rng.bernoulli(policy.flip_probability)) {
    for (Index y = 0; y < side; ++y) out.segment(y * side, side).reverseInPlace();
  }

  if (policy.noise_sigma > 0) {
    for (Index k = 0; k < out.size(); ++k) out(k) += rng.normal(0.0, policy.noise_sigma);
  }

  if (policy.cutout > 0 && policy.cutout <= side) {
    const Index top = static_cast<Index>(rng.index(static_cast<std::size_t>(side - policy.cutout + 1)));
    const Index left = static_cast<Index>(rng.index(static_cast<std::size_t>(side - policy.cutout + 1)));
    for (Index y = top; y < top + policy.cutout; ++y) out.segment(y * side + left, policy.cutout).setZero();
  }
  return clamp01(std::move(out));
}

std::pair<ImageMatrix, ImageMatrix> make_views(const ImageMatrix& x, Index side, const AugmentationPolicy& policy,
                                               Rng& rng) {
  policy.validate();
  if (x.cols() != side * side) throw DimensionError("make_views: rows must hold side*side pixels");
  ImageMatrix a(x.rows(), x.cols());
  ImageMatrix b(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Eigen::RowVectorXd img = x.row(i);
    a.row(i) = augment_image(img, side, policy, rng);
    b.row(i) = augment_image(img, side, policy, rng);
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// IDX

ImageMatrix read_idx_images(const std::filesystem::path& path, Index* rows_out, Index* cols_out) {
  const Bytes bytes = read_file(path);
  ByteReader r(bytes);
  const std::uint32_t magic = r.u32_be();
  if (magic != 0x00000803) throw FormatError("not an IDX image file (bad magic)", 0);
  const std::uint32_t n = r.u32_be();
  const std::uint32_t rows = r.u32_be();
  const std::uint32_t cols = r.u32_be();
  const std::uint64_t pixels = std::uint64_t{n} * rows * cols;
  if (r.remaining() < pixels) r.fail("IDX image payload truncated");
  ImageMatrix images(n, static_cast<Index>(rows) * cols);
  auto payload = r.raw(pixels);
  for (std::uint64_t k = 0; k < pixels; ++k) images.data()[k] = static_cast<double>(payload[k]) / 255.0;
  if (!r.done()) r.fail("trailing bytes after IDX image payload");
  if (rows_out) *rows_out = rows;
  if (cols_out) *cols_out = cols;
  return images;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  ByteReader r(bytes);
  const std::uint32_t magic = r.u32_be();
  if (magic != 0x00000801) throw FormatError("not an IDX label file (bad magic)", 0);
  const std::uint32_t n = r.u32_be();
  if (r.remaining() < n) r.fail("IDX label payload truncated");
  auto payload = r.raw(n);
  if (!r.done()) r.fail("trailing bytes after IDX label payload");
  return std::vector<int>(payload.begin(), payload.end());
}

DomainSource load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels,
                      double eval_fraction) {
  if (eval_fraction < 0 || eval_fraction > 1) throw ParameterError("eval_fraction must be in [0, 1]");
  Index rows = 0, cols = 0;
  ImageMatrix all = read_idx_images(images, &rows, &cols);
  std::vector<int> lab;
  if (labels) {
    lab = read_idx_labels(*labels);
    if (static_cast<Index>(lab.size()) != all.rows()) {
      // The item count field sits right after the 4-byte magic.
      throw FormatError("label count " + std::to_string(lab.size()) + " does not match image count " +
                            std::to_string(all.rows()),
                        4);
    }
  }
  if (rows != cols) throw ParameterError("IDX images must be square");

  DomainSource src;
  src.name = images.filename().string();
  src.side = rows;
  const Index n = all.rows();
  const Index n_eval = static_cast<Index>(std::llround(static_cast<double>(n) * eval_fraction));
  const Index n_train = n - n_eval;
  src.train.images = all.topRows(n_train);
  src.eval.images = all.bottomRows(n_eval);
  if (!lab.empty()) {
    src.train.labels = GatedLabels(std::vector<int>(lab.begin(), lab.begin() + n_train));
    src.eval.labels = GatedLabels(std::vector<int>(lab.begin() + n_train, lab.end()));
  }
  return src;
}

// ---------------------------------------------------------------------------
// Stream

DomainStream::DomainStream(std::vector<DomainSource> domains, StreamOptions options)
    : domains_(std::move(domains)), options_(std::move(options)), rng_(options_.seed) {
  if (domains_.empty()) throw ContractError("a domain stream needs at least one domain");
  if (options_.batch_size < 1) throw ParameterError("batch size must be positive");
  options_.augmentation.validate();
  for (const auto& d : domains_) {
    if (d.input_dim() != domains_.front().input_dim() || d.train.images.cols() != d.input_dim()) {
      throw DimensionError("all domains of a stream must share one input dimension");
    }
  }
}

DomainCursor DomainStream::next_domain() {
  if (!has_next()) throw ContractError("domain stream exhausted");
  ++active_;
  return DomainCursor(this, active_);
}

const LabeledSet& DomainStream::training_pool(std::size_t domain_index) const {
  if (domain_index < active_) {
    throw SealedDomainError("training data of domain " + std::to_string(domain_index) + " is sealed");
  }
  if (domain_index != active_) throw ContractError("domain " + std::to_string(domain_index) + " is not active yet");
  return domains_[domain_index - 1].train;
}

const LabeledSet& DomainStream::eval_set(std::size_t domain_index) const {
  if (domain_index < 1 || domain_index > domains_.size()) throw ContractError("no such domain");
  return domains_[domain_index - 1].eval;
}

void DomainCursor::check() const {
  if (stream_->active_ != index_) {
    throw SealedDomainError("domain " + std::to_string(index_) + " was sealed when the stream advanced");
  }
}

std::size_t DomainCursor::batches_per_epoch() const {
  check();
  const auto& pool = stream_->training_pool(index_);
  return static_cast<std::size_t>(pool.size() / stream_->options_.batch_size);
}

void DomainCursor::begin_epoch() {
  check();
  order_ = stream_->rng_.permutation(static_cast<std::size_t>(stream_->training_pool(index_).size()));
  position_ = 0;
}

std::optional<DomainBatch> DomainCursor::next_batch() {
  check();
  const auto& pool = stream_->training_pool(index_);
  const auto bs = static_cast<std::size_t>(stream_->options_.batch_size);
  if (order_.size() != static_cast<std::size_t>(pool.size())) begin_epoch();
  if (position_ + bs > order_.size()) return std::nullopt;

  DomainBatch batch;
  batch.raw.resize(static_cast<Index>(bs), pool.images.cols());
  std::vector<std::size_t> picked(order_.begin() + static_cast<std::ptrdiff_t>(position_),
                                  order_.begin() + static_cast<std::ptrdiff_t>(position_ + bs));
  for (std::size_t k = 0; k < bs; ++k) batch.raw.row(static_cast<Index>(k)) = pool.images.row(static_cast<Index>(picked[k]));
  position_ += bs;
  const auto& source = stream_->domains_[index_ - 1];
  if (source.train_scene.size() == 0) {
    auto [a, b] = make_views(batch.raw, source.side, stream_->options_.augmentation, stream_->rng_);
    batch.view_a = std::move(a);
    batch.view_b = std::move(b);
  } else {
    ImageMatrix scene(batch.raw.rows(), batch.raw.cols());
    for (std::size_t k = 0; k < bs; ++k) scene.row(static_cast<Index>(k)) = source.train_scene.row(static_cast<Index>(picked[k]));
    auto [a, b] = make_views(scene, source.side, stream_->options_.augmentation, stream_->rng_);
    for (Index k = 0; k < a.rows(); ++k) {
      a.row(k) = apply_transform(a.row(k), source.side, source.sensor, stream_->rng_);
      b.row(k) = apply_transform(b.row(k), source.side, source.sensor, stream_->rng_);
    }
    batch.view_a = std::move(a);
    batch.view_b = std::move(b);
  }
  batch.labels = pool.labels.select(picked);
  return batch;
}

}  // namespace lleda
