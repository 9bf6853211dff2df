#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lleda/errors.hpp"
#include "lleda/rng.hpp"

namespace lleda {

/// Flattened images, one per row, values in [0, 1].
using ImageMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Label gating

/// Capability required to read labels. Only the evaluation module issues it,
/// so label access anywhere else is a compile error.
class LabelKey {
 private:
  LabelKey() = default;
  friend LabelKey issue_label_key();
};

/// Defined in the evaluation module.
LabelKey issue_label_key();

class GatedLabels {
 public:
  GatedLabels() = default;
  explicit GatedLabels(std::vector<int> labels) : labels_(std::move(labels)) {}

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::vector<int>& read(const LabelKey&) const { return labels_; }

  /// Labels at `indices`, still gated.
  GatedLabels select(const std::vector<std::size_t>& indices) const {
    std::vector<int> out;
    if (labels_.empty()) return GatedLabels(std::move(out));
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels_.at(i));
    return GatedLabels(std::move(out));
  }

 private:
  std::vector<int> labels_;
};

struct LabeledSet {
  ImageMatrix images;
  GatedLabels labels;  // empty when unlabeled

  Eigen::Index size() const { return images.rows(); }
};

// ---------------------------------------------------------------------------
// Synthetic domains

struct DomainTransform {
  enum class Kind { identity, rotate, pixel_permute, channel_shift, noise };

  Kind kind = Kind::identity;
  double degrees = 0.0;
  std::uint64_t permutation_seed = 0;
  double bias = 0.0;
  double scale = 1.0;
  double sigma = 0.0;

  static DomainTransform identity() { return {}; }
  static DomainTransform rotate(double deg) { return {Kind::rotate, deg}; }
  static DomainTransform pixel_permute(std::uint64_t seed) { return {Kind::pixel_permute, 0.0, seed}; }
  static DomainTransform channel_shift(double bias, double scale) {
    return {Kind::channel_shift, 0.0, 0, bias, scale};
  }
  static DomainTransform noise(double sigma) { return {Kind::noise, 0.0, 0, 0.0, 1.0, sigma}; }

  std::string name() const;
};

/// One domain: a training pool (streamed unlabeled to the trainer) and a
/// held-out evaluation set used only by linear probes.
struct DomainSource {
  std::string name;
  Eigen::Index side = 16;  // images are side x side
  LabeledSet train;
  LabeledSet eval;
  /// When non-empty: the training images before `sensor` was applied. Views
  /// are then augmented in this space and passed through `sensor` afterwards.
  ImageMatrix train_scene;
  DomainTransform sensor;

  Eigen::Index input_dim() const { return side * side; }
};

struct SyntheticDomainSpec {
  std::uint64_t base_seed = 0;    // class prototypes (shared by every domain of a sequence)
  std::uint64_t sample_seed = 0;  // per-sample variation
  int n_classes = 10;
  Eigen::Index n_samples = 1024;  // training pool
  Eigen::Index n_eval = 1000;     // held-out, labeled
  Eigen::Index side = 16;
  int blobs_per_class = 2;
  double blob_sigma = 1.6;
  double jitter = 1.0;            // max prototype translation, pixels
  double amplitude_min = 0.7;
  double amplitude_max = 1.3;
  double pixel_noise = 0.1;
  DomainTransform transform;
  /// Keep the pre-transform training images so that augmentation happens
  /// before the domain transform.
  bool augment_before_transform = false;

  void validate() const;
};

/// Deterministic dataset: class prototypes made of Gaussian blobs on a
/// side x side grid, per-sample jitter and noise, then the domain transform.
DomainSource generate_domain(const SyntheticDomainSpec& spec);

/// Applies `t` to one flattened side x side image; `rng` is used by the
/// noise transform only.
Eigen::RowVectorXd apply_transform(const Eigen::RowVectorXd& image, Eigen::Index side, const DomainTransform& t,
                                   Rng& rng);

/// Bilinear rotation about the image centre, zero fill outside.
Eigen::RowVectorXd rotate_image(const Eigen::RowVectorXd& image, Eigen::Index side, double degrees);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentationPolicy {
  double crop_scale_min = 0.6;
  double crop_scale_max = 1.0;
  double flip_probability = 0.0;  // off for digit-like domains
  double noise_sigma = 0.05;
  Eigen::Index cutout = 4;

  static AugmentationPolicy none() { return {1.0, 1.0, 0.0, 0.0, 0}; }
  void validate() const;
};

/// One random draw from `policy` applied to a single image.
Eigen::RowVectorXd augment_image(const Eigen::RowVectorXd& image, Eigen::Index side, const AugmentationPolicy& policy,
                                 Rng& rng);

/// Two independently augmented views of every row of `x`, clamped to [0, 1].
std::pair<ImageMatrix, ImageMatrix> make_views(const ImageMatrix& x, Eigen::Index side,
                                               const AugmentationPolicy& policy, Rng& rng);

// ---------------------------------------------------------------------------
// IDX files

/// Reads an IDX image file (magic 0x00000803): pixels scaled to [0, 1], one
/// flattened image per row. Returns the image side through `side_out`.
ImageMatrix read_idx_images(const std::filesystem::path& path, Eigen::Index* rows_out = nullptr,
                            Eigen::Index* cols_out = nullptr);
/// Reads an IDX label file (magic 0x00000801).
std::vector<int> read_idx_labels(const std::filesystem::path& path);

/// Builds a domain from IDX files. The last `eval_fraction` of the items form
/// the evaluation set. Images must be square.
DomainSource load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels,
                      double eval_fraction = 0.2);

// ---------------------------------------------------------------------------
// Stream

struct DomainBatch {
  ImageMatrix view_a;
  ImageMatrix view_b;
  ImageMatrix raw;
  GatedLabels labels;
};

struct StreamOptions {
  Eigen::Index batch_size = 32;
  AugmentationPolicy augmentation;
  std::uint64_t seed = 0;
};

class DomainStream;

/// Training access to the active domain. Every call fails with
/// SealedDomainError once the stream has moved past this domain.
class DomainCursor {
 public:
  std::size_t domain_index() const { return index_; }  // 1-based
  std::size_t batches_per_epoch() const;
  /// Reshuffles the pool; call at the start of every epoch.
  void begin_epoch();
  /// Next full batch of the current epoch, or nullopt when exhausted.
  std::optional<DomainBatch> next_batch();

 private:
  friend class DomainStream;
  DomainCursor(DomainStream* stream, std::size_t index) : stream_(stream), index_(index) {}
  void check() const;

  DomainStream* stream_;
  std::size_t index_;
  std::vector<std::size_t> order_;
  std::size_t position_ = 0;
};

/// Ordered domains with single-domain access: advancing seals every earlier
/// domain's training pool. Held-out evaluation sets stay readable.
class DomainStream {
 public:
  DomainStream(std::vector<DomainSource> domains, StreamOptions options);

  std::size_t num_domains() const { return domains_.size(); }
  bool has_next() const { return active_ < domains_.size(); }
  /// Index of the active domain (1-based), 0 before the first advance.
  std::size_t active() const { return active_; }
  /// Advances to the next domain and returns its cursor.
  DomainCursor next_domain();

  /// Raw training pool of the active domain.
  const LabeledSet& training_pool(std::size_t domain_index) const;
  const LabeledSet& eval_set(std::size_t domain_index) const;
  const DomainSource& source_info(std::size_t domain_index) const { return domains_.at(domain_index - 1); }
  Eigen::Index input_dim() const { return domains_.front().input_dim(); }
  const StreamOptions& options() const { return options_; }

 private:
  friend class DomainCursor;
  std::vector<DomainSource> domains_;
  StreamOptions options_;
  std::size_t active_ = 0;
  Rng rng_;
};

}  // namespace lleda
