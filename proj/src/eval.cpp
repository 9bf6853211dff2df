#include "lleda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lleda {

LabelKey issue_label_key() { return LabelKey(); }

std::string to_string(ProbeRepresentation r) {
  switch (r) {
    case ProbeRepresentation::slow: return "slow";
    case ProbeRepresentation::fast: return "fast";
    case ProbeRepresentation::concat: return "concat";
  }
  return "unknown";
}

void ProbeOptions::validate() const {
  if (iterations < 1) throw ParameterError("probe iterations must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("probe learning rate must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ParameterError("probe train fraction must be in (0, 1)");
}

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

double softmax_xent(const MatrixXd& x, const std::vector<int>& y, const MatrixXd& w, const RowVectorXd& b,
                    MatrixXd* grad_w, RowVectorXd* grad_b) {
  MatrixXd logits = (x * w).rowwise() + b;
  const Eigen::Index n = x.rows();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i).array() -= m;
    logits.row(i) = logits.row(i).array().exp().matrix();
    const double z = logits.row(i).sum();
    logits.row(i) /= z;
    loss -= std::log(std::max(logits(i, y[static_cast<std::size_t>(i)]), 1e-300));
  }
  loss /= static_cast<double>(n);
  if (grad_w) {
    for (Eigen::Index i = 0; i < n; ++i) logits(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    logits /= static_cast<double>(n);
    *grad_w = x.transpose() * logits;
    *grad_b = logits.colwise().sum();
  }
  return loss;
}

}  // namespace

ProbeResult linear_probe(const MatrixXd& train_reps, const GatedLabels& train_labels, const MatrixXd& test_reps,
                         const GatedLabels& test_labels, const ProbeOptions& options) {
  options.validate();
  const auto key = issue_label_key();
  const auto& ytr = train_labels.read(key);
  const auto& yte = test_labels.read(key);
  if (static_cast<Eigen::Index>(ytr.size()) != train_reps.rows() ||
      static_cast<Eigen::Index>(yte.size()) != test_reps.rows()) {
    throw DimensionError("linear_probe: label count differs from representation rows");
  }
  if (train_reps.cols() != test_reps.cols()) throw DimensionError("linear_probe: train/test feature widths differ");
  if (ytr.empty() || yte.empty()) throw InsufficientSamplesError("linear_probe: empty train or test split");
  int classes = 0;
  for (const auto* ys : {&ytr, &yte}) {
    for (int v : *ys) {
      if (v < 0) throw ParameterError("linear_probe: labels must be non-negative");
      classes = std::max(classes, v + 1);
    }
  }
  if (std::all_of(ytr.begin(), ytr.end(), [&](int v) { return v == ytr.front(); })) {
    throw DegenerateLabelsError("linear_probe: training labels hold a single class");
  }

  const RowVectorXd mu = train_reps.colwise().mean();
  RowVectorXd sd = ((train_reps.rowwise() - mu).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  }
  const MatrixXd xtr = (train_reps.rowwise() - mu).array().rowwise() / sd.array();
  const MatrixXd xte = (test_reps.rowwise() - mu).array().rowwise() / sd.array();

  MatrixXd w = MatrixXd::Zero(xtr.cols(), classes);
  RowVectorXd b = RowVectorXd::Zero(classes);
  MatrixXd gw;
  RowVectorXd gb;
  double lr = options.learning_rate;
  double loss = softmax_xent(xtr, ytr, w, b, &gw, &gb);
  for (int it = 0; it < options.iterations; ++it) {
    const MatrixXd w_next = w - lr * gw;
    const RowVectorXd b_next = b - lr * gb;
    MatrixXd gw_next;
    RowVectorXd gb_next;
    const double next = softmax_xent(xtr, ytr, w_next, b_next, &gw_next, &gb_next);
    if (next > loss || !std::isfinite(next)) {
      lr *= 0.5;
      continue;
    }
    w = w_next;
    b = b_next;
    gw = std::move(gw_next);
    gb = std::move(gb_next);
    loss = next;
  }

  const MatrixXd logits = (xte * w).rowwise() + b;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == yte[static_cast<std::size_t>(i)]) ++correct;
  }
  ProbeResult r;
  r.n_test = logits.rows();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_test);
  return r;
}

ProbeSplit stratified_split(const GatedLabels& labels, double train_fraction, std::uint64_t seed) {
  const auto& y = labels.read(issue_label_key());
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  Rng rng(seed);
  ProbeSplit split;
  for (auto& [cls, idx] : by_class) {
    const auto order = rng.permutation(idx.size());
    auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(idx.size())));
    if (idx.size() > 1) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t k = 0; k < order.size(); ++k) {
      (k < n_train ? split.train : split.test).push_back(idx[order[k]]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

template <typename Scalar>
MatrixXd probe_features(const DualNet<Scalar>& net, const ImageMatrix& images, ProbeRepresentation r) {
  const auto x = to_tensor<Scalar>(images);
  switch (r) {
    case ProbeRepresentation::slow: return net.slow_features(x).value().template cast<double>();
    case ProbeRepresentation::fast: return net.fast_features(x).value().template cast<double>();
    case ProbeRepresentation::concat: {
      const MatrixXd s = net.slow_features(x).value().template cast<double>();
      const MatrixXd d = net.fast_features(x).value().template cast<double>();
      MatrixXd out(s.rows(), s.cols() + d.cols());
      out << s, d;
      return out;
    }
  }
  throw ParameterError("unknown probe representation");
}

SequenceMetrics summarize(std::vector<std::vector<double>> accuracy) {
  const std::size_t t_count = accuracy.size();
  for (std::size_t t = 0; t < t_count; ++t) {
    if (accuracy[t].size() != t + 1) throw ContractError("accuracy matrix row " + std::to_string(t + 1) + " incomplete");
  }
  SequenceMetrics m;
  m.accuracy = std::move(accuracy);
  if (t_count == 0) return m;
  const auto& last = m.accuracy.back();
  double total = 0.0;
  for (double a : last) total += a;
  m.average = total / static_cast<double>(last.size());
  m.forgetting.resize(t_count);
  for (std::size_t d = 0; d < t_count; ++d) {
    double peak = last[d];
    for (std::size_t t = d; t < t_count; ++t) peak = std::max(peak, m.accuracy[t][d]);
    m.forgetting[d] = peak - last[d];
  }
  return m;
}

template <typename Scalar>
SequenceMetrics evaluate_sequence(std::span<const DualNet<Scalar>> checkpoints, const DomainStream& stream,
                                  const ProbeOptions& options) {
  options.validate();
  const std::size_t t_count = stream.num_domains();
  if (checkpoints.size() != t_count) {
    throw ContractError("evaluate_sequence: " + std::to_string(t_count) + " domains but " +
                        std::to_string(checkpoints.size()) + " checkpoints");
  }
  std::vector<ProbeSplit> splits;
  for (std::size_t d = 1; d <= t_count; ++d) {
    splits.push_back(stratified_split(stream.eval_set(d).labels, options.train_fraction, mix_seed(options.seed, d)));
  }
  std::vector<std::vector<double>> acc(t_count);
  for (std::size_t t = 1; t <= t_count; ++t) {
    for (std::size_t d = 1; d <= t; ++d) {
      const auto& set = stream.eval_set(d);
      const auto& split = splits[d - 1];
      const MatrixXd feats = probe_features(checkpoints[t - 1], set.images, options.representation);
      MatrixXd tr(static_cast<Eigen::Index>(split.train.size()), feats.cols());
      MatrixXd te(static_cast<Eigen::Index>(split.test.size()), feats.cols());
      for (std::size_t k = 0; k < split.train.size(); ++k) tr.row(static_cast<Eigen::Index>(k)) = feats.row(static_cast<Eigen::Index>(split.train[k]));
      for (std::size_t k = 0; k < split.test.size(); ++k) te.row(static_cast<Eigen::Index>(k)) = feats.row(static_cast<Eigen::Index>(split.test[k]));
      acc[t - 1].push_back(
          linear_probe(tr, set.labels.select(split.train), te, set.labels.select(split.test), options).accuracy);
    }
  }
  return summarize(std::move(acc));
}

template <typename Scalar>
MethodRun<Scalar> run_lleda(const NetworkConfig& net_config, DomainStream& stream, const TrainConfig& config,
                            const ProbeOptions& probe, const ReportSink& sink) {
  DualNet<Scalar> net(net_config, config.seed);
  ReplayBuffer<Scalar> buffer(config.buffer_capacity, mix_seed(config.seed, 0xb0f), config.buffer_mode);
  MethodRun<Scalar> run;
  run.training = train_sequence(net, buffer, stream, config, sink);
  run.metrics = evaluate_sequence(std::span<const DualNet<Scalar>>(run.training.checkpoints), stream, probe);
  return run;
}

template <typename Scalar>
MethodRun<Scalar> finetune_baseline(const NetworkConfig& net_config, DomainStream& stream, const TrainConfig& config,
                                    const ProbeOptions& probe, const ReportSink& sink) {
  DualNet<Scalar> net(net_config, config.seed);
  MethodRun<Scalar> run;
  run.training = finetune_sequence(net, stream, config, sink);
  run.metrics = evaluate_sequence(std::span<const DualNet<Scalar>>(run.training.checkpoints), stream, probe);
  return run;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string accuracy_matrix_csv(const SequenceMetrics& m) {
  std::ostringstream os;
  const std::size_t t_count = m.num_domains();
  os << "after_domain";
  for (std::size_t d = 1; d <= t_count; ++d) os << ",domain_" << d;
  os << '\n';
  for (std::size_t t = 0; t < t_count; ++t) {
    os << t + 1;
    for (std::size_t d = 0; d < t_count; ++d) {
      os << ',';
      if (d <= t) os << format_double(m.accuracy[t][d]);
    }
    os << '\n';
  }
  return os.str();
}

SequenceMetrics parse_accuracy_matrix_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("after_domain", 0) != 0) {
    throw FormatError("accuracy matrix: missing header", 0);
  }
  std::vector<std::vector<double>> acc;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    std::vector<double> values;
    while (std::getline(row, cell, ',')) {
      if (cell.empty()) break;
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("accuracy matrix: bad cell '" + cell + "'", offset);
      }
    }
    acc.push_back(std::move(values));
    offset += line.size() + 1;
  }
  return summarize(std::move(acc));
}

std::string summary_json(const SequenceMetrics& m) {
  nlohmann::ordered_json j;
  j["average"] = m.average;
  j["final_accuracy"] = m.accuracy.empty() ? std::vector<double>{} : m.accuracy.back();
  j["forgetting_per_domain"] = m.forgetting;
  return j.dump(2) + "\n";
}

#define LLEDA_INSTANTIATE(S)                                                                                       \
  template MatrixXd probe_features<S>(const DualNet<S>&, const ImageMatrix&, ProbeRepresentation);                 \
  template SequenceMetrics evaluate_sequence<S>(std::span<const DualNet<S>>, const DomainStream&,                  \
                                                const ProbeOptions&);                                              \
  template MethodRun<S> run_lleda<S>(const NetworkConfig&, DomainStream&, const TrainConfig&, const ProbeOptions&, \
                                     const ReportSink&);                                                           \
  template MethodRun<S> finetune_baseline<S>(const NetworkConfig&, DomainStream&, const TrainConfig&,              \
                                             const ProbeOptions&, const ReportSink&);

LLEDA_INSTANTIATE(float)
LLEDA_INSTANTIATE(double)

#undef LLEDA_INSTANTIATE

}  // namespace lleda
