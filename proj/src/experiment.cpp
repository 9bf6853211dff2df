#include "lleda/experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace lleda {

std::string to_string(Method m) {
  switch (m) {
    case Method::lleda: return "lleda";
    case Method::baseline: return "baseline";
    case Method::both: return "both";
  }
  return "unknown";
}

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  probe.seed = s;
  data.base_seed = s;
}

namespace {

std::string format_issues(const std::vector<ConfigIssue>& issues) {
  std::ostringstream os;
  os << issues.size() << " config error" << (issues.size() == 1 ? "" : "s");
  for (const auto& i : issues) {
    os << "\n  ";
    if (i.line > 0) os << "line " << i.line << ": ";
    if (!i.key.empty()) os << i.key << ": ";
    os << i.message;
  }
  return os.str();
}

class Reader {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const YAML::Node& node, const std::string& key, const std::string& message) {
    const int line = node.IsDefined() && node.Mark().line >= 0 ? node.Mark().line + 1 : 0;
    issues.push_back({line, key, message});
  }

  /// Returns false (after recording an issue) unless `node` is a map; rejects
  /// any key not in `allowed`.
  bool check_map(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) {
      fail(node, path, "expected a mapping");
      return false;
    }
    for (auto it = node.begin(); it != node.end(); ++it) {
      const auto key = it->first.as<std::string>();
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) fail(it->first, join(path, key), "unknown key");
    }
    return true;
  }

  template <typename T>
  void get(const YAML::Node& map, const std::string& path, const char* key, T& target) {
    const YAML::Node node = map[key];
    if (!node.IsDefined()) return;
    try {
      target = node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, join(path, key), "expected " + type_name<T>() + ", got '" + scalar_text(node) + "'");
    }
  }

  template <typename Fn>
  void validate(const YAML::Node& where, const std::string& path, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      fail(where, path, e.what());
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  static std::string scalar_text(const YAML::Node& node) { return node.IsScalar() ? node.Scalar() : "<non-scalar>"; }

  template <typename T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) {
      return "a boolean";
    } else if constexpr (std::is_integral_v<T>) {
      return std::is_unsigned_v<T> ? "a non-negative integer" : "an integer";
    } else if constexpr (std::is_floating_point_v<T>) {
      return "a number";
    } else if constexpr (std::is_same_v<T, std::string>) {
      return "a string";
    } else {
      return "a list of integers";
    }
  }
};

template <typename Enum>
void get_enum(Reader& r, const YAML::Node& map, const std::string& path, const char* key, Enum& target,
              std::initializer_list<std::pair<const char*, Enum>> options) {
  std::string text;
  const YAML::Node node = map[key];
  if (!node.IsDefined()) return;
  r.get(map, path, key, text);
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (text == name) {
      target = value;
      return;
    }
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  r.fail(node, Reader::join(path, key), "'" + text + "' is not one of {" + allowed + "}");
}

void parse_network(Reader& r, const YAML::Node& n, NetworkConfig& c) {
  const std::string p = "network";
  if (!r.check_map(n, p, {"widths", "replay_index", "projector_hidden", "projector_out", "freeze_slow_lower"})) return;
  r.get(n, p, "widths", c.widths);
  r.get(n, p, "replay_index", c.replay_index);
  r.get(n, p, "projector_hidden", c.projector_hidden);
  r.get(n, p, "projector_out", c.projector_out);
  r.get(n, p, "freeze_slow_lower", c.freeze_slow_lower);
}

void parse_train(Reader& r, const YAML::Node& n, TrainConfig& c) {
  const std::string p = "train";
  if (!r.check_map(n, p,
                   {"epochs_per_domain", "pretrain_epochs", "batch_size", "learning_rate", "weight_decay", "alpha1",
                    "alpha2", "buffer_capacity", "sample_size", "replay_batch_size", "buffer_mode"})) {
    return;
  }
  r.get(n, p, "epochs_per_domain", c.epochs_per_domain);
  r.get(n, p, "pretrain_epochs", c.pretrain_epochs);
  r.get(n, p, "batch_size", c.batch_size);
  r.get(n, p, "learning_rate", c.learning_rate);
  r.get(n, p, "weight_decay", c.weight_decay);
  r.get(n, p, "alpha1", c.alpha1);
  r.get(n, p, "alpha2", c.alpha2);
  r.get(n, p, "buffer_capacity", c.buffer_capacity);
  r.get(n, p, "sample_size", c.sample_size);
  r.get(n, p, "replay_batch_size", c.replay_batch_size);
  get_enum(r, n, p, "buffer_mode", c.buffer_mode, {{"fill", BufferMode::fill}, {"quota", BufferMode::quota}});
}

void parse_vicreg(Reader& r, const YAML::Node& n, VicRegWeights& w) {
  const std::string p = "vicreg";
  if (!r.check_map(n, p, {"lambda", "mu", "nu", "gamma", "epsilon"})) return;
  r.get(n, p, "lambda", w.lambda);
  r.get(n, p, "mu", w.mu);
  r.get(n, p, "nu", w.nu);
  r.get(n, p, "gamma", w.gamma);
  r.get(n, p, "epsilon", w.epsilon);
}

void parse_augmentation(Reader& r, const YAML::Node& n, AugmentationPolicy& a) {
  const std::string p = "augmentation";
  if (!r.check_map(n, p, {"crop_scale_min", "crop_scale_max", "flip_probability", "noise_sigma", "cutout"})) return;
  r.get(n, p, "crop_scale_min", a.crop_scale_min);
  r.get(n, p, "crop_scale_max", a.crop_scale_max);
  r.get(n, p, "flip_probability", a.flip_probability);
  r.get(n, p, "noise_sigma", a.noise_sigma);
  r.get(n, p, "cutout", a.cutout);
}

void parse_probe(Reader& r, const YAML::Node& n, ProbeOptions& o) {
  const std::string p = "probe";
  if (!r.check_map(n, p, {"iterations", "learning_rate", "train_fraction", "representation"})) return;
  r.get(n, p, "iterations", o.iterations);
  r.get(n, p, "learning_rate", o.learning_rate);
  r.get(n, p, "train_fraction", o.train_fraction);
  get_enum(r, n, p, "representation", o.representation,
           {{"slow", ProbeRepresentation::slow},
            {"fast", ProbeRepresentation::fast},
            {"concat", ProbeRepresentation::concat}});
}

void parse_generator(Reader& r, const YAML::Node& n, SyntheticDomainSpec& s) {
  const std::string p = "data.generator";
  if (!r.check_map(n, p,
                   {"n_classes", "n_samples", "n_eval", "side", "blobs_per_class", "blob_sigma", "jitter",
                    "amplitude_min", "amplitude_max", "pixel_noise", "augment_before_transform"})) {
    return;
  }
  r.get(n, p, "n_classes", s.n_classes);
  r.get(n, p, "n_samples", s.n_samples);
  r.get(n, p, "n_eval", s.n_eval);
  r.get(n, p, "side", s.side);
  r.get(n, p, "blobs_per_class", s.blobs_per_class);
  r.get(n, p, "blob_sigma", s.blob_sigma);
  r.get(n, p, "jitter", s.jitter);
  r.get(n, p, "amplitude_min", s.amplitude_min);
  r.get(n, p, "amplitude_max", s.amplitude_max);
  r.get(n, p, "pixel_noise", s.pixel_noise);
  r.get(n, p, "augment_before_transform", s.augment_before_transform);
}

DomainConfig parse_domain(Reader& r, const YAML::Node& n, const std::string& p) {
  DomainConfig d;
  if (!r.check_map(n, p,
                   {"transform", "degrees", "permutation_seed", "bias", "scale", "sigma", "sample_group", "idx_images",
                    "idx_labels", "eval_fraction"})) {
    return d;
  }
  using K = DomainTransform::Kind;
  K kind = K::identity;
  get_enum(r, n, p, "transform", kind,
           {{"identity", K::identity},
            {"rotate", K::rotate},
            {"pixel_permute", K::pixel_permute},
            {"channel_shift", K::channel_shift},
            {"noise", K::noise}});
  d.transform.kind = kind;
  r.get(n, p, "degrees", d.transform.degrees);
  r.get(n, p, "permutation_seed", d.transform.permutation_seed);
  r.get(n, p, "bias", d.transform.bias);
  r.get(n, p, "scale", d.transform.scale);
  r.get(n, p, "sigma", d.transform.sigma);
  if (n["sample_group"].IsDefined()) {
    std::uint64_t g = 0;
    r.get(n, p, "sample_group", g);
    d.sample_group = g;
  }
  std::string path;
  if (n["idx_images"].IsDefined()) {
    r.get(n, p, "idx_images", path);
    d.idx_images = path;
  }
  if (n["idx_labels"].IsDefined()) {
    r.get(n, p, "idx_labels", path);
    d.idx_labels = path;
  }
  r.get(n, p, "eval_fraction", d.eval_fraction);
  if (d.idx_labels && !d.idx_images) r.fail(n, p, "idx_labels given without idx_images");
  if (d.idx_images && kind != K::identity) r.fail(n, p, "IDX domains take no transform");
  if (!(d.eval_fraction > 0.0 && d.eval_fraction < 1.0)) r.fail(n["eval_fraction"], p + ".eval_fraction", "must be in (0, 1)");
  return d;
}

void parse_data(Reader& r, const YAML::Node& n, ExperimentConfig& c) {
  if (!r.check_map(n, "data", {"generator", "domains"})) return;
  if (n["generator"].IsDefined()) parse_generator(r, n["generator"], c.data);
  if (!n["domains"].IsDefined()) return;
  const YAML::Node list = n["domains"];
  if (!list.IsSequence() || list.size() == 0) {
    r.fail(list, "data.domains", "expected a non-empty list");
    return;
  }
  c.domains.clear();
  for (std::size_t i = 0; i < list.size(); ++i) {
    c.domains.push_back(parse_domain(r, list[i], "data.domains[" + std::to_string(i) + "]"));
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues) : Error(format_issues(issues)), issues_(std::move(issues)) {}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.train.learning_rate = 0.01;
  c.train.vicreg.lambda = 1.0;
  c.train.replay_batch_size = 32;
  c.data.pixel_noise = 0.3;
  c.data.jitter = 2.5;
  c.data.n_eval = 2500;
  for (const auto& t : {DomainTransform::identity(), DomainTransform::rotate(45.0), DomainTransform::pixel_permute(7)}) {
    DomainConfig d;
    d.transform = t;
    c.domains.push_back(d);
  }
  c.apply_seed(c.seed);
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError({{e.mark.line + 1, "", e.msg}});
  }
  ExperimentConfig c = default_config();
  if (root.IsNull()) return c;
  Reader r;
  if (!r.check_map(root, "", {"seed", "method", "output_dir", "network", "train", "vicreg", "augmentation", "probe",
                              "data"})) {
    throw ConfigError(r.issues);
  }
  std::uint64_t seed = c.seed;
  r.get(root, "", "seed", seed);
  get_enum(r, root, "", "method", c.method,
           {{"lleda", Method::lleda}, {"baseline", Method::baseline}, {"both", Method::both}});
  std::string out = c.output_dir.string();
  r.get(root, "", "output_dir", out);
  c.output_dir = out;
  if (root["network"].IsDefined()) parse_network(r, root["network"], c.network);
  if (root["train"].IsDefined()) parse_train(r, root["train"], c.train);
  if (root["vicreg"].IsDefined()) parse_vicreg(r, root["vicreg"], c.train.vicreg);
  if (root["augmentation"].IsDefined()) parse_augmentation(r, root["augmentation"], c.augmentation);
  if (root["probe"].IsDefined()) parse_probe(r, root["probe"], c.probe);
  if (root["data"].IsDefined()) parse_data(r, root["data"], c);
  c.apply_seed(seed);
  c.network.input_dim = c.data.side * c.data.side;

  r.validate(root["network"], "network", [&] { c.network.validate(); });
  r.validate(root["train"], "train", [&] { c.train.validate(); });
  r.validate(root["augmentation"], "augmentation", [&] { c.augmentation.validate(); });
  r.validate(root["probe"], "probe", [&] { c.probe.validate(); });
  r.validate(root["data"], "data.generator", [&] { c.data.validate(); });
  if (!r.issues.empty()) throw ConfigError(r.issues);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{0, "", "cannot read config file '" + path.string() + "'"}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<DomainSource> build_domains(const ExperimentConfig& config) {
  if (config.domains.empty()) throw ContractError("no domains configured");
  std::vector<DomainSource> out;
  for (std::size_t i = 0; i < config.domains.size(); ++i) {
    const auto& d = config.domains[i];
    if (d.idx_images) {
      out.push_back(load_idx(*d.idx_images, d.idx_labels, d.eval_fraction));
      continue;
    }
    SyntheticDomainSpec spec = config.data;
    spec.base_seed = config.seed;
    spec.sample_seed = mix_seed(config.seed, d.sample_group.value_or(i + 1));
    spec.transform = d.transform;
    out.push_back(generate_domain(spec));
  }
  return out;
}

MethodRun<float> run_method(const ExperimentConfig& config, Method method, const ReportSink& sink) {
  StreamOptions options;
  options.batch_size = config.train.batch_size;
  options.augmentation = config.augmentation;
  options.seed = mix_seed(config.seed, 0x57);
  DomainStream stream(build_domains(config), options);
  NetworkConfig net = config.network;
  net.input_dim = stream.input_dim();
  switch (method) {
    case Method::lleda: return run_lleda<float>(net, stream, config.train, config.probe, sink);
    case Method::baseline: return finetune_baseline<float>(net, stream, config.train, config.probe, sink);
    case Method::both: break;
  }
  throw ContractError("run_method runs one method at a time");
}

std::string step_report_json(const StepReport& r) {
  nlohmann::ordered_json j;
  j["domain_index"] = r.domain_index;
  j["step"] = r.step;
  j["l_ssl"] = r.l_ssl;
  j["l_da1_data"] = r.l_da1_data;
  j["l_da1_mem"] = r.l_da1_mem;
  j["l_da2"] = r.l_da2;
  j["total"] = r.total;
  j["buffer_size"] = r.buffer_size;
  return j.dump();
}

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int run_experiment(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  std::ofstream log(config.output_dir / "run.log", std::ios::app);
  log << timestamp() << " start seed=" << config.seed << " method=" << to_string(config.method) << '\n';

  std::vector<Method> methods;
  if (config.method != Method::baseline) methods.push_back(Method::lleda);
  if (config.method != Method::lleda) methods.push_back(Method::baseline);

  for (Method m : methods) {
    const fs::path dir = config.output_dir / to_string(m);
    fs::create_directories(dir / "checkpoints");
    std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    StepReport last;
    auto sink = [&](const StepReport& r) {
      metrics << step_report_json(r) << '\n';
      last = r;
    };
    log << timestamp() << " " << to_string(m) << " training" << '\n';
    MethodRun<float> run;
    try {
      run = run_method(config, m, sink);
    } catch (const DivergenceError& e) {
      metrics.flush();
      err << "diverged (" << to_string(m) << "): " << e.what() << '\n'
          << "last step report: " << step_report_json(e.report()) << '\n';
      log << timestamp() << " " << to_string(m) << " diverged" << '\n';
      return 3;
    }
    for (std::size_t t = 0; t < run.training.checkpoints.size(); ++t) {
      write_file(dir / "checkpoints" / ("domain_" + std::to_string(t + 1) + ".llck"),
                 run.training.checkpoints[t].save_checkpoint());
    }
    write_text(dir / "accuracy_matrix.csv", accuracy_matrix_csv(run.metrics));
    write_text(dir / "summary.json", summary_json(run.metrics));
    log << timestamp() << " " << to_string(m) << " done steps=" << run.training.reports.size() << '\n';
    out << to_string(m) << ": average " << std::fixed << std::setprecision(4) << run.metrics.average << " over "
        << run.metrics.num_domains() << " domains, " << run.training.reports.size() << " steps\n";
    out.unsetf(std::ios::fixed);
  }
  log << timestamp() << " finished" << '\n';
  return 0;
}

RunReport read_run(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  RunReport report;
  std::ostringstream csv;
  csv << "method,after_domain,eval_domain,accuracy\n";
  bool any = false;
  for (const char* name : {"lleda", "baseline"}) {
    const fs::path dir = run_dir / name;
    if (!fs::exists(dir)) continue;
    any = true;
    const fs::path matrix = dir / "accuracy_matrix.csv";
    if (!fs::exists(matrix)) {
      report.warnings.push_back(std::string(name) + ": no accuracy matrix (incomplete run)");
      continue;
    }
    SequenceMetrics m;
    try {
      m = parse_accuracy_matrix_csv(read_text(matrix));
    } catch (const Error& e) {
      report.warnings.push_back(std::string(name) + ": unreadable accuracy matrix: " + e.what());
      continue;
    }
    for (std::size_t t = 1; t <= m.num_domains(); ++t) {
      for (std::size_t d = 1; d <= t; ++d) {
        csv << name << ',' << t << ',' << d << ',' << std::setprecision(17) << m.at(t, d) << '\n';
      }
    }
    report.methods.emplace_back(name, std::move(m));
  }
  if (!any) report.warnings.push_back("no method directories under '" + run_dir.string() + "'");
  report.long_csv = csv.str();
  return report;
}

int report_run(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err) {
  const RunReport report = read_run(run_dir);
  for (const auto& [name, m] : report.methods) {
    out << "[" << name << "]\n";
    out << "  average accuracy  " << std::fixed << std::setprecision(4) << m.average << '\n';
    for (std::size_t d = 0; d < m.forgetting.size(); ++d) {
      out << "  domain " << d + 1 << "  final " << m.accuracy.back()[d] << "  forgetting " << m.forgetting[d] << '\n';
    }
    out.unsetf(std::ios::fixed);
  }
  if (!report.methods.empty()) {
    write_text(run_dir / "report.csv", report.long_csv);
    out << "wrote " << (run_dir / "report.csv").string() << '\n';
  }
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  return report.warnings.empty() ? 0 : 1;
}

}  // namespace lleda
