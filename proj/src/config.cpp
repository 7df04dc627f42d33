#include "vexpl/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace vexpl {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !in.eof()) {
    throw std::invalid_argument("config: bad value '" + text + "' for key '" + key + "'");
  }
  return value;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <class T>
Field field(const std::string& key, T& target) {
  return {[&target, key](const std::string& v) { target = parse_value<T>(key, v); },
          [&target]() {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(target);
            } else {
              return std::to_string(target);
            }
          }};
}

Field bool_field(const std::string& key, bool& target) {
  return {[&target, key](const std::string& v) { target = parse_value<int>(key, v) != 0; },
          [&target]() { return std::string(target ? "1" : "0"); }};
}

std::map<std::string, Field> fields(ExperimentConfig& c) {
  return {
      {"seed", field("seed", c.seed)},
      {"seeds", field("seeds", c.seeds)},
      {"synth.classes", field("synth.classes", c.synth.num_classes)},
      {"synth.vocab_size", field("synth.vocab_size", c.synth.vocab_size)},
      {"synth.sentences_per_instance", field("synth.sentences_per_instance", c.synth.sentences_per_instance)},
      {"synth.instances_per_class", field("synth.instances_per_class", c.synth.instances_per_class)},
      {"synth.planted_per_class", field("synth.planted_per_class", c.synth.planted_per_class)},
      {"synth.feature_dim", field("synth.feature_dim", c.synth.feature_dim)},
      {"synth.class_separation", field("synth.class_separation", c.synth.class_separation)},
      {"synth.feature_noise", field("synth.feature_noise", c.synth.feature_noise)},
      {"synth.min_fillers", field("synth.min_fillers", c.synth.min_fillers)},
      {"synth.max_fillers", field("synth.max_fillers", c.synth.max_fillers)},
      {"synth.filler_zipf", field("synth.filler_zipf", c.synth.filler_zipf)},
      {"synth.val_per_class", field("synth.val_per_class", c.synth.val_per_class)},
      {"synth.test_per_class", field("synth.test_per_class", c.synth.test_per_class)},
      {"synth.seed", field("synth.seed", c.synth.seed)},
      {"model.embed", field("model.embed", c.dims.embed_size)},
      {"model.hidden", field("model.hidden", c.dims.hidden_size)},
      {"model.max_len", field("model.max_len", c.dims.max_len)},
      {"train.lambda", field("train.lambda", c.train.lambda)},
      {"train.samples", field("train.samples", c.train.samples_per_instance)},
      {"train.lr", field("train.lr", c.train.learning_rate)},
      {"train.epochs", field("train.epochs", c.train.epochs)},
      {"train.clip", field("train.clip", c.train.gradient_clip)},
      {"train.batch", field("train.batch", c.train.batch_size)},
      {"train.baseline", bool_field("train.baseline", c.train.reward_baseline)},
      {"train.baseline_decay", field("train.baseline_decay", c.train.baseline_decay)},
      {"classifier.embed", field("classifier.embed", c.classifier.embed_size)},
      {"classifier.hidden", field("classifier.hidden", c.classifier.hidden_size)},
      {"classifier.epochs", field("classifier.epochs", c.classifier.epochs)},
      {"classifier.lr", field("classifier.lr", c.classifier.learning_rate)},
      {"classifier.batch", field("classifier.batch", c.classifier.batch_size)},
  };
}

}  // namespace

ConfigMap parse_config(std::istream& in, const std::string& source) {
  ConfigMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

void apply_config(ExperimentConfig& config, const ConfigMap& values) {
  auto f = fields(config);
  for (const auto& [k, v] : values) {
    auto it = f.find(k);
    if (it == f.end()) throw std::invalid_argument("config: unknown key '" + k + "'");
    it->second.set(v);
  }
  config.train.max_len = config.dims.max_len;
  config.dims.feature_size = config.synth.feature_dim;
  if (config.seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
  config.train.validate();
  config.synth.validate();
}

std::string to_string(const ExperimentConfig& config) {
  auto copy = config;
  std::string out;
  for (const auto& [k, field] : fields(copy)) out += k + " = " + field.get() + "\n";
  return out;
}

}  // namespace vexpl
