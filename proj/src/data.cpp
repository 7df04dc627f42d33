#include "vexpl/data.hpp"

#include "vexpl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace vexpl {
namespace {

using nlohmann::json;

TokenSequence encode_with_warning(const Vocabulary& vocab, const std::string& sentence, int max_len,
                                  const std::string& id) {
  bool truncated = false;
  TokenSequence seq = vocab.encode(tokenize(sentence), max_len, &truncated);
  if (truncated) {
    std::cerr << "warning: sentence of instance '" << id << "' truncated to " << max_len
              << " tokens\n";
  }
  return seq;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw CorpusError("unknown split '" + std::string(s) + "'");
}

std::vector<const Instance*> Corpus::split(Split s) const {
  std::vector<const Instance*> out;
  for (const auto& inst : instances) {
    if (inst.split == s) out.push_back(&inst);
  }
  return out;
}

void Corpus::validate() const {
  if (num_classes < 1) throw CorpusError("corpus: num_classes must be >= 1");
  std::set<std::string> ids;
  std::vector<bool> in_train(static_cast<std::size_t>(num_classes), false);
  for (const auto& inst : instances) {
    if (!ids.insert(inst.id).second) throw CorpusError("corpus: duplicate instance id '" + inst.id + "'");
    if (inst.feature.size() != feature_dim) {
      throw CorpusError("corpus: instance '" + inst.id + "' has feature length " +
                        std::to_string(inst.feature.size()) + ", expected " +
                        std::to_string(feature_dim));
    }
    if (!inst.feature.allFinite()) throw CorpusError("corpus: instance '" + inst.id + "' has non-finite feature");
    if (inst.label < 0 || inst.label >= num_classes) {
      throw CorpusError("corpus: instance '" + inst.id + "' has class out of range");
    }
    if (inst.sentences.empty()) throw CorpusError("corpus: instance '" + inst.id + "' has no sentences");
    for (const auto& s : inst.sentences) {
      if (tokenize(s).empty()) throw CorpusError("corpus: instance '" + inst.id + "' has an empty sentence");
    }
    if (inst.split == Split::Train) in_train[static_cast<std::size_t>(inst.label)] = true;
  }
  for (int k = 0; k < num_classes; ++k) {
    if (!in_train[static_cast<std::size_t>(k)]) {
      throw CorpusError("corpus: class " + std::to_string(k) + " has no training instance");
    }
  }
}

Vocabulary build_vocabulary(const std::vector<std::string>& train_sentences, int min_count) {
  std::map<std::string, int> counts;
  for (const auto& s : train_sentences) {
    for (auto& w : tokenize(s)) ++counts[w];
  }
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [w, c] : counts) {
    if (c >= min_count && w != Vocabulary::sos_token() && w != Vocabulary::eos_token() &&
        w != Vocabulary::unk_token()) {
      kept.emplace_back(w, c);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [w, c] : kept) words.push_back(w);
  return Vocabulary(words);
}

void SynthSpec::validate() const {
  if (num_classes < 1) throw std::invalid_argument("synth: num_classes must be >= 1");
  if (planted_per_class < 1) throw std::invalid_argument("synth: planted_per_class must be >= 1");
  if (filler_count() < 1) {
    throw std::invalid_argument("synth: vocab_size too small for planted + filler + reserved tokens");
  }
  if (sentences_per_instance < 1 || instances_per_class < 1) {
    throw std::invalid_argument("synth: need at least one instance and sentence");
  }
  if (feature_dim < 1) throw std::invalid_argument("synth: feature_dim must be >= 1");
  if (min_fillers < 0 || max_fillers < min_fillers) throw std::invalid_argument("synth: bad filler range");
  if (feature_noise < 0 || class_separation < 0 || filler_zipf < 0) {
    throw std::invalid_argument("synth: noise parameters must be >= 0");
  }
  if (val_per_class < 0 || test_per_class < 0 ||
      val_per_class + test_per_class >= instances_per_class) {
    throw std::invalid_argument("synth: every class needs at least one training instance");
  }
}

std::string planted_token(int class_id, int j, int planted_per_class) {
  return "t" + std::to_string(class_id * planted_per_class + j);
}

std::string filler_token(int i) { return "w" + std::to_string(i); }

Corpus generate_synth(const SynthSpec& spec) {
  spec.validate();
  Rng rng = Rng::substream(spec.seed, "data");

  Corpus corpus;
  corpus.num_classes = spec.num_classes;
  corpus.feature_dim = spec.feature_dim;

  std::vector<Vector> means;
  for (int k = 0; k < spec.num_classes; ++k) {
    Vector m(spec.feature_dim);
    for (Index d = 0; d < m.size(); ++d) m(d) = rng.normal(0.0, spec.class_separation);
    means.push_back(std::move(m));
  }

  const int fillers = spec.filler_count();
  std::vector<double> filler_weights(static_cast<std::size_t>(fillers));
  for (int i = 0; i < fillers; ++i) {
    filler_weights[static_cast<std::size_t>(i)] = 1.0 / std::pow(static_cast<double>(i + 1), spec.filler_zipf);
  }
  std::discrete_distribution<int> filler_dist(filler_weights.begin(), filler_weights.end());

  for (int k = 0; k < spec.num_classes; ++k) {
    for (int n = 0; n < spec.instances_per_class; ++n) {
      Instance inst;
      inst.id = "c" + std::to_string(k) + "_" + std::to_string(n);
      inst.label = k;
      inst.feature = means[static_cast<std::size_t>(k)];
      for (Index d = 0; d < inst.feature.size(); ++d) inst.feature(d) += rng.normal(0.0, spec.feature_noise);
      for (int s = 0; s < spec.sentences_per_instance; ++s) {
        const int n_fill = spec.min_fillers +
                           static_cast<int>(rng.index(static_cast<std::size_t>(spec.max_fillers - spec.min_fillers + 1)));
        std::vector<std::string> words;
        for (int f = 0; f < n_fill; ++f) words.push_back(filler_token(filler_dist(rng.engine())));
        const int j = static_cast<int>(rng.index(static_cast<std::size_t>(spec.planted_per_class)));
        const auto pos = static_cast<std::ptrdiff_t>(rng.index(words.size() + 1));
        words.insert(words.begin() + pos, planted_token(k, j, spec.planted_per_class));
        inst.sentences.push_back(join(words));
      }
      corpus.instances.push_back(std::move(inst));
    }
  }

  // Per-class split assignment.
  for (int k = 0; k < spec.num_classes; ++k) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(spec.instances_per_class));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(k * spec.instances_per_class));
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Split s = Split::Train;
      if (i < static_cast<std::size_t>(spec.test_per_class)) {
        s = Split::Test;
      } else if (i < static_cast<std::size_t>(spec.test_per_class + spec.val_per_class)) {
        s = Split::Val;
      }
      corpus.instances[idx[i]].split = s;
    }
  }

  std::vector<std::string> train_sentences;
  for (const auto* inst : corpus.split(Split::Train)) {
    train_sentences.insert(train_sentences.end(), inst->sentences.begin(), inst->sentences.end());
  }
  corpus.vocab = build_vocabulary(train_sentences, 1);
  corpus.validate();
  return corpus;
}

Corpus parse_corpus(std::istream& in, const std::string& source, int min_count) {
  Corpus corpus;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  auto fail = [&](const std::string& what) {
    throw CorpusError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != "vexpl-corpus") fail("missing corpus header line");
        if (j.at("version").get<int>() != 1) fail("unsupported corpus version");
        corpus.num_classes = j.at("num_classes").get<int>();
        corpus.feature_dim = j.at("feature_dim").get<int>();
        have_header = true;
        continue;
      }
      Instance inst;
      inst.id = j.at("id").get<std::string>();
      inst.label = j.at("class").get<int>();
      const auto feat = j.at("feature").get<std::vector<double>>();
      if (static_cast<int>(feat.size()) != corpus.feature_dim) {
        fail("instance '" + inst.id + "' has feature length " + std::to_string(feat.size()) +
             ", expected " + std::to_string(corpus.feature_dim));
      }
      inst.feature = Eigen::Map<const Vector>(feat.data(), static_cast<Index>(feat.size()));
      inst.sentences = j.at("sentences").get<std::vector<std::string>>();
      inst.split = parse_split(j.at("split").get<std::string>());
      corpus.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      fail(std::string("bad record: ") + e.what());
    } catch (const CorpusError& e) {
      if (std::string(e.what()).rfind(source, 0) == 0) throw;
      fail(e.what());
    }
  }
  if (!have_header) throw CorpusError(source + ": empty corpus file");
  std::vector<std::string> train_sentences;
  for (const auto& inst : corpus.instances) {
    if (inst.split == Split::Train) {
      train_sentences.insert(train_sentences.end(), inst.sentences.begin(), inst.sentences.end());
    }
  }
  corpus.validate();
  corpus.vocab = build_vocabulary(train_sentences, min_count);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, int min_count) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  return parse_corpus(in, path.string(), min_count);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CorpusError("cannot open " + path.string() + " for writing");
  out << json{{"format", "vexpl-corpus"},
              {"version", 1},
              {"num_classes", corpus.num_classes},
              {"feature_dim", corpus.feature_dim}}
             .dump()
      << "\n";
  for (const auto& inst : corpus.instances) {
    std::vector<double> feat(inst.feature.data(), inst.feature.data() + inst.feature.size());
    out << json{{"id", inst.id},
                {"class", inst.label},
                {"feature", feat},
                {"sentences", inst.sentences},
                {"split", std::string(to_string(inst.split))}}
               .dump()
        << "\n";
  }
  if (!out) throw CorpusError("failed writing " + path.string());
}

std::vector<TrainingExample> generator_examples(const Corpus& corpus, Split split,
                                                const GeneratorModel& model) {
  std::vector<TrainingExample> out;
  for (const auto* inst : corpus.split(split)) {
    const Conditioning cond = model.condition(inst->feature, inst->label);
    for (const auto& s : inst->sentences) {
      out.push_back({encode_with_warning(model.vocab, s, model.dims.max_len, inst->id), cond});
    }
  }
  return out;
}

std::vector<TrainingExample> language_model_examples(const Corpus& corpus, Split split, int max_len) {
  std::vector<TrainingExample> out;
  for (const auto* inst : corpus.split(split)) {
    Conditioning cond;
    cond.image_feature = inst->feature;
    cond.class_label = inst->label;
    for (const auto& s : inst->sentences) {
      out.push_back({encode_with_warning(corpus.vocab, s, max_len, inst->id), cond});
    }
  }
  return out;
}

std::vector<LabeledSentence> classifier_examples(const Corpus& corpus, Split split, int max_len) {
  std::vector<LabeledSentence> out;
  for (const auto* inst : corpus.split(split)) {
    for (const auto& s : inst->sentences) {
      out.push_back({encode_with_warning(corpus.vocab, s, max_len, inst->id), inst->label});
    }
  }
  return out;
}

std::vector<EvalInstance> eval_instances(const Corpus& corpus, Split split) {
  std::vector<EvalInstance> out;
  for (const auto* inst : corpus.split(split)) {
    EvalInstance e;
    e.id = inst->id;
    e.image_feature = inst->feature;
    e.label = inst->label;
    e.conditioning_label = inst->label;
    for (const auto& s : inst->sentences) e.references.push_back(tokenize(s));
    out.push_back(std::move(e));
  }
  return out;
}

LabelMap load_labels(const std::filesystem::path& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open label file " + path.string());
  LabelMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string id, extra;
    int label = -1;
    if (!(fields >> id)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (!(fields >> label) || (fields >> extra)) throw CorpusError(where + "expected '<id> <class>'");
    if (label < 0 || label >= num_classes) {
      throw CorpusError(where + "class " + std::to_string(label) + " out of range");
    }
    if (!out.emplace(id, label).second) throw CorpusError(where + "duplicate id '" + id + "'");
  }
  return out;
}

void apply_predicted_labels(std::vector<EvalInstance>& instances, const LabelMap& labels) {
  for (auto& inst : instances) {
    auto it = labels.find(inst.id);
    if (it == labels.end()) throw CorpusError("no predicted label for instance '" + inst.id + "'");
    inst.conditioning_label = it->second;
  }
}

ClassPools class_pools(const Corpus& corpus, Split split) {
  ClassPools pools(static_cast<std::size_t>(corpus.num_classes));
  for (const auto* inst : corpus.split(split)) {
    for (const auto& s : inst->sentences) pools[static_cast<std::size_t>(inst->label)].push_back(tokenize(s));
  }
  return pools;
}

NgramStats ngram_stats(const Corpus& corpus, Split split) {
  std::vector<std::vector<Words>> docs;
  for (const auto* inst : corpus.split(split)) {
    std::vector<Words> refs;
    for (const auto& s : inst->sentences) refs.push_back(tokenize(s));
    docs.push_back(std::move(refs));
  }
  return NgramStats::from_documents(docs);
}

}  // namespace vexpl
