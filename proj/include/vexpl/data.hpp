// Corpora of (image feature, class, reference sentences) instances, the JSONL
// corpus format, vocabulary building and a synthetic corpus generator with
// planted class-discriminative tokens.
//
// Corpus file (UTF-8, one JSON object per line):
//   {"format":"vexpl-corpus","version":1,"num_classes":K,"feature_dim":D}
//   {"id":"...","class":k,"feature":[D numbers],"sentences":["...",...],"split":"train|val|test"}
//   ...
#pragma once

#include "vexpl/condgen.hpp"
#include "vexpl/metrics.hpp"
#include "vexpl/sentclass.hpp"
#include "vexpl/text.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vexpl {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Val, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct Instance {
  std::string id;
  Vector feature;
  int label = 0;
  std::vector<std::string> sentences;
  Split split = Split::Train;

  bool operator==(const Instance&) const = default;
};

struct Corpus {
  std::vector<Instance> instances;
  int num_classes = 0;
  int feature_dim = 0;
  Vocabulary vocab;

  std::vector<const Instance*> split(Split s) const;
  /// Throws CorpusError on any violated invariant.
  void validate() const;

  bool operator==(const Corpus&) const = default;
};

/// Tokens with count >= min_count, ordered by count descending then lexicographically,
/// after the reserved SOS/EOS/UNK entries.
Vocabulary build_vocabulary(const std::vector<std::string>& train_sentences, int min_count = 1);

struct SynthSpec {
  int num_classes = 5;
  int vocab_size = 40;  // including the three reserved tokens
  int sentences_per_instance = 3;
  int instances_per_class = 20;
  int planted_per_class = 1;
  int feature_dim = 16;
  /// Standard deviation of the per-class mean feature vectors.
  Real class_separation = 1.0;
  /// Standard deviation of the per-instance feature noise.
  Real feature_noise = 1.0;
  int min_fillers = 3;
  int max_fillers = 6;
  /// Zipf exponent for filler words; 0 draws them uniformly.
  Real filler_zipf = 1.0;
  int val_per_class = 4;
  int test_per_class = 4;
  std::uint64_t seed = 7;

  int filler_count() const { return vocab_size - Vocabulary::kReserved - num_classes * planted_per_class; }
  void validate() const;
};

std::string planted_token(int class_id, int j, int planted_per_class);
std::string filler_token(int i);

/// Deterministic under spec.seed. Every sentence of a class contains exactly one of
/// that class's planted tokens plus shared fillers; features are class mean plus noise.
Corpus generate_synth(const SynthSpec& spec);

Corpus load_corpus(const std::filesystem::path& path, int min_count = 1);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
/// Parses corpus text; `source` names it in error messages.
Corpus parse_corpus(std::istream& in, const std::string& source, int min_count = 1);

// Views of a corpus for training and evaluation. Sentences longer than max_len are
// truncated (EOS re-appended) with a warning on stderr.

/// One example per (instance, sentence); conditioning looked up through `model`.
std::vector<TrainingExample> generator_examples(const Corpus& corpus, Split split,
                                                const GeneratorModel& model);
/// Same, but conditioning carries only the raw feature and label (no class embedding).
std::vector<TrainingExample> language_model_examples(const Corpus& corpus, Split split,
                                                     int max_len);
std::vector<LabeledSentence> classifier_examples(const Corpus& corpus, Split split, int max_len);
std::vector<EvalInstance> eval_instances(const Corpus& corpus, Split split);

/// Predicted class per instance id, read from lines "<id> <class>" ('#' starts a comment).
using LabelMap = std::map<std::string, int>;
LabelMap load_labels(const std::filesystem::path& path, int num_classes);
/// Conditions each instance on its predicted class; throws CorpusError naming any id
/// without a prediction.
void apply_predicted_labels(std::vector<EvalInstance>& instances, const LabelMap& labels);
ClassPools class_pools(const Corpus& corpus, Split split);
NgramStats ngram_stats(const Corpus& corpus, Split split);

}  // namespace vexpl
