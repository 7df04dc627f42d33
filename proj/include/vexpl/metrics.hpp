// Sentence-level evaluation: CIDEr, class similarity, class rank and sentence
// classifier accuracy of generated sentences.
//
// CIDEr here is the plain (non-D) variant: for n = 1..4 each sentence becomes a
// vector of raw n-gram counts times IDF = ln(documents / max(1, df)); a candidate
// scores against one reference by sum_g min(c_g, r_g) * r_g / (|c| |r|) (candidate
// weights clipped by the reference), averaged over references, then over n,
// and scaled by 10. There is no length penalty.
#pragma once

#include "vexpl/condgen.hpp"
#include "vexpl/sentclass.hpp"

#include <array>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vexpl {

using Words = std::vector<std::string>;

struct NgramStats {
  static constexpr int kMaxN = 4;

  /// Per n (index n-1): number of documents containing each n-gram.
  std::array<std::unordered_map<std::string, int>, kMaxN> document_frequency;
  int documents = 0;

  /// One document is the reference set of one image.
  static NgramStats from_documents(std::span<const std::vector<Words>> documents);

  Real idf(int n, const std::string& gram) const;
};

/// Counts of the n-grams of `words`, keyed by the n tokens joined with '\x1f'.
std::unordered_map<std::string, int> ngram_counts(const Words& words, int n);

/// Throws std::invalid_argument when references is empty.
Real cider(const Words& candidate, std::span<const Words> references, const NgramStats& stats);

/// Reference sentences grouped by class; pools[k] holds every reference of class k.
using ClassPools = std::vector<std::vector<Words>>;

Real class_similarity(const Words& generated, int class_id, const ClassPools& pools,
                      const NgramStats& stats);

/// 1-based rank of true_class when classes are sorted by class similarity, descending.
/// Classes tied with the true class are ranked ahead of it.
int class_rank(const Words& generated, int true_class, const ClassPools& pools,
               const NgramStats& stats);

struct EvalInstance {
  std::string id;
  Vector image_feature;
  int label = 0;
  /// Class used to look up the class embedding; defaults to the ground-truth label.
  int conditioning_label = 0;
  std::vector<Words> references;
};

struct ImageScore {
  std::string id;
  int label = 0;
  std::string generated;
  Real cider = 0;
  Real class_similarity = 0;
  int class_rank = 0;
  bool classifier_correct = false;
};

struct ModelMetrics {
  std::string name;
  Real cider = 0;
  Real class_similarity = 0;
  Real class_rank = 0;
  Real classifier_accuracy = 0;
  std::vector<ImageScore> per_image;
};

struct MetricReport {
  int num_classes = 0;
  std::vector<ModelMetrics> rows;

  const ModelMetrics& row(const std::string& name) const;
  /// Aligned human-readable table. METEOR is not computed and is omitted.
  std::string table() const;
  /// One JSON object per model (means only).
  std::string summary_jsonl() const;
  /// One JSON object per (model, image).
  std::string per_image_jsonl() const;
};

struct NamedModel {
  std::string name;
  const GeneratorModel* model = nullptr;
};

MetricReport evaluate_models(std::span<const NamedModel> models, std::span<const EvalInstance> test,
                             const ClassPools& pools, const NgramStats& stats,
                             const ClassifierModel& classifier, int max_len);

}  // namespace vexpl
