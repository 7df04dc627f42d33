// End-to-end experiment: classifier, the five generator variants, evaluation,
// and the multi-seed comparison of the variants.
#pragma once

#include "vexpl/config.hpp"
#include "vexpl/data.hpp"
#include "vexpl/metrics.hpp"
#include "vexpl/reinforce.hpp"
#include "vexpl/sentclass.hpp"

#include <map>
#include <ostream>
#include <vector>

namespace vexpl {

ClassifierTrainResult train_sentence_classifier(const Corpus& corpus, const ExperimentConfig& config,
                                                std::uint64_t seed);

/// Lambda actually used for a mode: 0 for modes without the discriminative loss,
/// otherwise the requested value (which must then be > 0).
Real effective_lambda(AblationMode mode, Real requested);

/// Trains one variant. `class_embeddings` is required for modes with label input and
/// `classifier` for modes with the discriminative loss.
TrainResult train_variant(const Corpus& corpus, AblationMode mode, const ExperimentConfig& config,
                          std::uint64_t seed, const ClassifierModel* classifier,
                          const Matrix& class_embeddings, const EpochCallback& on_epoch = {});

/// Class embeddings from an image-only language model over the training split.
Matrix class_embeddings_from(const GeneratorModel& language_model, const Corpus& corpus);

struct VariantSet {
  ClassifierTrainResult classifier;
  Matrix class_embeddings;
  std::map<AblationMode, TrainResult> generators;
};

/// Trains the classifier, the description model (which doubles as the language model
/// for class embeddings), then the remaining variants.
VariantSet train_all_variants(const Corpus& corpus, const ExperimentConfig& config,
                              std::uint64_t seed, std::ostream* progress = nullptr);

MetricReport evaluate_variants(const Corpus& corpus, const VariantSet& variants, int max_len);

struct OrderingVerdict {
  bool rank_explanation_le_description = false;
  bool similarity_explanation_ge_description = false;
  bool accuracy_explanation_ge_label = false;
  bool accuracy_dis_ge_description = false;
  bool cider_explanation_best = false;

  bool discriminative_orderings() const {
    return rank_explanation_le_description && similarity_explanation_ge_description &&
           accuracy_explanation_ge_label && accuracy_dis_ge_description;
  }
};

struct ReproduceResult {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricReport> reports;
  /// Training logs of the explanation variant, one per seed.
  std::vector<std::vector<UpdateRecord>> explanation_logs;
  std::vector<int> explanation_best_epochs;
  /// Per-metric medians across seeds, one row per variant.
  MetricReport medians;
  OrderingVerdict verdict;
};

ReproduceResult reproduce_table(const Corpus& corpus, const ExperimentConfig& config,
                                const std::vector<std::uint64_t>& seeds,
                                std::ostream* progress = nullptr);

std::string format_verdict(const OrderingVerdict& v);

Real median(std::vector<Real> values);

}  // namespace vexpl
