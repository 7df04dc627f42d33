#include "vexpl/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace vexpl {

ClassifierTrainResult train_sentence_classifier(const Corpus& corpus, const ExperimentConfig& config,
                                                std::uint64_t seed) {
  const auto train = classifier_examples(corpus, Split::Train, config.dims.max_len);
  const auto val = classifier_examples(corpus, Split::Val, config.dims.max_len);
  Rng rng = Rng::substream(seed, "classifier");
  return train_classifier(corpus.vocab, corpus.num_classes, train, val, config.classifier, rng);
}

Real effective_lambda(AblationMode mode, Real requested) {
  if (!traits(mode).discriminative) return 0.0;
  if (!(requested > 0)) {
    throw std::invalid_argument("mode " + std::string(to_string(mode)) + " needs lambda > 0");
  }
  return requested;
}

Matrix class_embeddings_from(const GeneratorModel& language_model, const Corpus& corpus) {
  const auto examples = language_model_examples(corpus, Split::Train, language_model.dims.max_len);
  return compute_class_embeddings(language_model, examples, corpus.num_classes);
}

TrainResult train_variant(const Corpus& corpus, AblationMode mode, const ExperimentConfig& config,
                          std::uint64_t seed, const ClassifierModel* classifier,
                          const Matrix& class_embeddings, const EpochCallback& on_epoch) {
  GeneratorDims dims = config.dims;
  dims.vocab_size = corpus.vocab.size();
  dims.feature_size = corpus.feature_dim;

  TrainConfig tc = config.train;
  tc.mode = mode;
  tc.seed = seed;
  tc.max_len = dims.max_len;
  tc.lambda = effective_lambda(mode, config.train.lambda);
  if (tc.lambda > 0 && (classifier == nullptr || !classifier->frozen)) {
    throw std::invalid_argument("mode " + std::string(to_string(mode)) +
                                " requires a trained, frozen sentence classifier");
  }
  if (traits(mode).label && class_embeddings.size() == 0) {
    throw std::invalid_argument("mode " + std::string(to_string(mode)) +
                                " requires class embeddings from an image-only language model");
  }

  Rng init = Rng::substream(seed, "init");
  GeneratorModel model = make_generator(dims, corpus.vocab, mode, class_embeddings, init);
  const auto train_set = generator_examples(corpus, Split::Train, model);
  const auto val_set = generator_examples(corpus, Split::Val, model);
  return train(std::move(model), train_set, val_set, classifier, tc, on_epoch);
}

VariantSet train_all_variants(const Corpus& corpus, const ExperimentConfig& config,
                              std::uint64_t seed, std::ostream* progress) {
  VariantSet out;
  out.classifier = train_sentence_classifier(corpus, config, seed);
  if (progress) {
    *progress << "[seed " << seed << "] classifier held-out accuracy "
              << out.classifier.held_out_accuracy << "\n";
  }
  const ClassifierModel* clf = &out.classifier.model;
  auto run = [&](AblationMode mode) {
    TrainResult r = train_variant(corpus, mode, config, seed, clf, out.class_embeddings);
    if (progress) {
      *progress << "[seed " << seed << "] " << to_string(mode) << ": best epoch " << r.best_epoch
                << ", val objective " << r.log[static_cast<std::size_t>(r.best_epoch - 1)].validation_objective
                << "\n";
    }
    out.generators.emplace(mode, std::move(r));
  };
  run(AblationMode::Description);
  out.class_embeddings = class_embeddings_from(out.generators.at(AblationMode::Description).model, corpus);
  run(AblationMode::Definition);
  run(AblationMode::ExplanationLabel);
  run(AblationMode::ExplanationDis);
  run(AblationMode::Explanation);
  return out;
}

MetricReport evaluate_variants(const Corpus& corpus, const VariantSet& variants, int max_len) {
  std::vector<NamedModel> models;
  for (AblationMode m : kAllModes) {
    models.push_back({std::string(to_string(m)), &variants.generators.at(m).model});
  }
  return evaluate_models(models, eval_instances(corpus, Split::Test), class_pools(corpus, Split::Test),
                         ngram_stats(corpus, Split::Test), variants.classifier.model, max_len);
}

Real median(std::vector<Real> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ReproduceResult reproduce_table(const Corpus& corpus, const ExperimentConfig& config,
                                const std::vector<std::uint64_t>& seeds, std::ostream* progress) {
  if (seeds.empty()) throw std::invalid_argument("reproduce_table: no seeds");
  ReproduceResult out;
  out.seeds = seeds;
  for (std::uint64_t seed : seeds) {
    VariantSet v = train_all_variants(corpus, config, seed, progress);
    out.reports.push_back(evaluate_variants(corpus, v, config.dims.max_len));
    const auto& expl = v.generators.at(AblationMode::Explanation);
    out.explanation_logs.push_back(expl.log);
    out.explanation_best_epochs.push_back(expl.best_epoch);
    if (progress) *progress << out.reports.back().table();
  }

  out.medians.num_classes = corpus.num_classes;
  for (AblationMode m : kAllModes) {
    const std::string name(to_string(m));
    std::vector<Real> cider, sim, rank, acc;
    for (const auto& r : out.reports) {
      const auto& row = r.row(name);
      cider.push_back(row.cider);
      sim.push_back(row.class_similarity);
      rank.push_back(row.class_rank);
      acc.push_back(row.classifier_accuracy);
    }
    ModelMetrics med;
    med.name = name;
    med.cider = median(cider);
    med.class_similarity = median(sim);
    med.class_rank = median(rank);
    med.classifier_accuracy = median(acc);
    out.medians.rows.push_back(std::move(med));
  }

  const auto& md = out.medians;
  const auto& expl = md.row("explanation");
  const auto& desc = md.row("description");
  auto& v = out.verdict;
  v.rank_explanation_le_description = expl.class_rank <= desc.class_rank;
  v.similarity_explanation_ge_description = expl.class_similarity >= desc.class_similarity;
  v.accuracy_explanation_ge_label = expl.classifier_accuracy >= md.row("explanation-label").classifier_accuracy;
  v.accuracy_dis_ge_description = md.row("explanation-dis").classifier_accuracy >= desc.classifier_accuracy;
  v.cider_explanation_best = std::all_of(md.rows.begin(), md.rows.end(), [&](const ModelMetrics& r) {
    return r.cider <= expl.cider;
  });
  return out;
}

std::string format_verdict(const OrderingVerdict& v) {
  auto mark = [](bool b) { return b ? "holds" : "violated"; };
  std::string out;
  out += std::string("explanation rank <= description rank:               ") + mark(v.rank_explanation_le_description) + "\n";
  out += std::string("explanation similarity >= description similarity:   ") + mark(v.similarity_explanation_ge_description) + "\n";
  out += std::string("explanation accuracy >= explanation-label accuracy:  ") + mark(v.accuracy_explanation_ge_label) + "\n";
  out += std::string("explanation-dis accuracy >= description accuracy:    ") + mark(v.accuracy_dis_ge_description) + "\n";
  out += std::string("explanation has the highest CIDEr:                   ") + mark(v.cider_explanation_best) + "\n";
  return out;
}

}  // namespace vexpl
