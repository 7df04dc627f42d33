// Single-layer LSTM sentence classifier. Trained on ground-truth sentences, then
// frozen and used as the reward p(class | sentence) for discriminative training.
#pragma once

#include "vexpl/checkpoint.hpp"
#include "vexpl/netcore.hpp"
#include "vexpl/rng.hpp"
#include "vexpl/text.hpp"

#include <span>

namespace vexpl {

struct ClassifierWeights {
  Matrix embedding;  // embed x vocab
  LstmCellWeights<Real> lstm;
  Matrix projection;  // classes x hidden
  Vector projection_bias;

  ClassifierWeights() = default;
  ClassifierWeights(int vocab_size, int embed_size, int hidden_size, int num_classes);

  template <class Fn>
  void for_each_block(const std::string& prefix, Fn&& fn) {
    fn(prefix + "embedding", embedding);
    lstm.for_each_block(prefix + "lstm.", fn);
    fn(prefix + "projection", projection);
    fn(prefix + "projection_bias", projection_bias);
  }
  template <class Fn>
  void for_each_block(const std::string& prefix, Fn&& fn) const {
    fn(prefix + "embedding", embedding);
    lstm.for_each_block(prefix + "lstm.", fn);
    fn(prefix + "projection", projection);
    fn(prefix + "projection_bias", projection_bias);
  }
};

/// The sentence is read including its EOS; the final hidden state is projected to class logits.
struct ClassifierModel {
  Vocabulary vocab;
  int num_classes = 0;
  ClassifierWeights weights;
  bool frozen = false;

  Checkpoint to_checkpoint() const;
  static ClassifierModel from_checkpoint(const Checkpoint& ck);
};

ClassifierModel make_classifier(Vocabulary vocab, int num_classes, int embed_size, int hidden_size,
                                Rng& init);

Vector classify(const ClassifierModel& model, const TokenSequence& tokens);

/// p(true_class | tokens) under the classifier.
Real reward(const ClassifierModel& model, const TokenSequence& tokens, int true_class);

/// Argmax of classify; lowest class index on ties.
int predict(const ClassifierModel& model, const TokenSequence& tokens);

struct LabeledSentence {
  TokenSequence tokens;
  int label = 0;
};

/// Cross-entropy of one sentence; adds d(loss)/dW * scale into grad when given.
Real classifier_loss(const ClassifierModel& model, const LabeledSentence& example, Real scale,
                     ClassifierWeights* grad);

struct ClassifierHyperparams {
  int embed_size = 32;
  int hidden_size = 32;
  int epochs = 30;
  int batch_size = 16;
  Real learning_rate = 1.0;
  Real gradient_clip = 5.0;
};

struct ClassifierTrainResult {
  ClassifierModel model;
  Real held_out_accuracy = 0;
};

Real accuracy(const ClassifierModel& model, std::span<const LabeledSentence> data);

/// Trains with minibatch SGD on cross-entropy and returns the frozen model plus its
/// accuracy on `held_out`.
ClassifierTrainResult train_classifier(const Vocabulary& vocab, int num_classes,
                                       std::span<const LabeledSentence> train,
                                       std::span<const LabeledSentence> held_out,
                                       const ClassifierHyperparams& hp, Rng& rng);

}  // namespace vexpl
