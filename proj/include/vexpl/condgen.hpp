// Conditional sentence generator.
//
// Two stacked LSTMs: the first reads the previous word's embedding, the second
// reads the first one's output concatenated with the image feature and the
// class embedding, and a linear projection of its hidden state gives the
// next-word logits. Conditioning vectors are injected at every step. Ablation
// modes mask the image feature and/or the class embedding with zeros.
#pragma once

#include "vexpl/checkpoint.hpp"
#include "vexpl/netcore.hpp"
#include "vexpl/rng.hpp"
#include "vexpl/text.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace vexpl {

enum class AblationMode { Definition, Description, ExplanationLabel, ExplanationDis, Explanation };

inline constexpr AblationMode kAllModes[] = {
    AblationMode::Definition, AblationMode::Description, AblationMode::ExplanationLabel,
    AblationMode::ExplanationDis, AblationMode::Explanation};

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view name);

struct ModeTraits {
  bool image = false;
  bool label = false;
  bool discriminative = false;
};
ModeTraits traits(AblationMode mode);

struct GeneratorDims {
  int vocab_size = 0;
  int embed_size = 32;
  int hidden_size = 64;
  int feature_size = 16;
  int max_len = 20;
};

struct GeneratorWeights {
  Matrix embedding;  // embed x vocab, one column per token
  LstmCellWeights<Real> first;
  LstmCellWeights<Real> second;
  Matrix output_weights;  // vocab x hidden
  Vector output_bias;

  GeneratorWeights() = default;
  explicit GeneratorWeights(const GeneratorDims& dims);

  template <class Fn>
  void for_each_block(const std::string& prefix, Fn&& fn) {
    fn(prefix + "embedding", embedding);
    first.for_each_block(prefix + "lstm1.", fn);
    second.for_each_block(prefix + "lstm2.", fn);
    fn(prefix + "output_weights", output_weights);
    fn(prefix + "output_bias", output_bias);
  }
  template <class Fn>
  void for_each_block(const std::string& prefix, Fn&& fn) const {
    fn(prefix + "embedding", embedding);
    first.for_each_block(prefix + "lstm1.", fn);
    second.for_each_block(prefix + "lstm2.", fn);
    fn(prefix + "output_weights", output_weights);
    fn(prefix + "output_bias", output_bias);
  }
};

/// What one generation is conditioned on.
struct Conditioning {
  Vector image_feature;
  int class_label = 0;
  Vector class_embedding;
};

struct GeneratorModel {
  GeneratorDims dims;
  Vocabulary vocab;
  AblationMode mode = AblationMode::Explanation;
  GeneratorWeights weights;
  /// hidden x classes, one column per class; empty for modes without label input.
  Matrix class_embeddings;

  bool uses_image() const { return traits(mode).image; }
  bool uses_label() const { return traits(mode).label; }
  int num_classes() const { return static_cast<int>(class_embeddings.cols()); }

  /// Conditioning for an image, looking up the class embedding when the mode uses one.
  Conditioning condition(const Vector& image_feature, int class_label) const;

  Checkpoint to_checkpoint() const;
  static GeneratorModel from_checkpoint(const Checkpoint& ck);
};

/// Fresh model: weights uniform in [-0.1, 0.1], forget-gate biases 1.0.
GeneratorModel make_generator(const GeneratorDims& dims, Vocabulary vocab, AblationMode mode,
                              Matrix class_embeddings, Rng& init);

struct GeneratorState {
  LstmState<Real> first;
  LstmState<Real> second;

  static GeneratorState zeros(Index hidden_size) {
    return {LstmState<Real>::zeros(hidden_size), LstmState<Real>::zeros(hidden_size)};
  }
};

struct StepOutput {
  Vector probs;
  GeneratorState state;
};

/// One generation step: distribution over the word following `prev_token`.
StepOutput forward_step(const GeneratorModel& model, TokenId prev_token, const GeneratorState& state,
                        const Conditioning& cond);

struct TrainingExample {
  TokenSequence tokens;
  Conditioning cond;
};

struct LossAndGradient {
  Real loss = 0;
  GeneratorWeights grad;
};

/// Teacher-forced negative log-likelihood, averaged over the batch (sum over time steps).
LossAndGradient relevance_loss(const GeneratorModel& model, std::span<const TrainingExample> batch,
                               bool with_gradient = true);

/// Teacher-forces `tokens` and returns the sum of log-probabilities of its first
/// `scored_steps` tokens. When `grad` is given, adds coeff * d(that sum)/dW into it.
/// When `step_probs` is given, it receives the distribution of every scored step.
Real accumulate_log_prob_gradient(const GeneratorModel& model, const Conditioning& cond,
                                  const TokenSequence& tokens, std::size_t scored_steps,
                                  Real coeff, GeneratorWeights* grad,
                                  std::vector<Vector>* step_probs = nullptr);

/// Image feature and class embedding after ablation masking, concatenated (the
/// per-step conditioning input of the second LSTM).
Vector conditioning_vector(const GeneratorModel& model, const Conditioning& cond);

/// Plain forward evaluation of the same log-probability in scalar type S, without
/// caches or gradients. Used as a higher-precision reference for gradient checks.
template <typename S>
S reference_log_prob(const GeneratorModel& model, const Conditioning& cond,
                     const TokenSequence& tokens, std::size_t scored_steps) {
  require_dims(scored_steps <= tokens.size(), "reference_log_prob: scored_steps exceeds length");
  const auto& w = model.weights;
  const MatrixX<S> embedding = w.embedding.cast<S>();
  const LstmCellWeights<S> first = w.first.cast<S>();
  const LstmCellWeights<S> second = w.second.cast<S>();
  const MatrixX<S> out_w = w.output_weights.cast<S>();
  const VectorX<S> out_b = w.output_bias.cast<S>();
  const VectorX<S> c = conditioning_vector(model, cond).cast<S>();
  const Index h = model.dims.hidden_size;

  auto s1 = LstmState<S>::zeros(h);
  auto s2 = LstmState<S>::zeros(h);
  VectorX<S> x2(h + c.size());
  TokenId prev = Vocabulary::kSos;
  S total = 0;
  for (std::size_t t = 0; t < scored_steps; ++t) {
    s1 = lstm_step(embedding.col(prev), s1, first);
    x2 << s1.hidden, c;
    s2 = lstm_step(x2, s2, second);
    const VectorX<S> logits = out_w * s2.hidden + out_b;
    const S top = logits.maxCoeff();
    using std::log;
    total += logits(tokens[t]) - top - log((logits.array() - top).exp().sum());
    prev = tokens[t];
  }
  return total;
}

/// A sentence drawn from the model. The final EOS is forced (probability 1, no
/// log-probability contribution) when max_len is reached without sampling one.
struct SampledSentence {
  TokenSequence tokens;
  Real log_prob = 0;
  std::vector<Vector> step_probs;
  bool eos_forced = false;
  Conditioning cond;

  /// Number of tokens that were drawn from the model.
  std::size_t sampled_steps() const { return step_probs.size(); }
};

SampledSentence sample_sequence(const GeneratorModel& model, const Conditioning& cond, Rng& rng,
                                int max_len);

/// Argmax decoding, lowest index on ties, same termination rule as sample_sequence.
TokenSequence greedy_decode(const GeneratorModel& model, const Conditioning& cond, int max_len);

/// Per-class mean of the second LSTM's hidden state over every teacher-forced step of
/// every sequence of that class. Returns hidden x num_classes.
Matrix compute_class_embeddings(const GeneratorModel& language_model,
                                std::span<const TrainingExample> examples, int num_classes);

/// Draws an index from a categorical distribution.
Index sample_categorical(const Vector& probs, Rng& rng);

}  // namespace vexpl
