#include "vexpl/diagnostics.hpp"

#include <cmath>
#include <string>

namespace vexpl {

ToyShape oracle_shape() {
  ToyShape s;
  s.words = 1;
  s.embed = 3;
  s.hidden = 4;
  s.feature = 2;
  s.classes = 2;
  s.max_len = 3;
  return s;
}

ToyProblem make_toy_problem(const ToyShape& shape, std::uint64_t seed) {
  std::vector<std::string> words;
  for (int i = 0; i < shape.words; ++i) words.push_back("x" + std::to_string(i));
  Vocabulary vocab(words);

  GeneratorDims dims;
  dims.vocab_size = vocab.size();
  dims.embed_size = shape.embed;
  dims.hidden_size = shape.hidden;
  dims.feature_size = shape.feature;
  dims.max_len = shape.max_len;

  Rng rng = Rng::substream(seed, "toy");
  Matrix class_embeddings(shape.hidden, shape.classes);
  for (Index k = 0; k < class_embeddings.size(); ++k) class_embeddings.data()[k] = rng.uniform(-1, 1);

  ToyProblem p;
  p.model = make_generator(dims, vocab, AblationMode::Explanation, class_embeddings, rng);
  init_uniform(p.model.weights, shape.generator_scale, rng.engine());
  p.classifier = make_classifier(vocab, shape.classes, shape.embed, shape.hidden, rng);
  init_uniform(p.classifier.weights, shape.classifier_scale, rng.engine());
  p.classifier.frozen = true;

  p.true_class = static_cast<int>(rng.index(static_cast<std::size_t>(shape.classes)));
  Vector feature(shape.feature);
  for (Index d = 0; d < feature.size(); ++d) feature(d) = rng.normal();
  p.cond = p.model.condition(feature, p.true_class);
  p.max_len = shape.max_len;

  for (int b = 0; b < shape.batch; ++b) {
    Vector f(shape.feature);
    for (Index d = 0; d < f.size(); ++d) f(d) = rng.normal();
    const int label = static_cast<int>(rng.index(static_cast<std::size_t>(shape.classes)));
    TokenSequence seq;
    const auto len = 1 + rng.index(static_cast<std::size_t>(shape.max_len - 1));
    for (std::size_t t = 0; t < len; ++t) {
      seq.push_back(Vocabulary::kReserved - 1 + static_cast<TokenId>(rng.index(static_cast<std::size_t>(shape.words) + 1)));
    }
    seq.push_back(Vocabulary::kEos);
    p.batch.push_back({seq, p.model.condition(f, label)});
  }
  return p;
}

ToyProblem make_oracle_problem(std::uint64_t seed, Real eos_bias, Real sharpness) {
  ToyProblem p = make_toy_problem(oracle_shape(), seed);
  p.model.weights.output_bias(Vocabulary::kEos) += eos_bias;

  // One cell unit counts non-EOS tokens: gates saturated open, candidate tanh(3) per token.
  auto& w = p.classifier.weights;
  const Index h = w.lstm.hidden_size();
  w = zeros_like(w);
  for (Index t = 0; t < w.embedding.cols(); ++t) {
    if (t != Vocabulary::kEos) w.embedding(0, t) = 1;
  }
  w.lstm.bias.head(3 * h).setConstant(10);
  w.lstm.input_weights(3 * h, 0) = 3;
  // Empty sentence: unit 0 stays 0. One or more tokens: unit 0 is at least 0.76.
  w.projection(1, 0) = sharpness;
  w.projection_bias(1) = -0.38 * sharpness;
  p.true_class = 0;
  p.cond = p.model.condition(p.cond.image_feature, p.true_class);
  return p;
}

GradientCheckSummary check_generator_gradients(const ToyProblem& problem, std::uint64_t seed,
                                               Real epsilon) {
  GeneratorModel model = problem.model;
  auto with_weights = [&](const GeneratorWeights& w) -> const GeneratorModel& {
    model.weights = w;
    return model;
  };

  GradientCheckSummary out;
  LossFunction<GeneratorWeights> relevance = [&](const GeneratorWeights& w, GeneratorWeights* grad) {
    auto r = relevance_loss(with_weights(w), problem.batch, grad != nullptr);
    if (grad != nullptr) *grad = std::move(r.grad);
    return r.loss;
  };
  ReferenceLoss<GeneratorWeights> relevance_ref = [&](const GeneratorWeights& w) {
    const GeneratorModel& m = with_weights(w);
    long double total = 0;
    for (const auto& ex : problem.batch) {
      total -= reference_log_prob<long double>(m, ex.cond, ex.tokens, ex.tokens.size());
    }
    return total / static_cast<long double>(problem.batch.size());
  };
  out.relevance = grad_check(relevance, problem.model.weights, epsilon, relevance_ref);

  Rng rng = Rng::substream(seed, "gradcheck-sample");
  SampledSentence s;
  do {
    s = sample_sequence(problem.model, problem.cond, rng, problem.max_len);
  } while (s.sampled_steps() < 2 && problem.max_len > 2);

  LossFunction<GeneratorWeights> log_prob = [&](const GeneratorWeights& w, GeneratorWeights* grad) {
    if (grad != nullptr) *grad = zeros_like(w);
    return accumulate_log_prob_gradient(with_weights(w), s.cond, s.tokens, s.sampled_steps(), 1.0, grad);
  };
  ReferenceLoss<GeneratorWeights> log_prob_ref = [&](const GeneratorWeights& w) {
    return reference_log_prob<long double>(with_weights(w), s.cond, s.tokens, s.sampled_steps());
  };
  out.log_prob = grad_check(log_prob, problem.model.weights, epsilon, log_prob_ref);
  return out;
}

OracleComparison compare_with_oracle(const ToyProblem& problem, std::size_t samples,
                                     std::uint64_t seed, Real threshold) {
  const OracleResult exact =
      oracle_expected_reward(problem.model, problem.cond, problem.classifier, problem.true_class,
                             problem.max_len);
  Rng rng = Rng::substream(seed, "sampling");
  const EstimatorStats mc = monte_carlo_gradient(problem.model, problem.cond, problem.classifier,
                                                 problem.true_class, problem.max_len, samples, rng);
  const Vector truth = flatten(exact.gradient);

  OracleComparison out;
  out.probability_mass = exact.probability_mass;
  out.expected_reward = exact.expected_reward;
  out.monte_carlo_reward = mc.mean_reward;
  out.reward_standard_error = std::sqrt(mc.reward_variance / static_cast<Real>(samples));
  out.sequences = exact.sequences;
  for (Index i = 0; i < truth.size(); ++i) {
    if (std::abs(truth(i)) <= threshold) continue;
    ++out.compared_entries;
    const Real rel = std::abs(mc.mean(i) - truth(i)) / std::abs(truth(i));
    if (rel > out.max_relative_error) {
      out.max_relative_error = rel;
      out.worst_entry = i;
      out.exact_at_worst = truth(i);
      out.estimate_at_worst = mc.mean(i);
      out.standard_error_at_worst = std::sqrt(mc.variance(i) / static_cast<Real>(samples));
    }
  }
  return out;
}

}  // namespace vexpl
