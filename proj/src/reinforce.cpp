#include "vexpl/reinforce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vexpl {
namespace {

// Neumaier compensated summation.
struct CompensatedSum {
  Real sum = 0;
  Real carry = 0;

  void add(Real x) {
    const Real t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  Real value() const { return sum + carry; }
};

std::string context(int epoch, std::size_t instance) {
  return " (epoch " + std::to_string(epoch) + ", batch instance " + std::to_string(instance) + ")";
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda >= 0)) throw std::invalid_argument("config: lambda must be >= 0");
  if (samples_per_instance < 1) throw std::invalid_argument("config: samples must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("config: learning rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch size must be >= 1");
  if (max_len < 1) throw std::invalid_argument("config: max_len must be >= 1");
  if (!(baseline_decay >= 0 && baseline_decay < 1)) {
    throw std::invalid_argument("config: baseline decay must be in [0, 1)");
  }
}

GeneratorWeights discriminative_gradient(const GeneratorModel& model, const SampledSentence& sampled,
                                         Real reward_value) {
  if (!(reward_value >= 0 && reward_value <= 1)) {
    throw std::invalid_argument("discriminative_gradient: reward must be in [0, 1]");
  }
  GeneratorWeights grad(model.dims);
  std::vector<Vector> probs;
  accumulate_log_prob_gradient(model, sampled.cond, sampled.tokens, sampled.sampled_steps(),
                               reward_value, &grad, &probs);
  if (probs.size() != sampled.step_probs.size()) {
    throw StaleSampleError("discriminative_gradient: sample has inconsistent step count");
  }
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] != sampled.step_probs[t]) {
      throw StaleSampleError(
          "discriminative_gradient: model changed since the sentence was sampled");
    }
  }
  return grad;
}

BatchGradients combined_gradient(const GeneratorModel& model, std::span<const TrainingExample> batch,
                                 const ClassifierModel* classifier, const TrainConfig& config,
                                 Rng& sampling, RewardBaseline* baseline) {
  BatchGradients out;
  out.relevance = relevance_loss(model, batch);
  out.discriminative = GeneratorWeights(model.dims);
  if (config.lambda > 0) {
    if (classifier == nullptr || !classifier->frozen) {
      throw std::invalid_argument("combined_gradient: lambda > 0 requires a frozen classifier");
    }
    const auto s = static_cast<std::size_t>(config.samples_per_instance);
    const Real weight = 1.0 / static_cast<Real>(batch.size() * s);
    CompensatedSum rewards;
    for (const auto& ex : batch) {
      for (std::size_t k = 0; k < s; ++k) {
        const SampledSentence sampled = sample_sequence(model, ex.cond, sampling, config.max_len);
        const Real r = reward(*classifier, sampled.tokens, ex.cond.class_label);
        rewards.add(r);
        Real coeff = r;
        if (config.reward_baseline && baseline != nullptr) {
          if (!baseline->initialized) {
            baseline->value = r;
            baseline->initialized = true;
          }
          coeff = r - baseline->value;
          baseline->value = config.baseline_decay * baseline->value + (1 - config.baseline_decay) * r;
        }
        accumulate_log_prob_gradient(model, sampled.cond, sampled.tokens, sampled.sampled_steps(),
                                     weight * coeff, &out.discriminative);
        ++out.samples;
      }
    }
    out.mean_reward = rewards.value() / static_cast<Real>(out.samples);
  }
  out.combined = out.relevance.grad;
  if (config.lambda > 0) add_scaled(out.combined, -config.lambda, out.discriminative);
  return out;
}

UpdateRecord combined_update(GeneratorModel& model, std::span<const TrainingExample> batch,
                             const ClassifierModel* classifier, const TrainConfig& config,
                             Rng& sampling, int epoch, RewardBaseline* baseline) {
  BatchGradients g = combined_gradient(model, batch, classifier, config, sampling, baseline);
  if (!std::isfinite(g.relevance.loss)) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Real l = relevance_loss(model, batch.subspan(i, 1), false).loss;
      if (!std::isfinite(l)) throw NumericError("non-finite relevance loss" + context(epoch, i));
    }
    throw NumericError("non-finite relevance loss" + context(epoch, 0));
  }
  if (!all_finite(g.combined)) {
    throw NumericError("non-finite gradient" + context(epoch, 0));
  }
  UpdateRecord rec;
  rec.epoch = epoch;
  rec.relevance_loss = g.relevance.loss;
  rec.mean_reward = g.mean_reward;
  rec.relevance_grad_norm = std::sqrt(squared_norm(g.relevance.grad));
  rec.discriminative_grad_norm = std::sqrt(squared_norm(g.discriminative));
  clip_global_norm(g.combined, config.gradient_clip);
  add_scaled(model.weights, -config.learning_rate, g.combined);
  return rec;
}

namespace {

Real validation_objective(const GeneratorModel& model, std::span<const TrainingExample> val,
                          const ClassifierModel* classifier, const TrainConfig& config) {
  Real objective = relevance_loss(model, val, false).loss;
  if (config.lambda > 0) {
    Rng rng = Rng::substream(config.seed, "validation");
    Real total = 0;
    for (const auto& ex : val) {
      const auto s = sample_sequence(model, ex.cond, rng, config.max_len);
      total += reward(*classifier, s.tokens, ex.cond.class_label);
    }
    objective -= config.lambda * total / static_cast<Real>(val.size());
  }
  return objective;
}

}  // namespace

TrainResult train(GeneratorModel initial, std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set, const ClassifierModel* classifier,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (config.lambda > 0 && (classifier == nullptr || !classifier->frozen)) {
    throw std::invalid_argument("train: lambda > 0 requires a trained, frozen sentence classifier");
  }

  Rng shuffle = Rng::substream(config.seed, "shuffle");
  Rng sampling = Rng::substream(config.seed, "sampling");
  RewardBaseline baseline;

  TrainResult result;
  GeneratorModel model = std::move(initial);
  Real best = std::numeric_limits<Real>::infinity();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainingExample> batch;
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    UpdateRecord epoch_rec;
    epoch_rec.epoch = epoch;
    std::size_t batches = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
      const UpdateRecord r =
          combined_update(model, batch, classifier, config, sampling, epoch, &baseline);
      const auto n = static_cast<Real>(end - start);
      epoch_rec.relevance_loss += n * r.relevance_loss;
      epoch_rec.mean_reward += n * r.mean_reward;
      epoch_rec.relevance_grad_norm += r.relevance_grad_norm;
      epoch_rec.discriminative_grad_norm += r.discriminative_grad_norm;
      seen += end - start;
      ++batches;
    }
    epoch_rec.relevance_loss /= static_cast<Real>(seen);
    epoch_rec.mean_reward /= static_cast<Real>(seen);
    epoch_rec.relevance_grad_norm /= static_cast<Real>(batches);
    epoch_rec.discriminative_grad_norm /= static_cast<Real>(batches);

    const auto& val = validation_set.empty() ? train_set : validation_set;
    epoch_rec.validation_objective = validation_objective(model, val, classifier, config);
    if (epoch_rec.validation_objective < best) {
      best = epoch_rec.validation_objective;
      result.model = model;
      result.best_epoch = epoch;
    }
    result.log.push_back(epoch_rec);
    if (on_epoch) on_epoch(epoch_rec);
  }
  return result;
}

OracleResult oracle_expected_reward(const GeneratorModel& model, const Conditioning& cond,
                                    const ClassifierModel& classifier, int true_class, int max_len) {
  if (max_len < 1) throw std::invalid_argument("oracle: max_len must be >= 1");
  const Real log_count = static_cast<Real>(max_len) * std::log(static_cast<Real>(model.dims.vocab_size));
  if (log_count > std::log(1e6) + 1e-9) {
    throw std::invalid_argument("oracle: vocab_size^max_len exceeds 1e6, enumeration refused");
  }

  OracleResult out;
  out.gradient = GeneratorWeights(model.dims);
  CompensatedSum mass;
  CompensatedSum expected;

  auto visit_terminal = [&](const TokenSequence& seq, Real log_p, bool forced) {
    const Real p = std::exp(log_p);
    const Real r = reward(classifier, seq, true_class);
    mass.add(p);
    expected.add(p * r);
    const std::size_t scored = forced ? seq.size() - 1 : seq.size();
    accumulate_log_prob_gradient(model, cond, seq, scored, p * r, &out.gradient);
    ++out.sequences;
  };

  TokenSequence prefix;
  std::function<void(const GeneratorState&, TokenId, Real)> expand =
      [&](const GeneratorState& state, TokenId prev, Real log_p) {
        if (static_cast<int>(prefix.size()) + 1 >= max_len) {
          prefix.push_back(Vocabulary::kEos);
          visit_terminal(prefix, log_p, true);
          prefix.pop_back();
          return;
        }
        const StepOutput next = forward_step(model, prev, state, cond);
        for (TokenId w = 0; w < model.dims.vocab_size; ++w) {
          const Real lp = log_p + std::log(next.probs(w));
          prefix.push_back(w);
          if (w == Vocabulary::kEos) {
            visit_terminal(prefix, lp, false);
          } else {
            expand(next.state, w, lp);
          }
          prefix.pop_back();
        }
      };
  expand(GeneratorState::zeros(model.dims.hidden_size), Vocabulary::kSos, 0.0);

  out.probability_mass = mass.value();
  out.expected_reward = expected.value();
  return out;
}

Real EstimatorStats::null_norm_standard_error() const {
  if (samples == 0) return 0;
  return std::sqrt(variance.sum() / static_cast<Real>(samples));
}

EstimatorStats monte_carlo_gradient(const GeneratorModel& model, const Conditioning& cond,
                                    const ClassifierModel& classifier, int true_class, int max_len,
                                    std::size_t samples, Rng& rng) {
  EstimatorStats st;
  const Index n = parameter_count(model.weights);
  st.mean = Vector::Zero(n);
  Vector m2 = Vector::Zero(n);
  Real reward_m2 = 0;
  GeneratorWeights grad(model.dims);
  for (std::size_t i = 0; i < samples; ++i) {
    const SampledSentence s = sample_sequence(model, cond, rng, max_len);
    const Real r = reward(classifier, s.tokens, true_class);
    scale_in_place(grad, 0.0);
    accumulate_log_prob_gradient(model, s.cond, s.tokens, s.sampled_steps(), r, &grad);
    const Vector x = flatten(grad);
    const auto count = static_cast<Real>(i + 1);
    // Welford
    const Vector delta = x - st.mean;
    st.mean += delta / count;
    m2 += delta.cwiseProduct(x - st.mean);
    const Real dr = r - st.mean_reward;
    st.mean_reward += dr / count;
    reward_m2 += dr * (r - st.mean_reward);
  }
  st.samples = samples;
  if (samples > 1) {
    st.variance = m2 / static_cast<Real>(samples - 1);
    st.reward_variance = reward_m2 / static_cast<Real>(samples - 1);
  } else {
    st.variance = Vector::Zero(n);
  }
  return st;
}

}  // namespace vexpl
