// Discriminative training with the score-function (REINFORCE) estimator.
//
// The generator minimizes  L_R - lambda * E_{w ~ p(w|I,C)}[R_D(w)]  where R_D is a
// frozen classifier's probability of the true class. The expectation's gradient
// is estimated from sampled sentences as R_D(w) * grad log p(w), so one update
// applies  grad L_R - lambda * R_D(w) * grad log p(w).
#pragma once

#include "vexpl/condgen.hpp"
#include "vexpl/netcore.hpp"
#include "vexpl/rng.hpp"
#include "vexpl/sentclass.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace vexpl {

/// Raised when a SampledSentence no longer matches the model it is differentiated against.
class StaleSampleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TrainConfig {
  Real lambda = 1.0;
  int samples_per_instance = 1;
  Real learning_rate = 0.1;
  int epochs = 30;
  Real gradient_clip = 5.0;
  std::uint64_t seed = 1;
  AblationMode mode = AblationMode::Explanation;
  int batch_size = 16;
  int max_len = 20;
  /// Subtract a moving average of past rewards before weighting. Off by default.
  bool reward_baseline = false;
  Real baseline_decay = 0.9;

  void validate() const;
};

struct UpdateRecord {
  int epoch = 0;
  Real relevance_loss = 0;
  Real mean_reward = 0;
  Real relevance_grad_norm = 0;
  Real discriminative_grad_norm = 0;
  Real validation_objective = 0;
};

/// reward_value * grad log p(sampled), with the forced final EOS (if any) not scored.
GeneratorWeights discriminative_gradient(const GeneratorModel& model, const SampledSentence& sampled,
                                         Real reward_value);

struct BatchGradients {
  LossAndGradient relevance;
  /// Mean over instances and samples of (reward - baseline) * grad log p.
  GeneratorWeights discriminative;
  /// relevance.grad - lambda * discriminative.
  GeneratorWeights combined;
  Real mean_reward = 0;
  std::size_t samples = 0;
};

/// Moving-average reward baseline state; unused unless TrainConfig::reward_baseline.
struct RewardBaseline {
  Real value = 0;
  bool initialized = false;
};

BatchGradients combined_gradient(const GeneratorModel& model, std::span<const TrainingExample> batch,
                                 const ClassifierModel* classifier, const TrainConfig& config,
                                 Rng& sampling, RewardBaseline* baseline = nullptr);

/// One optimizer step: combined gradient, global-norm clipping, SGD. `epoch` is for error context.
UpdateRecord combined_update(GeneratorModel& model, std::span<const TrainingExample> batch,
                             const ClassifierModel* classifier, const TrainConfig& config,
                             Rng& sampling, int epoch = 0, RewardBaseline* baseline = nullptr);

struct TrainResult {
  GeneratorModel model;  // best-validation weights
  std::vector<UpdateRecord> log;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const UpdateRecord&)>;

/// Runs config.epochs epochs of combined_update over shuffled minibatches and keeps
/// the weights with the lowest validation objective (relevance loss minus lambda
/// times mean sampled reward).
TrainResult train(GeneratorModel initial, std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set, const ClassifierModel* classifier,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct OracleResult {
  Real expected_reward = 0;
  GeneratorWeights gradient;
  Real probability_mass = 0;
  std::size_t sequences = 0;
};

/// Exact E[R_D] and grad E[R_D] = sum_w p(w) R_D(w) grad log p(w) by enumerating every
/// sentence the sampler can produce. Requires vocab_size^max_len <= 1e6.
OracleResult oracle_expected_reward(const GeneratorModel& model, const Conditioning& cond,
                                    const ClassifierModel& classifier, int true_class, int max_len);

/// Monte Carlo moments of the per-sample estimator R_D(w) grad log p(w), flattened.
struct EstimatorStats {
  Vector mean;
  Vector variance;  // per-entry sample variance
  Real mean_reward = 0;
  Real reward_variance = 0;
  std::size_t samples = 0;

  /// Standard error of the norm of `mean` if the true mean were zero.
  Real null_norm_standard_error() const;
};

EstimatorStats monte_carlo_gradient(const GeneratorModel& model, const Conditioning& cond,
                                    const ClassifierModel& classifier, int true_class, int max_len,
                                    std::size_t samples, Rng& rng);

}  // namespace vexpl
