// Small randomized problems for checking gradients and the REINFORCE estimator
// against exact references.
#pragma once

#include "vexpl/condgen.hpp"
#include "vexpl/reinforce.hpp"
#include "vexpl/sentclass.hpp"

#include <cstdint>
#include <vector>

namespace vexpl {

struct ToyShape {
  int words = 3;  // non-reserved vocabulary entries
  int embed = 4;
  int hidden = 8;
  int feature = 3;
  int classes = 2;
  int max_len = 4;
  int batch = 2;
  /// Generator weights are uniform in [-generator_scale, generator_scale].
  Real generator_scale = 0.5;
  Real classifier_scale = 1.0;
};

struct ToyProblem {
  GeneratorModel model;
  ClassifierModel classifier;
  std::vector<TrainingExample> batch;
  Conditioning cond;
  int true_class = 0;
  int max_len = 0;
};

/// Random explanation-mode generator, frozen random classifier and a random batch.
ToyProblem make_toy_problem(const ToyShape& shape, std::uint64_t seed);

struct GradientCheckSummary {
  GradCheckReport relevance;
  GradCheckReport log_prob;
};

/// Checks relevance-loss gradients on the problem's batch and grad log p of one
/// sampled sentence against central differences.
GradientCheckSummary check_generator_gradients(const ToyProblem& problem, std::uint64_t seed,
                                               Real epsilon = 1e-5);

struct OracleComparison {
  Real max_relative_error = 0;  // over entries with |exact| > threshold
  Index compared_entries = 0;
  Index worst_entry = -1;
  Real exact_at_worst = 0;
  Real estimate_at_worst = 0;
  /// Monte Carlo standard error of the estimate at the worst entry.
  Real standard_error_at_worst = 0;
  Real probability_mass = 0;
  Real expected_reward = 0;
  Real monte_carlo_reward = 0;
  Real reward_standard_error = 0;
  std::size_t sequences = 0;
};

/// Monte Carlo estimator mean over `samples` draws versus the enumeration oracle.
OracleComparison compare_with_oracle(const ToyProblem& problem, std::size_t samples,
                                     std::uint64_t seed, Real threshold = 1e-3);

/// Shape used for the estimator-versus-oracle check: 4-token vocabulary, max_len 3, hidden 4.
ToyShape oracle_shape();

/// Oracle-check instance: random generator of oracle_shape() with the EOS output bias
/// raised by `eos_bias`, and a hand-set classifier that assigns class 0 to the empty
/// sentence and class 1 to any longer one (true class 0, reward sharpness `sharpness`).
/// A reward concentrated on one sentence keeps the per-entry spread of R * grad log p
/// comparable to its mean; with random classifiers it is typically 50 to 300 times larger.
ToyProblem make_oracle_problem(std::uint64_t seed, Real eos_bias = 1.0, Real sharpness = 40.0);

}  // namespace vexpl
