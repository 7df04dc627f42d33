// Declarative experiment configuration: a key = value text file ('#' starts a
// comment). Unknown keys are rejected. `to_string` emits the fully resolved
// configuration in the same format, so a logged config can be fed back in.
//
//   seed                      run seed (default 1)
//   seeds                     number of seeds for `report` (default 5)
//   synth.classes             synth.vocab_size         synth.sentences_per_instance
//   synth.instances_per_class synth.planted_per_class  synth.feature_dim
//   synth.class_separation    synth.feature_noise      synth.min_fillers
//   synth.max_fillers         synth.filler_zipf        synth.val_per_class
//   synth.test_per_class      synth.seed
//   model.embed  model.hidden  model.max_len
//   train.lambda  train.samples  train.lr  train.epochs  train.clip  train.batch
//   train.baseline (0/1)  train.baseline_decay
//   classifier.embed  classifier.hidden  classifier.epochs  classifier.lr  classifier.batch
#pragma once

#include "vexpl/condgen.hpp"
#include "vexpl/data.hpp"
#include "vexpl/reinforce.hpp"
#include "vexpl/sentclass.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace vexpl {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int seeds = 5;
  SynthSpec synth;
  GeneratorDims dims;
  TrainConfig train;
  ClassifierHyperparams classifier;
};

using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::istream& in, const std::string& source);
ConfigMap read_config_file(const std::filesystem::path& path);

/// Applies overrides, then validates the result; throws std::invalid_argument naming
/// any unknown key or bad value.
void apply_config(ExperimentConfig& config, const ConfigMap& values);

std::string to_string(const ExperimentConfig& config);

}  // namespace vexpl
