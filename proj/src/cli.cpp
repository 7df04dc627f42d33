#include "vexpl/cli.hpp"

#include "vexpl/config.hpp"
#include "vexpl/data.hpp"
#include "vexpl/diagnostics.hpp"
#include "vexpl/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace vexpl::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<std::string> mode;
  std::optional<double> lambda;
  std::optional<int> samples;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> max_len;
  bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value experiment config file");
  cmd->add_option("--seed", f.seed, "run seed (default 1, echoed in the log)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--mode", f.mode,
                  "definition | description | explanation-label | explanation-dis | explanation");
  cmd->add_option("--lambda", f.lambda, "discriminative loss weight");
  cmd->add_option("--samples", f.samples, "sampled sentences per instance (oracle-check: total draws)");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--lr", f.lr, "SGD learning rate");
  cmd->add_option("--max-len", f.max_len, "maximum sentence length including EOS");
  cmd->add_flag("--overwrite", f.overwrite, "replace existing output files");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) apply_config(c, read_config_file(f.config));
  if (f.seed) c.seed = *f.seed;
  if (f.lambda) c.train.lambda = *f.lambda;
  if (f.samples) c.train.samples_per_instance = *f.samples;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.lr) c.train.learning_rate = *f.lr;
  if (f.max_len) c.dims.max_len = *f.max_len;
  apply_config(c, {});
  return c;
}

fs::path output_file(const CommonFlags& f, const std::string& name) {
  fs::create_directories(f.out);
  fs::path p = fs::path(f.out) / name;
  if (fs::exists(p) && !f.overwrite) {
    throw UsageError("refusing to overwrite " + p.string() + " (pass --overwrite)");
  }
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string log_line(const UpdateRecord& r) {
  return nlohmann::json{{"epoch", r.epoch},
                        {"relevance_loss", r.relevance_loss},
                        {"mean_reward", r.mean_reward},
                        {"relevance_grad_norm", r.relevance_grad_norm},
                        {"discriminative_grad_norm", r.discriminative_grad_norm},
                        {"validation_objective", r.validation_objective}}
      .dump();
}

void echo_config(std::ostream& out, const std::string& command, const ExperimentConfig& c) {
  out << "# vexpl " << command << " resolved configuration\n" << to_string(c) << std::flush;
}

Corpus corpus_for(const std::string& path) {
  if (path.empty()) throw UsageError("--corpus is required");
  return load_corpus(path);
}

int cmd_synth(const CommonFlags& f, const std::string& spec, std::ostream& out) {
  ExperimentConfig c = resolve(f);
  if (spec != "default") apply_config(c, read_config_file(spec));
  echo_config(out, "synth-data", c);
  const Corpus corpus = generate_synth(c.synth);
  const fs::path p = output_file(f, "corpus.jsonl");
  save_corpus(corpus, p);
  out << "wrote " << p.string() << " (" << corpus.instances.size() << " instances, "
      << corpus.num_classes << " classes, vocabulary " << corpus.vocab.size() << ")\n";
  return 0;
}

int cmd_train_classifier(const CommonFlags& f, const std::string& corpus_path, std::ostream& out) {
  const ExperimentConfig c = resolve(f);
  echo_config(out, "train-classifier", c);
  const Corpus corpus = corpus_for(corpus_path);
  const fs::path ck = output_file(f, "classifier.ckpt");
  const auto result = train_sentence_classifier(corpus, c, c.seed);
  result.model.to_checkpoint().save(ck);
  out << "held-out accuracy " << result.held_out_accuracy << "\nwrote " << ck.string() << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& corpus_path, const std::string& classifier_path,
              const std::string& lm_path, std::ostream& out) {
  ExperimentConfig c = resolve(f);
  if (!f.mode) throw UsageError("--mode is required");
  AblationMode mode;
  try {
    mode = parse_ablation_mode(*f.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (f.lambda && *f.lambda > 0 && !traits(mode).discriminative) {
    throw UsageError("mode " + *f.mode + " is trained without the discriminative loss; --lambda must be 0");
  }
  c.train.mode = mode;
  c.train.lambda = effective_lambda(mode, c.train.lambda);
  echo_config(out, "train --mode " + std::string(to_string(mode)), c);
  const Corpus corpus = corpus_for(corpus_path);

  std::optional<ClassifierModel> classifier;
  if (c.train.lambda > 0) {
    if (classifier_path.empty()) {
      throw UsageError("mode " + std::string(to_string(mode)) +
                       " with lambda > 0 needs a frozen sentence classifier: pass --classifier "
                       "<classifier.ckpt> (create one with train-classifier)");
    }
    classifier = ClassifierModel::from_checkpoint(Checkpoint::load(classifier_path));
    if (!classifier->frozen) throw UsageError("classifier checkpoint is not marked frozen");
  }
  Matrix embeddings;
  if (traits(mode).label) {
    if (lm_path.empty()) {
      throw UsageError("mode " + std::string(to_string(mode)) +
                       " needs class embeddings: pass --lm <generator-description.ckpt>");
    }
    const GeneratorModel lm = GeneratorModel::from_checkpoint(Checkpoint::load(lm_path));
    embeddings = class_embeddings_from(lm, corpus);
  }

  const std::string name(to_string(mode));
  const fs::path ck = output_file(f, "generator-" + name + ".ckpt");
  const fs::path log = output_file(f, "train-" + name + ".jsonl");
  const fs::path cfg = output_file(f, "config-" + name + ".txt");
  write_text(cfg, to_string(c));
  std::ofstream log_out(log, std::ios::trunc);
  const TrainResult r = train_variant(corpus, mode, c, c.seed, classifier ? &*classifier : nullptr,
                                      embeddings, [&](const UpdateRecord& rec) {
                                        log_out << log_line(rec) << "\n";
                                        out << log_line(rec) << "\n";
                                      });
  r.model.to_checkpoint().save(ck);
  out << "best epoch " << r.best_epoch << "\nwrote " << ck.string() << "\n";
  return 0;
}

int cmd_generate(const CommonFlags& f, const std::string& model_path, const std::string& corpus_path,
                 const std::string& split, bool sample, const std::string& labels_path,
                 std::ostream& out) {
  const ExperimentConfig c = resolve(f);
  echo_config(out, "generate", c);
  if (model_path.empty()) throw UsageError("--model is required");
  const GeneratorModel model = GeneratorModel::from_checkpoint(Checkpoint::load(model_path));
  const Corpus corpus = corpus_for(corpus_path);
  const fs::path p = output_file(f, "generated-" + std::string(to_string(model.mode)) + ".txt");
  Rng rng = Rng::substream(c.seed, "sampling");
  std::ostringstream text;
  std::vector<EvalInstance> instances = eval_instances(corpus, parse_split(split));
  if (!labels_path.empty()) apply_predicted_labels(instances, load_labels(labels_path, corpus.num_classes));
  for (const auto& inst : instances) {
    const Conditioning cond = model.condition(inst.image_feature, inst.conditioning_label);
    const TokenSequence seq = sample ? sample_sequence(model, cond, rng, c.dims.max_len).tokens
                                     : greedy_decode(model, cond, c.dims.max_len);
    text << inst.id << "\t" << inst.label << "\t" << inst.conditioning_label << "\t"
         << join(model.vocab.decode(seq)) << "\n";
  }
  write_text(p, text.str());
  out << text.str() << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::vector<std::string>& model_paths,
                 const std::string& corpus_path, const std::string& classifier_path,
                 const std::string& labels_path, std::ostream& out) {
  const ExperimentConfig c = resolve(f);
  echo_config(out, "evaluate", c);
  if (model_paths.empty()) throw UsageError("--models is required");
  if (classifier_path.empty()) throw UsageError("--classifier is required");
  const Corpus corpus = corpus_for(corpus_path);
  const ClassifierModel clf = ClassifierModel::from_checkpoint(Checkpoint::load(classifier_path));
  std::vector<GeneratorModel> models;
  for (const auto& p : model_paths) models.push_back(GeneratorModel::from_checkpoint(Checkpoint::load(p)));
  std::vector<NamedModel> named;
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::string name(to_string(models[i].mode));
    for (std::size_t j = 0; j < i; ++j) {
      if (named[j].name == name) name += "#" + std::to_string(i);
    }
    named.push_back({name, &models[i]});
  }
  const fs::path table = output_file(f, "report.txt");
  const fs::path summary = output_file(f, "report.jsonl");
  const fs::path per_image = output_file(f, "per_image.jsonl");
  std::vector<EvalInstance> test = eval_instances(corpus, Split::Test);
  if (!labels_path.empty()) apply_predicted_labels(test, load_labels(labels_path, corpus.num_classes));
  const MetricReport report =
      evaluate_models(named, test, class_pools(corpus, Split::Test),
                      ngram_stats(corpus, Split::Test), clf, c.dims.max_len);
  write_text(table, report.table());
  write_text(summary, report.summary_jsonl());
  write_text(per_image, report.per_image_jsonl());
  out << report.table();
  return 0;
}

int cmd_gradcheck(const CommonFlags& f, std::ostream& out) {
  const ExperimentConfig c = resolve(f);
  out << "# vexpl gradcheck seed = " << c.seed << "\n";
  const ToyProblem p = make_toy_problem(ToyShape{}, c.seed);
  const auto s = check_generator_gradients(p, c.seed);
  out << "relevance loss: max relative error " << s.relevance.max_relative_error << " over "
      << s.relevance.entries_checked << " entries (worst in " << s.relevance.worst_block << ": analytic "
      << s.relevance.analytic_at_worst << ", numeric " << s.relevance.numeric_at_worst << ")\n";
  out << "log p(sample):  max relative error " << s.log_prob.max_relative_error << " over "
      << s.log_prob.entries_checked << " entries (worst in " << s.log_prob.worst_block << ": analytic "
      << s.log_prob.analytic_at_worst << ", numeric " << s.log_prob.numeric_at_worst << ")\n";
  const bool ok = s.relevance.passed(1e-5) && s.log_prob.passed(1e-5);
  out << (ok ? "PASS" : "FAIL") << " (tolerance 1e-5)\n";
  return ok ? 0 : 1;
}

int cmd_oracle_check(const CommonFlags& f, std::ostream& out) {
  const ExperimentConfig c = resolve(f);
  const std::size_t samples = f.samples ? static_cast<std::size_t>(*f.samples) : 50000;
  out << "# vexpl oracle-check seed = " << c.seed << " samples = " << samples << "\n";
  const ToyProblem p = make_oracle_problem(c.seed);
  const OracleComparison r = compare_with_oracle(p, samples, c.seed);
  out << "enumerated sequences " << r.sequences << ", probability mass " << std::setprecision(15)
      << r.probability_mass << "\n"
      << std::setprecision(6) << "expected reward " << r.expected_reward << " (Monte Carlo "
      << r.monte_carlo_reward << " +- " << r.reward_standard_error << ")\n"
      << "gradient: max relative error " << r.max_relative_error << " over " << r.compared_entries
      << " entries with |exact| > 1e-3\n"
      << "worst entry " << r.worst_entry << ": exact " << r.exact_at_worst << ", estimate "
      << r.estimate_at_worst << " +- " << r.standard_error_at_worst << "\n";
  const bool ok = std::abs(r.probability_mass - 1) <= 1e-9 && r.max_relative_error < 0.02;
  out << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_report(const CommonFlags& f, const std::string& corpus_path, std::ostream& out) {
  const ExperimentConfig c = resolve(f);
  echo_config(out, "report", c);
  const Corpus corpus = corpus_path.empty() ? generate_synth(c.synth) : load_corpus(corpus_path);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < c.seeds; ++i) seeds.push_back(c.seed + static_cast<std::uint64_t>(i));
  const fs::path table = output_file(f, "table.txt");
  const fs::path per_seed = output_file(f, "table-per-seed.jsonl");
  const ReproduceResult r = reproduce_table(corpus, c, seeds, &out);
  std::string text = "median over " + std::to_string(seeds.size()) + " seeds\n" + r.medians.table() +
                     format_verdict(r.verdict);
  std::string lines;
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    std::istringstream in(r.reports[i].summary_jsonl());
    for (std::string line; std::getline(in, line);) {
      auto j = nlohmann::json::parse(line);
      j["seed"] = r.seeds[i];
      lines += j.dump() + "\n";
    }
  }
  write_text(table, text);
  write_text(per_seed, lines);
  out << text;
  return r.verdict.discriminative_orderings() ? 0 : 3;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Class-discriminative sentence generation with a REINFORCE discriminative loss"};
  app.require_subcommand(1, 1);
  CommonFlags flags;

  std::string spec = "default";
  auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
  add_common(synth, flags);
  synth->add_option("--spec", spec, "'default' or a config file with synth.* keys");

  std::string corpus_path, classifier_path, lm_path, model_path, split = "test";
  std::vector<std::string> model_paths;
  bool sample = false;
  std::string labels_path;

  auto* train_clf = app.add_subcommand("train-classifier", "train and freeze the sentence classifier");
  add_common(train_clf, flags);
  train_clf->add_option("--corpus", corpus_path, "corpus file")->required();

  auto* train_gen = app.add_subcommand("train", "train one generator variant");
  add_common(train_gen, flags);
  train_gen->add_option("--corpus", corpus_path, "corpus file")->required();
  train_gen->add_option("--classifier", classifier_path, "frozen classifier checkpoint");
  train_gen->add_option("--lm", lm_path, "image-only generator checkpoint for class embeddings");

  auto* generate = app.add_subcommand("generate", "decode sentences for a corpus split");
  add_common(generate, flags);
  generate->add_option("--model", model_path, "generator checkpoint")->required();
  generate->add_option("--corpus", corpus_path, "corpus file")->required();
  generate->add_option("--split", split, "train | val | test");
  generate->add_flag("--sample", sample, "sample instead of greedy decoding");
  generate->add_option("--labels", labels_path,
                       "predicted classes ('<id> <class>' per line) to condition on instead of ground truth");

  auto* evaluate = app.add_subcommand("evaluate", "score generator checkpoints on the test split");
  add_common(evaluate, flags);
  evaluate->add_option("--models", model_paths, "generator checkpoints")->delimiter(',')->required();
  evaluate->add_option("--corpus", corpus_path, "corpus file")->required();
  evaluate->add_option("--classifier", classifier_path, "classifier checkpoint")->required();
  evaluate->add_option("--labels", labels_path,
                       "predicted classes ('<id> <class>' per line) to condition on instead of ground truth");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of generator gradients");
  add_common(gradcheck, flags);

  auto* oracle = app.add_subcommand("oracle-check", "REINFORCE estimator versus exact enumeration");
  add_common(oracle, flags);

  auto* report = app.add_subcommand("report", "train all five variants over several seeds and compare");
  add_common(report, flags);
  report->add_option("--corpus", corpus_path, "corpus file (default: synthetic corpus from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(flags, spec, out);
    if (train_clf->parsed()) return cmd_train_classifier(flags, corpus_path, out);
    if (train_gen->parsed()) return cmd_train(flags, corpus_path, classifier_path, lm_path, out);
    if (generate->parsed()) return cmd_generate(flags, model_path, corpus_path, split, sample, labels_path, out);
    if (evaluate->parsed()) return cmd_evaluate(flags, model_paths, corpus_path, classifier_path, labels_path, out);
    if (gradcheck->parsed()) return cmd_gradcheck(flags, out);
    if (oracle->parsed()) return cmd_oracle_check(flags, out);
    if (report->parsed()) return cmd_report(flags, corpus_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace vexpl::cli
