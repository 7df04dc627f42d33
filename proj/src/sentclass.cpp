#include "vexpl/sentclass.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vexpl {
namespace {

void check_tokens(const ClassifierModel& model, const TokenSequence& tokens) {
  if (tokens.empty()) throw std::invalid_argument("classify: empty token sequence");
  for (TokenId t : tokens) {
    require_dims(t >= 0 && t < model.vocab.size(), "classify: token id out of range");
  }
}

}  // namespace

ClassifierWeights::ClassifierWeights(int vocab_size, int embed_size, int hidden_size,
                                     int num_classes)
    : embedding(Matrix::Zero(embed_size, vocab_size)),
      lstm(embed_size, hidden_size),
      projection(Matrix::Zero(num_classes, hidden_size)),
      projection_bias(Vector::Zero(num_classes)) {}

ClassifierModel make_classifier(Vocabulary vocab, int num_classes, int embed_size, int hidden_size,
                                Rng& init) {
  if (num_classes < 1) throw std::invalid_argument("classifier: need at least one class");
  ClassifierModel m;
  m.weights = ClassifierWeights(vocab.size(), embed_size, hidden_size, num_classes);
  m.vocab = std::move(vocab);
  m.num_classes = num_classes;
  init_uniform(m.weights, 0.1, init.engine());
  m.weights.lstm.forget_bias().setConstant(1.0);
  return m;
}

Vector classify(const ClassifierModel& model, const TokenSequence& tokens) {
  check_tokens(model, tokens);
  const auto& w = model.weights;
  auto state = LstmState<Real>::zeros(w.lstm.hidden_size());
  for (TokenId t : tokens) state = lstm_step(w.embedding.col(t), state, w.lstm);
  return softmax(Vector(w.projection * state.hidden + w.projection_bias));
}

Real reward(const ClassifierModel& model, const TokenSequence& tokens, int true_class) {
  if (true_class < 0 || true_class >= model.num_classes) {
    throw DimensionError("reward: class " + std::to_string(true_class) + " out of range for " +
                         std::to_string(model.num_classes) + " classes");
  }
  return classify(model, tokens)(true_class);
}

int predict(const ClassifierModel& model, const TokenSequence& tokens) {
  return static_cast<int>(argmax(classify(model, tokens)));
}

Real classifier_loss(const ClassifierModel& model, const LabeledSentence& example, Real scale,
                     ClassifierWeights* grad) {
  check_tokens(model, example.tokens);
  require_dims(example.label >= 0 && example.label < model.num_classes,
               "classifier_loss: label out of range");
  const auto& w = model.weights;
  const Index h = w.lstm.hidden_size();
  std::vector<LstmStepCache<Real>> caches(grad ? example.tokens.size() : 0);
  auto state = LstmState<Real>::zeros(h);
  for (std::size_t t = 0; t < example.tokens.size(); ++t) {
    state = lstm_step(w.embedding.col(example.tokens[t]), state, w.lstm,
                      grad ? &caches[t] : nullptr);
  }
  const Vector probs = softmax(Vector(w.projection * state.hidden + w.projection_bias));
  const Real loss = -std::log(probs(example.label));
  if (grad == nullptr) return loss;

  Vector dlogits = scale * probs;
  dlogits(example.label) -= scale;
  grad->projection.noalias() += dlogits * state.hidden.transpose();
  grad->projection_bias += dlogits;
  Vector dh = w.projection.transpose() * dlogits;
  Vector dc = Vector::Zero(h);
  for (std::size_t t = example.tokens.size(); t-- > 0;) {
    auto g = lstm_step_backward(caches[t], w.lstm, dh, dc, grad->lstm);
    grad->embedding.col(example.tokens[t]) += g.input;
    dh = std::move(g.prev.hidden);
    dc = std::move(g.prev.cell);
  }
  return loss;
}

Real accuracy(const ClassifierModel& model, std::span<const LabeledSentence> data) {
  if (data.empty()) return 0;
  std::size_t correct = 0;
  for (const auto& ex : data) correct += predict(model, ex.tokens) == ex.label ? 1 : 0;
  return static_cast<Real>(correct) / static_cast<Real>(data.size());
}

ClassifierTrainResult train_classifier(const Vocabulary& vocab, int num_classes,
                                       std::span<const LabeledSentence> train,
                                       std::span<const LabeledSentence> held_out,
                                       const ClassifierHyperparams& hp, Rng& rng) {
  std::vector<int> per_class(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (const auto& ex : train) {
    if (ex.label < 0 || ex.label >= num_classes) {
      throw std::invalid_argument("train_classifier: label out of range");
    }
    ++per_class[static_cast<std::size_t>(ex.label)];
  }
  for (int k = 0; k < num_classes; ++k) {
    if (per_class[static_cast<std::size_t>(k)] == 0) {
      throw std::invalid_argument("train_classifier: class " + std::to_string(k) +
                                  " has no training sentences");
    }
  }

  ClassifierTrainResult result;
  result.model = make_classifier(vocab, num_classes, hp.embed_size, hp.hidden_size, rng);
  auto& model = result.model;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      ClassifierWeights grad = zeros_like(model.weights);
      const Real scale = 1.0 / static_cast<Real>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Real loss = classifier_loss(model, train[order[k]], scale, &grad);
        if (!std::isfinite(loss)) {
          throw NumericError("train_classifier: non-finite loss at epoch " + std::to_string(epoch + 1));
        }
      }
      clip_global_norm(grad, hp.gradient_clip);
      add_scaled(model.weights, -hp.learning_rate, grad);
    }
  }
  model.frozen = true;
  result.held_out_accuracy = accuracy(model, held_out.empty() ? train : held_out);
  return result;
}

Checkpoint ClassifierModel::to_checkpoint() const {
  Checkpoint ck;
  ck.meta["kind"] = "classifier";
  ck.meta["frozen"] = frozen ? "1" : "0";
  ck.meta["num_classes"] = std::to_string(num_classes);
  std::string tokens;
  for (const auto& t : vocab.tokens()) tokens += t + "\n";
  ck.meta["vocab"] = tokens;
  ck.meta["embed_size"] = std::to_string(weights.embedding.rows());
  ck.meta["hidden_size"] = std::to_string(weights.lstm.hidden_size());
  ck.put_params("classifier.", weights);
  return ck;
}

ClassifierModel ClassifierModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.meta_value("kind") != "classifier") throw CheckpointError("checkpoint is not a classifier");
  ClassifierModel m;
  std::vector<std::string> tokens;
  std::istringstream in(ck.meta_value("vocab"));
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  if (tokens.size() < Vocabulary::kReserved) throw CheckpointError("classifier vocabulary too small");
  m.vocab = Vocabulary(std::vector<std::string>(tokens.begin() + Vocabulary::kReserved, tokens.end()));
  m.num_classes = std::stoi(ck.meta_value("num_classes"));
  m.frozen = ck.meta_value("frozen") == "1";
  m.weights = ClassifierWeights(m.vocab.size(), std::stoi(ck.meta_value("embed_size")),
                                std::stoi(ck.meta_value("hidden_size")), m.num_classes);
  ck.get_params("classifier.", m.weights);
  return m;
}

}  // namespace vexpl
