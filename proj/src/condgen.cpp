#include "vexpl/condgen.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vexpl {
namespace {

struct StepTrace {
  TokenId input = 0;
  LstmStepCache<Real> first;
  LstmStepCache<Real> second;
  Vector hidden;  // second LSTM output
  Vector probs;
};

/// Image feature and class embedding after ablation masking, concatenated.
Vector conditioning_input(const GeneratorModel& model, const Conditioning& cond) {
  const Index f = model.dims.feature_size;
  const Index h = model.dims.hidden_size;
  Vector out = Vector::Zero(f + h);
  if (model.uses_image()) {
    require_dims(cond.image_feature.size() == f,
                 "conditioning: image feature has length " +
                     std::to_string(cond.image_feature.size()) + ", expected " + std::to_string(f));
    out.head(f) = cond.image_feature;
  }
  if (model.uses_label()) {
    require_dims(cond.class_embedding.size() == h,
                 "conditioning: class embedding has length " +
                     std::to_string(cond.class_embedding.size()) + ", expected " +
                     std::to_string(h));
    out.tail(h) = cond.class_embedding;
  }
  return out;
}

void check_token(const GeneratorModel& model, TokenId token) {
  require_dims(token >= 0 && token < model.dims.vocab_size,
               "generator: token id " + std::to_string(token) + " out of range");
}

Vector step(const GeneratorModel& model, TokenId input, GeneratorState& state,
            const Vector& cond_input, StepTrace* trace) {
  check_token(model, input);
  const auto& w = model.weights;
  state.first = lstm_step(w.embedding.col(input), state.first, w.first,
                          trace ? &trace->first : nullptr);
  Vector x2(state.first.hidden.size() + cond_input.size());
  x2 << state.first.hidden, cond_input;
  state.second = lstm_step(x2, state.second, w.second, trace ? &trace->second : nullptr);
  Vector logits = w.output_weights * state.second.hidden + w.output_bias;
  Vector probs = softmax(logits);
  if (trace != nullptr) {
    trace->input = input;
    trace->hidden = state.second.hidden;
    trace->probs = probs;
  }
  return probs;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += t;
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

Vector conditioning_vector(const GeneratorModel& model, const Conditioning& cond) {
  return conditioning_input(model, cond);
}

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::Definition: return "definition";
    case AblationMode::Description: return "description";
    case AblationMode::ExplanationLabel: return "explanation-label";
    case AblationMode::ExplanationDis: return "explanation-dis";
    case AblationMode::Explanation: return "explanation";
  }
  return "unknown";
}

AblationMode parse_ablation_mode(std::string_view name) {
  for (AblationMode m : kAllModes) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "' (expected definition, description, explanation-label, "
                              "explanation-dis or explanation)");
}

ModeTraits traits(AblationMode mode) {
  switch (mode) {
    case AblationMode::Definition: return {false, true, false};
    case AblationMode::Description: return {true, false, false};
    case AblationMode::ExplanationLabel: return {true, true, false};
    case AblationMode::ExplanationDis: return {true, false, true};
    case AblationMode::Explanation: return {true, true, true};
  }
  return {};
}

GeneratorWeights::GeneratorWeights(const GeneratorDims& d)
    : embedding(Matrix::Zero(d.embed_size, d.vocab_size)),
      first(d.embed_size, d.hidden_size),
      second(2 * d.hidden_size + d.feature_size, d.hidden_size),
      output_weights(Matrix::Zero(d.vocab_size, d.hidden_size)),
      output_bias(Vector::Zero(d.vocab_size)) {}

Conditioning GeneratorModel::condition(const Vector& image_feature, int class_label) const {
  Conditioning c;
  c.image_feature = image_feature;
  c.class_label = class_label;
  if (uses_label()) {
    if (class_label < 0 || class_label >= num_classes()) {
      throw DimensionError("conditioning: class label " + std::to_string(class_label) +
                           " has no class embedding");
    }
    c.class_embedding = class_embeddings.col(class_label);
  } else {
    c.class_embedding = Vector::Zero(dims.hidden_size);
  }
  return c;
}

Checkpoint GeneratorModel::to_checkpoint() const {
  Checkpoint ck;
  ck.meta["kind"] = "generator";
  ck.meta["mode"] = std::string(to_string(mode));
  ck.meta["vocab"] = join_tokens(vocab.tokens());
  ck.meta["embed_size"] = std::to_string(dims.embed_size);
  ck.meta["hidden_size"] = std::to_string(dims.hidden_size);
  ck.meta["feature_size"] = std::to_string(dims.feature_size);
  ck.meta["max_len"] = std::to_string(dims.max_len);
  ck.put_params("generator.", weights);
  if (class_embeddings.size() > 0) ck.put("class_embeddings", class_embeddings);
  return ck;
}

GeneratorModel GeneratorModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.meta_value("kind") != "generator") throw CheckpointError("checkpoint is not a generator");
  GeneratorModel m;
  auto tokens = split_lines(ck.meta_value("vocab"));
  if (tokens.size() < Vocabulary::kReserved) throw CheckpointError("generator vocabulary too small");
  m.vocab = Vocabulary(std::vector<std::string>(tokens.begin() + Vocabulary::kReserved, tokens.end()));
  m.mode = parse_ablation_mode(ck.meta_value("mode"));
  m.dims.vocab_size = m.vocab.size();
  m.dims.embed_size = std::stoi(ck.meta_value("embed_size"));
  m.dims.hidden_size = std::stoi(ck.meta_value("hidden_size"));
  m.dims.feature_size = std::stoi(ck.meta_value("feature_size"));
  m.dims.max_len = std::stoi(ck.meta_value("max_len"));
  m.weights = GeneratorWeights(m.dims);
  ck.get_params("generator.", m.weights);
  if (ck.has("class_embeddings")) m.class_embeddings = ck.get("class_embeddings");
  return m;
}

GeneratorModel make_generator(const GeneratorDims& dims, Vocabulary vocab, AblationMode mode,
                              Matrix class_embeddings, Rng& init) {
  if (dims.vocab_size != vocab.size()) throw DimensionError("make_generator: vocab size mismatch");
  if (dims.max_len < 1) throw std::invalid_argument("make_generator: max_len must be >= 1");
  GeneratorModel m;
  m.dims = dims;
  m.vocab = std::move(vocab);
  m.mode = mode;
  m.weights = GeneratorWeights(dims);
  init_uniform(m.weights, 0.1, init.engine());
  m.weights.first.forget_bias().setConstant(1.0);
  m.weights.second.forget_bias().setConstant(1.0);
  if (traits(mode).label) {
    require_dims(class_embeddings.rows() == dims.hidden_size && class_embeddings.cols() >= 1,
                 "make_generator: class embeddings must be hidden_size x num_classes");
    m.class_embeddings = std::move(class_embeddings);
  }
  return m;
}

StepOutput forward_step(const GeneratorModel& model, TokenId prev_token, const GeneratorState& state,
                        const Conditioning& cond) {
  require_dims(state.first.hidden.size() == model.dims.hidden_size &&
                   state.second.hidden.size() == model.dims.hidden_size,
               "forward_step: state not dimensioned for model");
  StepOutput out;
  out.state = state;
  out.probs = step(model, prev_token, out.state, conditioning_input(model, cond), nullptr);
  return out;
}

Real accumulate_log_prob_gradient(const GeneratorModel& model, const Conditioning& cond,
                                  const TokenSequence& tokens, std::size_t scored_steps,
                                  Real coeff, GeneratorWeights* grad,
                                  std::vector<Vector>* step_probs) {
  require_dims(scored_steps <= tokens.size(), "log-prob: more scored steps than tokens");
  const Vector cond_input = conditioning_input(model, cond);
  const Index h = model.dims.hidden_size;
  const auto& w = model.weights;

  std::vector<StepTrace> traces(grad ? scored_steps : 0);
  GeneratorState state = GeneratorState::zeros(h);
  Real log_prob = 0;
  if (step_probs != nullptr) step_probs->clear();
  for (std::size_t t = 0; t < scored_steps; ++t) {
    const TokenId input = t == 0 ? Vocabulary::kSos : tokens[t - 1];
    check_token(model, tokens[t]);
    Vector probs = step(model, input, state, cond_input, grad ? &traces[t] : nullptr);
    log_prob += std::log(probs(tokens[t]));
    if (step_probs != nullptr) step_probs->push_back(std::move(probs));
  }
  if (grad == nullptr || scored_steps == 0) return log_prob;

  Vector dh1_next = Vector::Zero(h), dc1_next = Vector::Zero(h);
  Vector dh2_next = Vector::Zero(h), dc2_next = Vector::Zero(h);
  for (std::size_t t = scored_steps; t-- > 0;) {
    const StepTrace& tr = traces[t];
    // d log p(y) / d logits = onehot(y) - p
    Vector dlogits = -coeff * tr.probs;
    dlogits(tokens[t]) += coeff;
    grad->output_weights.noalias() += dlogits * tr.hidden.transpose();
    grad->output_bias += dlogits;
    const Vector dh2 = w.output_weights.transpose() * dlogits + dh2_next;
    auto g2 = lstm_step_backward(tr.second, w.second, dh2, dc2_next, grad->second);
    dh2_next = std::move(g2.prev.hidden);
    dc2_next = std::move(g2.prev.cell);
    const Vector dh1 = g2.input.head(h) + dh1_next;
    auto g1 = lstm_step_backward(tr.first, w.first, dh1, dc1_next, grad->first);
    dh1_next = std::move(g1.prev.hidden);
    dc1_next = std::move(g1.prev.cell);
    grad->embedding.col(tr.input) += g1.input;
  }
  return log_prob;
}

LossAndGradient relevance_loss(const GeneratorModel& model, std::span<const TrainingExample> batch,
                               bool with_gradient) {
  if (batch.empty()) throw std::invalid_argument("relevance_loss: empty batch");
  LossAndGradient out;
  if (with_gradient) out.grad = GeneratorWeights(model.dims);
  const Real inv_n = 1.0 / static_cast<Real>(batch.size());
  for (const auto& ex : batch) {
    validate_sequence(ex.tokens, model.dims.vocab_size, model.dims.max_len);
    const Real lp = accumulate_log_prob_gradient(model, ex.cond, ex.tokens, ex.tokens.size(),
                                                 -inv_n, with_gradient ? &out.grad : nullptr);
    out.loss -= inv_n * lp;
  }
  return out;
}

Index sample_categorical(const Vector& probs, Rng& rng) {
  const Real u = rng.uniform();
  Real cum = 0;
  Index last_positive = 0;
  for (Index i = 0; i < probs.size(); ++i) {
    if (probs(i) > 0) last_positive = i;
    cum += probs(i);
    if (u < cum) return i;
  }
  return last_positive;
}

SampledSentence sample_sequence(const GeneratorModel& model, const Conditioning& cond, Rng& rng,
                                int max_len) {
  if (max_len < 1) throw std::invalid_argument("sample_sequence: max_len must be >= 1");
  SampledSentence s;
  s.cond = cond;
  const Vector cond_input = conditioning_input(model, cond);
  GeneratorState state = GeneratorState::zeros(model.dims.hidden_size);
  TokenId prev = Vocabulary::kSos;
  for (int t = 0; t + 1 < max_len; ++t) {
    Vector probs = step(model, prev, state, cond_input, nullptr);
    const auto w = static_cast<TokenId>(sample_categorical(probs, rng));
    s.log_prob += std::log(probs(w));
    s.step_probs.push_back(std::move(probs));
    s.tokens.push_back(w);
    if (w == Vocabulary::kEos) return s;
    prev = w;
  }
  s.tokens.push_back(Vocabulary::kEos);
  s.eos_forced = true;
  return s;
}

TokenSequence greedy_decode(const GeneratorModel& model, const Conditioning& cond, int max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  TokenSequence tokens;
  const Vector cond_input = conditioning_input(model, cond);
  GeneratorState state = GeneratorState::zeros(model.dims.hidden_size);
  TokenId prev = Vocabulary::kSos;
  for (int t = 0; t + 1 < max_len; ++t) {
    const Vector probs = step(model, prev, state, cond_input, nullptr);
    const auto w = static_cast<TokenId>(argmax(probs));
    tokens.push_back(w);
    if (w == Vocabulary::kEos) return tokens;
    prev = w;
  }
  tokens.push_back(Vocabulary::kEos);
  return tokens;
}

Matrix compute_class_embeddings(const GeneratorModel& language_model,
                                std::span<const TrainingExample> examples, int num_classes) {
  if (language_model.uses_label()) {
    throw std::invalid_argument(
        "compute_class_embeddings: language model must be trained without class conditioning");
  }
  const Index h = language_model.dims.hidden_size;
  Matrix sums = Matrix::Zero(h, num_classes);
  std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& ex : examples) {
    const int k = ex.cond.class_label;
    require_dims(k >= 0 && k < num_classes, "compute_class_embeddings: class label out of range");
    const Vector cond_input = conditioning_input(language_model, ex.cond);
    GeneratorState state = GeneratorState::zeros(h);
    for (std::size_t t = 0; t < ex.tokens.size(); ++t) {
      const TokenId input = t == 0 ? Vocabulary::kSos : ex.tokens[t - 1];
      step(language_model, input, state, cond_input, nullptr);
      sums.col(k) += state.second.hidden;
      ++counts[static_cast<std::size_t>(k)];
    }
  }
  for (int k = 0; k < num_classes; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw std::invalid_argument("compute_class_embeddings: class " + std::to_string(k) +
                                  " has no sequences");
    }
    sums.col(k) /= static_cast<Real>(counts[static_cast<std::size_t>(k)]);
  }
  return sums;
}

}  // namespace vexpl
