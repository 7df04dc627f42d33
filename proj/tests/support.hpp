// Shared fixtures and independent scalar oracles for the unit tests.
#pragma once

#include "vexpl/condgen.hpp"
#include "vexpl/sentclass.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace vexpl::testing {

/// Entry k (blocks in declaration order, row-major within a block) = 0.5 sin(0.9 k + 0.3).
template <class Params>
void fill_pattern(Params& p) {
  int k = 0;
  p.for_each_block("", [&](const std::string&, auto& block) {
    for (Index r = 0; r < block.rows(); ++r) {
      for (Index c = 0; c < block.cols(); ++c) block(r, c) = 0.5 * std::sin(0.9 * k++ + 0.3);
    }
  });
}

using Vec = std::vector<double>;

struct ScalarState {
  Vec h, c;
};

inline double scalar_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Gate equations evaluated one scalar at a time (rows: input, forget, output, candidate).
inline ScalarState scalar_lstm(const Vec& x, const ScalarState& prev, const LstmCellWeights<Real>& w) {
  const auto hs = static_cast<std::size_t>(w.hidden_size());
  std::vector<double> z(4 * hs);
  for (std::size_t r = 0; r < 4 * hs; ++r) {
    double acc = w.bias(static_cast<Index>(r));
    for (std::size_t j = 0; j < x.size(); ++j) {
      acc += w.input_weights(static_cast<Index>(r), static_cast<Index>(j)) * x[j];
    }
    for (std::size_t j = 0; j < hs; ++j) {
      acc += w.recurrent_weights(static_cast<Index>(r), static_cast<Index>(j)) * prev.h[j];
    }
    z[r] = acc;
  }
  ScalarState out{Vec(hs), Vec(hs)};
  for (std::size_t u = 0; u < hs; ++u) {
    const double i = scalar_sigmoid(z[u]);
    const double f = scalar_sigmoid(z[hs + u]);
    const double o = scalar_sigmoid(z[2 * hs + u]);
    const double g = std::tanh(z[3 * hs + u]);
    out.c[u] = f * prev.c[u] + i * g;
    out.h[u] = o * std::tanh(out.c[u]);
  }
  return out;
}

inline Vec scalar_softmax(const Vec& z) {
  double top = z[0];
  for (double v : z) top = std::max(top, v);
  Vec e(z.size());
  double sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += e[i] = std::exp(z[i] - top);
  for (double& v : e) v /= sum;
  return e;
}

inline Vec column(const Matrix& m, Index c) {
  Vec out(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

inline Vec affine(const Matrix& w, const Vector& b, const Vec& x) {
  Vec out(static_cast<std::size_t>(w.rows()));
  for (Index r = 0; r < w.rows(); ++r) {
    double acc = b(r);
    for (Index c = 0; c < w.cols(); ++c) acc += w(r, c) * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

/// Per-step next-word distributions of the generator under teacher forcing.
inline std::vector<Vec> scalar_generator_steps(const GeneratorModel& m, const Conditioning& cond,
                                               const TokenSequence& tokens) {
  const auto hs = static_cast<std::size_t>(m.dims.hidden_size);
  ScalarState s1{Vec(hs, 0.0), Vec(hs, 0.0)};
  ScalarState s2 = s1;
  Vec extra(static_cast<std::size_t>(m.dims.feature_size), 0.0);
  if (m.uses_image()) extra = column(cond.image_feature, 0);
  Vec emb(hs, 0.0);
  if (m.uses_label()) emb = column(cond.class_embedding, 0);
  extra.insert(extra.end(), emb.begin(), emb.end());

  std::vector<Vec> out;
  TokenId prev = Vocabulary::kSos;
  for (TokenId t : tokens) {
    s1 = scalar_lstm(column(m.weights.embedding, prev), s1, m.weights.first);
    Vec x2 = s1.h;
    x2.insert(x2.end(), extra.begin(), extra.end());
    s2 = scalar_lstm(x2, s2, m.weights.second);
    out.push_back(scalar_softmax(affine(m.weights.output_weights, m.weights.output_bias, s2.h)));
    prev = t;
  }
  return out;
}

/// Three-token (reserved only) generator: embed 2, hidden 2, feature 1, max_len 5,
/// weights from fill_pattern, class embeddings [[0.2, -0.1], [0.4, 0.3]].
inline GeneratorModel fixture_generator(AblationMode mode = AblationMode::Explanation) {
  GeneratorDims d;
  d.vocab_size = 3;
  d.embed_size = 2;
  d.hidden_size = 2;
  d.feature_size = 1;
  d.max_len = 5;
  GeneratorModel m;
  m.dims = d;
  m.vocab = Vocabulary();
  m.mode = mode;
  m.weights = GeneratorWeights(d);
  fill_pattern(m.weights);
  if (traits(mode).label) {
    m.class_embeddings = Matrix(2, 2);
    m.class_embeddings << 0.2, -0.1, 0.4, 0.3;
  }
  return m;
}

inline Conditioning fixture_condition(const GeneratorModel& m) {
  Vector f(1);
  f << 0.7;
  return m.condition(f, 1);
}

/// Random generator with small dimensions for property tests.
inline GeneratorModel random_generator(std::uint64_t seed, AblationMode mode, int words = 4,
                                       int hidden = 5, Real scale = 1.0) {
  std::vector<std::string> tokens;
  for (int i = 0; i < words; ++i) tokens.push_back("w" + std::to_string(i));
  Vocabulary vocab(tokens);
  GeneratorDims d;
  d.vocab_size = vocab.size();
  d.embed_size = 3;
  d.hidden_size = hidden;
  d.feature_size = 3;
  d.max_len = 6;
  Rng rng(seed);
  Matrix emb(hidden, 3);
  for (Index k = 0; k < emb.size(); ++k) emb.data()[k] = rng.uniform(-1, 1);
  GeneratorModel m = make_generator(d, vocab, mode, emb, rng);
  init_uniform(m.weights, scale, rng.engine());
  return m;
}

inline Vector random_vector(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vexpl-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace vexpl::testing
