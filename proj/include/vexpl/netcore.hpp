// Dense numeric kernel: activations, an LSTM cell with hand-derived backward
// pass, parameter-set arithmetic and finite-difference gradient checking.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <type_traits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vexpl {

using Real = double;
using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<Real>;
using Vector = VectorX<Real>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// ---------------------------------------------------------------------------
// Activations

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
inline Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
VectorX<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return sigmoid<Scalar>(v); });
}

/// Numerically stable softmax (max-subtracted). Throws DimensionError on empty input.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw DimensionError("softmax: logits must have length >= 1");
  const Scalar top = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
Index argmax(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw DimensionError("argmax: empty vector");
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// LSTM cell
//
// Gate rows are stacked in the order input, forget, output, candidate; each
// block is hidden_size rows tall.

template <typename Scalar>
struct LstmState {
  VectorX<Scalar> hidden;
  VectorX<Scalar> cell;

  static LstmState zeros(Index hidden_size) {
    return {VectorX<Scalar>::Zero(hidden_size), VectorX<Scalar>::Zero(hidden_size)};
  }
};

template <typename Scalar>
struct LstmCellWeights {
  MatrixX<Scalar> input_weights;      // 4H x I
  MatrixX<Scalar> recurrent_weights;  // 4H x H
  VectorX<Scalar> bias;               // 4H

  LstmCellWeights() = default;
  LstmCellWeights(Index input_size, Index hidden_size)
      : input_weights(MatrixX<Scalar>::Zero(4 * hidden_size, input_size)),
        recurrent_weights(MatrixX<Scalar>::Zero(4 * hidden_size, hidden_size)),
        bias(VectorX<Scalar>::Zero(4 * hidden_size)) {}

  Index input_size() const { return input_weights.cols(); }
  Index hidden_size() const { return recurrent_weights.cols(); }

  auto forget_bias() { return bias.segment(hidden_size(), hidden_size()); }

  template <typename Other>
  LstmCellWeights<Other> cast() const {
    LstmCellWeights<Other> out;
    out.input_weights = input_weights.template cast<Other>();
    out.recurrent_weights = recurrent_weights.template cast<Other>();
    out.bias = bias.template cast<Other>();
    return out;
  }

  template <class Fn>
  void for_each_block(const std::string& prefix, Fn&& fn) {
    fn(prefix + "input_weights", input_weights);
    fn(prefix + "recurrent_weights", recurrent_weights);
    fn(prefix + "bias", bias);
  }
  template <class Fn>
  void for_each_block(const std::string& prefix, Fn&& fn) const {
    fn(prefix + "input_weights", input_weights);
    fn(prefix + "recurrent_weights", recurrent_weights);
    fn(prefix + "bias", bias);
  }
};

/// Forward intermediates of one lstm_step, needed by lstm_step_backward.
template <typename Scalar>
struct LstmStepCache {
  VectorX<Scalar> input;
  VectorX<Scalar> prev_hidden;
  VectorX<Scalar> prev_cell;
  VectorX<Scalar> input_gate;
  VectorX<Scalar> forget_gate;
  VectorX<Scalar> output_gate;
  VectorX<Scalar> candidate;
  VectorX<Scalar> tanh_cell;

  bool empty() const { return input_gate.size() == 0; }
};

template <typename Scalar>
struct LstmStepGradients {
  VectorX<Scalar> input;
  LstmState<Scalar> prev;
};

template <typename Scalar, typename Derived>
LstmState<Scalar> lstm_step(const Eigen::MatrixBase<Derived>& x, const LstmState<Scalar>& prev,
                            const LstmCellWeights<Scalar>& w,
                            LstmStepCache<Scalar>* cache = nullptr) {
  const Index h = w.hidden_size();
  require_dims(x.size() == w.input_size(),
               "lstm_step: input length " + std::to_string(x.size()) + " != input_size " +
                   std::to_string(w.input_size()));
  require_dims(prev.hidden.size() == h && prev.cell.size() == h,
               "lstm_step: previous state does not match hidden_size");

  const VectorX<Scalar> z = w.input_weights * x + w.recurrent_weights * prev.hidden + w.bias;
  VectorX<Scalar> i = sigmoid(z.segment(0, h));
  VectorX<Scalar> f = sigmoid(z.segment(h, h));
  VectorX<Scalar> o = sigmoid(z.segment(2 * h, h));
  VectorX<Scalar> g = z.segment(3 * h, h).array().tanh().matrix();

  LstmState<Scalar> next;
  next.cell = f.cwiseProduct(prev.cell) + i.cwiseProduct(g);
  VectorX<Scalar> tanh_c = next.cell.array().tanh().matrix();
  next.hidden = o.cwiseProduct(tanh_c);

  if (cache != nullptr) {
    cache->input = x;
    cache->prev_hidden = prev.hidden;
    cache->prev_cell = prev.cell;
    cache->input_gate = std::move(i);
    cache->forget_gate = std::move(f);
    cache->output_gate = std::move(o);
    cache->candidate = std::move(g);
    cache->tanh_cell = std::move(tanh_c);
  }
  return next;
}

/// Reverse-mode pass of one lstm_step. Weight gradients are accumulated into
/// `grad`; gradients with respect to the step input and previous state are returned.
template <typename Scalar>
LstmStepGradients<Scalar> lstm_step_backward(const LstmStepCache<Scalar>& cache,
                                             const LstmCellWeights<Scalar>& w,
                                             const VectorX<Scalar>& d_hidden,
                                             const VectorX<Scalar>& d_cell,
                                             LstmCellWeights<Scalar>& grad) {
  if (cache.empty()) throw std::logic_error("lstm_step_backward: missing forward intermediates");
  const Index h = w.hidden_size();
  require_dims(d_hidden.size() == h && d_cell.size() == h,
               "lstm_step_backward: upstream gradient does not match hidden_size");
  require_dims(grad.input_weights.rows() == w.input_weights.rows() &&
                   grad.input_weights.cols() == w.input_weights.cols(),
               "lstm_step_backward: gradient tape shape mismatch");

  const auto& i = cache.input_gate;
  const auto& f = cache.forget_gate;
  const auto& o = cache.output_gate;
  const auto& g = cache.candidate;
  const auto& tc = cache.tanh_cell;

  const VectorX<Scalar> dc =
      d_cell + d_hidden.cwiseProduct(o).cwiseProduct(
                   (VectorX<Scalar>::Ones(h) - tc.cwiseProduct(tc)));

  VectorX<Scalar> dz(4 * h);
  const auto ones = VectorX<Scalar>::Ones(h);
  dz.segment(0, h) = dc.cwiseProduct(g).cwiseProduct(i).cwiseProduct(ones - i);
  dz.segment(h, h) = dc.cwiseProduct(cache.prev_cell).cwiseProduct(f).cwiseProduct(ones - f);
  dz.segment(2 * h, h) = d_hidden.cwiseProduct(tc).cwiseProduct(o).cwiseProduct(ones - o);
  dz.segment(3 * h, h) = dc.cwiseProduct(i).cwiseProduct(ones - g.cwiseProduct(g));

  grad.input_weights.noalias() += dz * cache.input.transpose();
  grad.recurrent_weights.noalias() += dz * cache.prev_hidden.transpose();
  grad.bias += dz;

  LstmStepGradients<Scalar> out;
  out.input = w.input_weights.transpose() * dz;
  out.prev.hidden = w.recurrent_weights.transpose() * dz;
  out.prev.cell = dc.cwiseProduct(f);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter sets
//
// A parameter set is any type exposing for_each_block(prefix, fn), calling
// fn(name, block) for each dense Eigen block. Gradients share the type of the
// weights they belong to.

template <class Params>
using GradientTape = Params;

template <class Params>
std::vector<std::span<Real>> block_spans(Params& p) {
  std::vector<std::span<Real>> spans;
  p.for_each_block("", [&](const std::string&, auto& block) {
    spans.emplace_back(block.data(), static_cast<std::size_t>(block.size()));
  });
  return spans;
}

template <class Params>
std::vector<std::span<const Real>> block_spans(const Params& p) {
  std::vector<std::span<const Real>> spans;
  p.for_each_block("", [&](const std::string&, const auto& block) {
    spans.emplace_back(block.data(), static_cast<std::size_t>(block.size()));
  });
  return spans;
}

template <class Params>
Params zeros_like(const Params& p) {
  Params z = p;
  z.for_each_block("", [](const std::string&, auto& block) { block.setZero(); });
  return z;
}

template <class Params>
Index parameter_count(const Params& p) {
  Index n = 0;
  p.for_each_block("", [&](const std::string&, const auto& block) { n += block.size(); });
  return n;
}

/// dst += scale * src, block by block. Shapes must agree.
template <class Params>
void add_scaled(Params& dst, Real scale, const Params& src) {
  auto d = block_spans(dst);
  auto s = block_spans(src);
  require_dims(d.size() == s.size(), "add_scaled: block count mismatch");
  for (std::size_t b = 0; b < d.size(); ++b) {
    require_dims(d[b].size() == s[b].size(), "add_scaled: block size mismatch");
    for (std::size_t k = 0; k < d[b].size(); ++k) d[b][k] += scale * s[b][k];
  }
}

template <class Params>
void scale_in_place(Params& p, Real scale) {
  p.for_each_block("", [&](const std::string&, auto& block) { block *= scale; });
}

template <class Params>
Real squared_norm(const Params& p) {
  Real total = 0;
  p.for_each_block("", [&](const std::string&, const auto& block) {
    total += block.squaredNorm();
  });
  return total;
}

template <class Params>
bool all_finite(const Params& p) {
  bool ok = true;
  p.for_each_block("", [&](const std::string&, const auto& block) {
    ok = ok && block.allFinite();
  });
  return ok;
}

/// Rescales p so its global L2 norm is at most max_norm. Returns the norm before clipping.
template <class Params>
Real clip_global_norm(Params& p, Real max_norm) {
  const Real norm = std::sqrt(squared_norm(p));
  if (max_norm > 0 && norm > max_norm) scale_in_place(p, max_norm / norm);
  return norm;
}

template <class Params>
Vector flatten(const Params& p) {
  Vector out(parameter_count(p));
  Index k = 0;
  p.for_each_block("", [&](const std::string&, const auto& block) {
    out.segment(k, block.size()) = Eigen::Map<const Vector>(block.data(), block.size());
    k += block.size();
  });
  return out;
}

template <class Params>
void unflatten(Params& p, const Vector& flat) {
  require_dims(flat.size() == parameter_count(p), "unflatten: size mismatch");
  Index k = 0;
  p.for_each_block("", [&](const std::string&, auto& block) {
    Eigen::Map<Vector>(block.data(), block.size()) = flat.segment(k, block.size());
    k += block.size();
  });
}

/// Fills every block uniformly in [-scale, scale].
template <class Params, class Engine>
void init_uniform(Params& p, Real scale, Engine& engine) {
  std::uniform_real_distribution<Real> dist(-scale, scale);
  p.for_each_block("", [&](const std::string&, auto& block) {
    for (Index k = 0; k < block.size(); ++k) block.data()[k] = dist(engine);
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckReport {
  Real max_relative_error = 0;
  Real analytic_at_worst = 0;
  Real numeric_at_worst = 0;
  std::string worst_block;
  Index worst_entry = -1;
  Index entries_checked = 0;

  bool passed(Real tolerance) const { return max_relative_error < tolerance; }
};

inline Real relative_error(Real analytic, Real numeric) {
  return std::abs(analytic - numeric) / std::max(Real(1e-8), std::abs(analytic) + std::abs(numeric));
}

/// A loss over a parameter set. When `grad` is non-null it must be overwritten
/// with the analytic gradient.
template <class Params>
using LossFunction = std::function<Real(const Params& weights, Params* grad)>;

/// Optional higher-precision evaluation of the same loss, used for the difference
/// quotients only.
template <class Params>
using ReferenceLoss = std::function<long double(const Params& weights)>;

/// Compares the analytic gradient of `loss` against central differences, entry by entry.
template <class Params>
GradCheckReport grad_check(const LossFunction<Params>& loss, const Params& weights,
                           Real epsilon = 1e-5, const ReferenceLoss<Params>& reference = {}) {
  Params analytic = zeros_like(weights);
  const Real base = loss(weights, &analytic);
  if (!std::isfinite(base)) throw NumericError("grad_check: loss is not finite");

  std::vector<std::string> names;
  weights.for_each_block("", [&](const std::string& name, const auto&) { names.push_back(name); });

  Params probe = weights;
  auto probe_spans = block_spans(probe);
  const auto grad_spans = block_spans(std::as_const(analytic));

  GradCheckReport report;
  for (std::size_t b = 0; b < probe_spans.size(); ++b) {
    for (std::size_t k = 0; k < probe_spans[b].size(); ++k) {
      Real& entry = probe_spans[b][k];
      const Real saved = entry;
      auto eval = [&](Real value) -> long double {
        entry = value;
        return reference ? reference(probe) : static_cast<long double>(loss(probe, nullptr));
      };
      const Real up = saved + epsilon;
      const Real down = saved - epsilon;
      const long double plus = eval(up);
      const long double minus = eval(down);
      entry = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("grad_check: perturbed loss is not finite in block " + names[b]);
      }
      // Divide by the step actually taken; up - down is exact in long double.
      const Real numeric = static_cast<Real>(
          (plus - minus) / (static_cast<long double>(up) - static_cast<long double>(down)));
      const Real a = grad_spans[b][k];
      const Real rel = relative_error(a, numeric);
      ++report.entries_checked;
      if (rel > report.max_relative_error || report.worst_entry < 0) {
        report.max_relative_error = rel;
        report.analytic_at_worst = a;
        report.numeric_at_worst = numeric;
        report.worst_block = names[b];
        report.worst_entry = static_cast<Index>(k);
      }
    }
  }
  return report;
}

}  // namespace vexpl
