#include "airmvc/layers.hpp"

#include <algorithm>
#include <cmath>

namespace airmvc {

Parameter::Parameter(std::string n, Matrix initial)
    : name(std::move(n)), value(std::move(initial)), grad(value.rows(), value.cols()) {}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (auto& v : w.values()) v = dist(rng);
  return w;
}

Matrix affine_forward(const Matrix& input, const Parameter& weight, const Parameter& bias) {
  if (input.cols() != weight.value.rows()) {
    throw DimensionError("affine_forward: input " + input.shape_string() + " vs weight " +
                         weight.value.shape_string());
  }
  if (bias.value.rows() != 1 || bias.value.cols() != weight.value.cols()) {
    throw DimensionError("affine_forward: bias " + bias.value.shape_string() + " vs weight " +
                         weight.value.shape_string());
  }
  Matrix out = matmul(input, weight.value);
  auto b = bias.value.row(0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  return out;
}

Matrix affine_backward(const Matrix& upstream, const Matrix& cached_input, Parameter& weight,
                       Parameter& bias) {
  if (upstream.rows() != cached_input.rows() || upstream.cols() != weight.value.cols() ||
      cached_input.cols() != weight.value.rows()) {
    throw DimensionError("affine_backward: upstream " + upstream.shape_string() + ", input " +
                         cached_input.shape_string() + ", weight " +
                         weight.value.shape_string());
  }
  weight.grad += matmul_tn(cached_input, upstream);
  auto sums = column_sums(upstream);
  auto bg = bias.grad.row(0);
  for (std::size_t c = 0; c < sums.size(); ++c) bg[c] += sums[c];
  return matmul_nt(upstream, weight.value);
}

Matrix relu_forward(const Matrix& x) {
  Matrix out = x;
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix relu_backward(const Matrix& upstream, const Matrix& cached_x) {
  require_same_shape(upstream, cached_x, "relu_backward");
  Matrix out = upstream;
  auto o = out.values();
  auto x = cached_x.values();
  for (std::size_t i = 0; i < o.size(); ++i)
    if (x[i] <= 0.0) o[i] = 0.0;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (auto& v : o) v /= total;
  }
  return out;
}

Matrix softmax_backward(const Matrix& upstream, const Matrix& probs) {
  require_same_shape(upstream, probs, "softmax_backward");
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto g = upstream.row(r);
    auto p = probs.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) dot += g[c] * p[c];
    auto o = out.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) o[c] = p[c] * (g[c] - dot);
  }
  return out;
}

RowNormalized l2_normalize_rows(const Matrix& x) {
  RowNormalized out{Matrix(x.rows(), x.cols()), row_norms(x), 0};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double n = out.norms[r];
    if (n < kDegenerateNorm) {
      ++out.degenerate_rows;
      continue;
    }
    auto src = x.row(r);
    auto dst = out.unit.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / n;
  }
  return out;
}

Matrix l2_normalize_backward(const Matrix& upstream, const RowNormalized& forward) {
  require_same_shape(upstream, forward.unit, "l2_normalize_backward");
  // d(x/|x|) = (g - u (u·g)) / |x|
  Matrix out(upstream.rows(), upstream.cols());
  for (std::size_t r = 0; r < upstream.rows(); ++r) {
    const double n = forward.norms[r];
    if (n < kDegenerateNorm) continue;
    auto g = upstream.row(r);
    auto u = forward.unit.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) dot += g[c] * u[c];
    auto o = out.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) o[c] = (g[c] - u[c] * dot) / n;
  }
  return out;
}

AdamState::AdamState(const Parameter& p, double learning_rate)
    : first_moment(p.value.rows(), p.value.cols()),
      second_moment(p.value.rows(), p.value.cols()),
      lr(learning_rate) {}

void adam_step(Parameter& param, AdamState& state) {
  require_same_shape(param.value, state.first_moment, "adam_step");
  require_same_shape(param.grad, state.second_moment, "adam_step");
  ++state.timestep;
  const double t = static_cast<double>(state.timestep);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  auto value = param.value.values();
  auto grad = param.grad.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    value[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace airmvc
