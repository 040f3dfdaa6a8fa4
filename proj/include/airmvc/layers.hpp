#pragma once

#include "airmvc/matrix.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace airmvc {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string name, Matrix initial);

  void zero_grad() { grad.fill(0.0); }
};

/// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// output[i] = input[i] · weight + bias
Matrix affine_forward(const Matrix& input, const Parameter& weight, const Parameter& bias);

/// Accumulates weight/bias gradients and returns the gradient w.r.t. the input.
Matrix affine_backward(const Matrix& upstream, const Matrix& cached_input, Parameter& weight,
                       Parameter& bias);

Matrix relu_forward(const Matrix& x);
Matrix relu_backward(const Matrix& upstream, const Matrix& cached_x);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Gradient w.r.t. the logits given the softmax output and the upstream gradient.
Matrix softmax_backward(const Matrix& upstream, const Matrix& probs);

struct RowNormalized {
  Matrix unit;
  std::vector<double> norms;
  std::size_t degenerate_rows = 0;
};

/// Rows with norm below this are left at zero.
inline constexpr double kDegenerateNorm = 1e-12;

RowNormalized l2_normalize_rows(const Matrix& x);

/// Backward of l2_normalize_rows; degenerate rows pass no gradient.
Matrix l2_normalize_backward(const Matrix& upstream, const RowNormalized& forward);

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t timestep = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(const Parameter& p, double learning_rate);
};

void adam_step(Parameter& param, AdamState& state);

}  // namespace airmvc
