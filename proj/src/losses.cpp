#include "airmvc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace airmvc {

Matrix mix_predictions(const Matrix& y_view, const Matrix& y_first, std::span<const double> phi) {
  require_same_shape(y_view, y_first, "mix_predictions");
  if (phi.size() != y_view.rows()) {
    throw DimensionError("mix_predictions: " + std::to_string(phi.size()) +
                         " clean probabilities for " + std::to_string(y_view.rows()) + " rows");
  }
  Matrix m(y_view.rows(), y_view.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double p = phi[i];
    for (std::size_t j = 0; j < m.cols(); ++j) {
      m(i, j) = p * y_view(i, j) + (1.0 - p) * y_first(i, j);
    }
  }
  return m;
}

LossWithGrads rectification_loss(std::span<const Matrix> targets,
                                 std::span<const Matrix> predictions) {
  if (targets.empty() || targets.size() != predictions.size()) {
    throw std::invalid_argument(
        "rectification_loss: needs matching targets and predictions for views 2..V");
  }
  const double views = static_cast<double>(targets.size());
  LossWithGrads out;
  for (std::size_t v = 0; v < targets.size(); ++v) {
    const Matrix& m = targets[v];
    const Matrix& y = predictions[v];
    require_same_shape(m, y, "rectification_loss");
    const double scale = 1.0 / (static_cast<double>(y.rows()) * views);
    Matrix g(y.rows(), y.cols());
    double sum = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      for (std::size_t j = 0; j < y.cols(); ++j) {
        const double p = y(i, j);
        if (p > kLogClamp) {
          sum -= m(i, j) * std::log(p);
          g(i, j) = -scale * m(i, j) / p;
        } else {
          sum -= m(i, j) * std::log(kLogClamp);
        }
      }
    }
    out.value += sum * scale;
    out.grads.push_back(std::move(g));
  }
  return out;
}

double pair_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("pair_similarity: length mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

PairSelection select_pairs(std::span<const Matrix> predictions, double tau) {
  PairSelection sel;
  sel.num_views = predictions.size();
  sel.batch = predictions.empty() ? 0 : predictions.front().rows();
  sel.masks.resize(sel.num_views * sel.num_views);
  for (std::size_t m = 0; m < sel.num_views; ++m) {
    for (std::size_t n = 0; n < sel.num_views; ++n) {
      if (m == n) continue;
      if (predictions[n].rows() != sel.batch) {
        throw DimensionError("select_pairs: views disagree on batch size");
      }
      Matrix agreement = matmul_nt(predictions[m], predictions[n]);
      for (auto& a : agreement.values()) {
        if (a >= tau) {
          a = 1.0;
          ++sel.count;
        } else {
          a = 0.0;
        }
      }
      sel.masks[m * sel.num_views + n] = std::move(agreement);
    }
  }
  return sel;
}

ContrastiveResult contrastive_loss(std::span<const Matrix> z, const PairSelection& selection,
                                   double similarity_clamp) {
  const std::size_t v_count = z.size();
  if (v_count != selection.num_views) {
    throw DimensionError("contrastive_loss: selection built for " +
                         std::to_string(selection.num_views) + " views, got " +
                         std::to_string(v_count));
  }
  ContrastiveResult out;
  out.selected_pair_count = selection.count;
  for (const auto& zv : z) out.grads.emplace_back(zv.rows(), zv.cols());
  if (selection.count == 0 || v_count < 2) return out;

  const double upper = 1.0 - similarity_clamp;
  const double scale =
      1.0 / (static_cast<double>(v_count * (v_count - 1)) * static_cast<double>(selection.count));
  const std::size_t b = selection.batch;

  double total = 0.0;
  for (std::size_t m = 0; m < v_count; ++m) {
    for (std::size_t n = 0; n < v_count; ++n) {
      if (m == n) continue;
      const Matrix& mask = selection.mask(m, n);
      const Matrix sim = matmul_nt(z[m], z[n]);  // sim(i, j) = z_i^m . z_j^n
      Matrix d_sim(b, b);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
          if (mask(i, j) == 0.0) continue;
          // log(1 - s(z_i^m, z_j^n)) + log(1 - s(z_j^m, z_i^n))
          for (const auto& [r, c] : {std::pair{i, j}, std::pair{j, i}}) {
            const double raw = sim(r, c);
            const double s = std::clamp(raw, -1.0, upper);
            total += std::log(1.0 - s);
            if (raw > -1.0 && raw < upper) d_sim(r, c) += -scale / (1.0 - s);
          }
        }
      }
      out.grads[m] += matmul(d_sim, z[n]);
      out.grads[n] += matmul_tn(d_sim, z[m]);
    }
  }
  out.value = total * scale;
  return out;
}

ContrastiveResult contrastive_loss(std::span<const Matrix> z,
                                   std::span<const Matrix> predictions, double tau,
                                   double similarity_clamp) {
  return contrastive_loss(z, select_pairs(predictions, tau), similarity_clamp);
}

LossWithGrads reconstruction_loss(std::span<const Matrix> x, std::span<const Matrix> x_hat) {
  if (x.size() != x_hat.size()) {
    throw DimensionError("reconstruction_loss: " + std::to_string(x.size()) + " inputs vs " +
                         std::to_string(x_hat.size()) + " reconstructions");
  }
  LossWithGrads out;
  for (std::size_t v = 0; v < x.size(); ++v) {
    require_same_shape(x[v], x_hat[v], "reconstruction_loss");
    const double n = static_cast<double>(x[v].rows());
    Matrix residual = x_hat[v] - x[v];
    out.value += n > 0 ? frobenius_sq(residual) / n : 0.0;
    if (n > 0) residual *= 2.0 / n;
    out.grads.push_back(std::move(residual));
  }
  return out;
}

LossBreakdown total_loss(double recon, double rectify, double contrastive, double alpha,
                         double beta, std::size_t selected_pair_count) {
  return {recon, rectify, contrastive, recon + alpha * rectify + beta * contrastive,
          selected_pair_count};
}

}  // namespace airmvc
