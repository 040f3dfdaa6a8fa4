#include "airmvc/grad_check.hpp"
#include "airmvc/layers.hpp"
#include "airmvc/matrix.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace airmvc;
using airmvc::testing::max_relative_error;
using airmvc::testing::numeric_gradient;
using airmvc::testing::probe;
using airmvc::testing::random_matrix;

TEST_SUITE("core-math") {

TEST_CASE("matrix arithmetic and shape checks") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  CHECK(matmul(a, b) == Matrix{{19, 22}, {43, 50}});
  CHECK(matmul_tn(a, b) == matmul(transpose(a), b));
  CHECK(matmul_nt(a, b) == matmul(a, transpose(b)));
  CHECK(a + b == Matrix{{6, 8}, {10, 12}});
  CHECK(hadamard(a, b) == Matrix{{5, 12}, {21, 32}});
  CHECK(column_sums(a) == std::vector<double>{4, 6});
  CHECK_THROWS_AS(matmul(a, Matrix(3, 1)), DimensionError);
  CHECK_THROWS_AS(a + Matrix(2, 3), DimensionError);
}

TEST_CASE("matmul agrees with a naive triple loop") {
  auto rng = make_rng({11});
  const Matrix a = random_matrix(7, 5, rng);
  const Matrix b = random_matrix(5, 9, rng);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += a(i, k) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("argmax ties go to the lowest index") {
  const Matrix m{{0.3, 0.3, 0.1}, {0.1, 0.2, 0.2}};
  CHECK(argmax_row(m, 0) == 0);
  CHECK(argmax_row(m, 1) == 1);
}

TEST_CASE("affine forward examples") {
  Parameter w("w", Matrix{{1, 0}, {0, 1}});
  Parameter b("b", Matrix{{0, 0}});
  CHECK(affine_forward(Matrix{{1, 2}}, w, b) == Matrix{{1, 2}});

  Parameter w2("w", Matrix{{2, 0}, {0, 3}});
  Parameter b2("b", Matrix{{1, -1}});
  CHECK(affine_forward(Matrix{{1, 1}}, w2, b2) == Matrix{{3, 2}});

  Parameter w3("w", Matrix{{0.7, -2}, {4, 9}});
  Parameter b3("b", Matrix{{5, 7}});
  CHECK(affine_forward(Matrix{{0, 0}}, w3, b3) == Matrix{{5, 7}});
}

TEST_CASE("affine shape mismatch names both shapes") {
  Parameter w("w", Matrix(3, 2));
  Parameter b("b", Matrix(1, 2));
  try {
    affine_forward(Matrix(1, 2), w, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    CHECK(what.find("1x2") != std::string::npos);
    CHECK(what.find("3x2") != std::string::npos);
  }
}

TEST_CASE("affine backward: zero upstream, identity, finite differences") {
  Parameter w("w", Matrix{{1, 0}, {0, 1}});
  Parameter b("b", Matrix{{0, 0}});
  const Matrix x{{1, 2}, {3, 4}};
  Matrix gin = affine_backward(Matrix(2, 2), x, w, b);
  CHECK(gin == Matrix(2, 2));
  CHECK(w.grad == Matrix(2, 2));
  CHECK(b.grad == Matrix(1, 2));

  const Matrix g{{0.5, -1}, {2, 3}};
  CHECK(affine_backward(g, x, w, b) == g);

  auto rng = make_rng({3});
  Parameter wr("w", random_matrix(4, 3, rng));
  Parameter br("b", random_matrix(1, 3, rng));
  Matrix xr = random_matrix(5, 4, rng);
  const Matrix up = random_matrix(5, 3, rng);
  wr.zero_grad();
  br.zero_grad();
  const Matrix dx = affine_backward(up, xr, wr, br);
  auto f = [&] { return probe(up, affine_forward(xr, wr, br)); };
  CHECK(max_relative_error(dx, numeric_gradient(f, xr)) < 1e-4);
  CHECK(max_relative_error(wr.grad, numeric_gradient(f, wr.value)) < 1e-4);
  CHECK(max_relative_error(br.grad, numeric_gradient(f, br.value)) < 1e-4);
}

TEST_CASE("relu forward, mask, finite differences") {
  CHECK(relu_forward(Matrix{{-1, 2}}) == Matrix{{0, 2}});
  CHECK(relu_backward(Matrix{{5, 5}}, Matrix{{-1, 2}}) == Matrix{{0, 5}});
  CHECK(relu_backward(Matrix{{5}}, Matrix{{0}}) == Matrix{{0}});

  auto rng = make_rng({5});
  Matrix x = random_matrix(4, 6, rng);
  for (auto& v : x.values())
    if (std::abs(v) < 0.05) v = 0.3;  // stay away from the kink
  const Matrix up = random_matrix(4, 6, rng);
  auto f = [&] { return probe(up, relu_forward(x)); };
  CHECK(max_relative_error(relu_backward(up, x), numeric_gradient(f, x)) < 1e-4);
}

TEST_CASE("softmax examples and stability") {
  const Matrix p = softmax_rows(Matrix{{0, 0}, {1, 0}, {1000, 0}});
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(1, 0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(p(1, 1) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(p(2, 0) == doctest::Approx(1.0));
  CHECK(p(2, 1) == doctest::Approx(0.0));
  CHECK(all_finite(p));
}

TEST_CASE("softmax rows sum to one for arbitrary logits up to 1e3") {
  auto rng = make_rng({17});
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix logits = random_matrix(8, 5, rng, trial % 2 ? 1e3 : 3.0);
    const Matrix p = softmax_rows(logits);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double s = 0;
      for (double v : p.row(i)) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("softmax backward matches finite differences") {
  auto rng = make_rng({23});
  Matrix logits = random_matrix(4, 5, rng);
  const Matrix up = random_matrix(4, 5, rng);
  const Matrix analytic = softmax_backward(up, softmax_rows(logits));
  auto f = [&] { return probe(up, softmax_rows(logits)); };
  CHECK(max_relative_error(analytic, numeric_gradient(f, logits)) < 1e-4);
}

TEST_CASE("l2 normalization: [3,4], degenerate rows, backward") {
  const RowNormalized r = l2_normalize_rows(Matrix{{3, 4}, {0, 0}});
  CHECK(r.unit(0, 0) == doctest::Approx(0.6));
  CHECK(r.unit(0, 1) == doctest::Approx(0.8));
  CHECK(r.unit(1, 0) == 0.0);
  CHECK(r.degenerate_rows == 1);

  auto rng = make_rng({29});
  Matrix x = random_matrix(5, 4, rng);
  const Matrix up = random_matrix(5, 4, rng);
  const Matrix analytic = l2_normalize_backward(up, l2_normalize_rows(x));
  auto f = [&] { return probe(up, l2_normalize_rows(x).unit); };
  CHECK(max_relative_error(analytic, numeric_gradient(f, x)) < 1e-4);
}

TEST_CASE("adam: zero grad is identity, first step moves by lr, descent direction") {
  Parameter p("p", Matrix{{1.5, -2.0}});
  AdamState s(p, 0.1);
  p.zero_grad();
  adam_step(p, s);
  CHECK(p.value == Matrix{{1.5, -2.0}});
  CHECK(s.timestep == 1);

  Parameter q("q", Matrix{{0.0}});
  AdamState sq(q, 0.1);
  q.grad = Matrix{{1.0}};
  adam_step(q, sq);
  // bias-corrected m/sqrt(v) = 1 on step one
  CHECK(q.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));

  Parameter r("r", Matrix{{0.0, 0.0}});
  AdamState sr(r, 0.01);
  for (int t = 0; t < 50; ++t) {
    r.grad = Matrix{{2.0, -3.0}};
    adam_step(r, sr);
    CHECK(sr.timestep == t + 1);
    for (double v : sr.second_moment.values()) CHECK(v >= 0.0);
  }
  CHECK(r.value(0, 0) < 0.0);
  CHECK(r.value(0, 1) > 0.0);
}

TEST_CASE("adam step matches a hand-rolled reference over several steps") {
  Parameter p("p", Matrix{{0.25}});
  AdamState s(p, 0.05);
  double value = 0.25, m = 0, v = 0;
  const double grads[] = {0.3, -1.2, 0.7, 0.01, -0.4};
  for (int t = 1; t <= 5; ++t) {
    const double g = grads[t - 1];
    p.grad = Matrix{{g}};
    adam_step(p, s);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    value -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p.value(0, 0) == doctest::Approx(value).epsilon(1e-12));
  }
}

TEST_CASE("glorot bounds and determinism") {
  auto rng_a = make_rng({1, 2});
  auto rng_b = make_rng({1, 2});
  const Matrix a = glorot_uniform(30, 20, rng_a);
  const Matrix b = glorot_uniform(30, 20, rng_b);
  CHECK(a == b);
  const double bound = std::sqrt(6.0 / 50.0);
  for (double v : a.values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("make_rng distinguishes seeds that differ only in the high bits") {
  auto lo = make_rng({1});
  auto hi = make_rng({1ull | (1ull << 40)});
  CHECK(lo() != hi());
}

TEST_CASE("grad_check: quadratic loss is exact") {
  auto rng = make_rng({31});
  Parameter p("p", random_matrix(3, 4, rng));
  auto loss = [&] {
    double s = 0;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      s += 0.5 * p.value.values()[k] * p.value.values()[k];
      p.grad.values()[k] += p.value.values()[k];
    }
    return s;
  };
  Parameter* params[] = {&p};
  const GradCheckReport r = grad_check(loss, params);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("grad_check reports a wrong gradient and rejects non-finite losses") {
  Parameter p("p", Matrix{{1.0, 2.0}});
  Parameter* params[] = {&p};
  auto wrong = [&] {
    p.grad.values()[0] += 3 * p.value.values()[0];  // true derivative is 2x
    p.grad.values()[1] += 2 * p.value.values()[1];
    return p.value.values()[0] * p.value.values()[0] + p.value.values()[1] * p.value.values()[1];
  };
  const GradCheckReport r = grad_check(wrong, params);
  CHECK(r.max_relative_error > 0.3);
  CHECK(r.worst_parameter == "p");
  CHECK(r.worst_index == 0);

  auto nan_loss = [&] { return std::nan(""); };
  CHECK_THROWS_AS(grad_check(nan_loss, params), std::runtime_error);
}

}  // TEST_SUITE
