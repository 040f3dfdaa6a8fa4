#include "airmvc/dataset.hpp"
#include "airmvc/grad_check.hpp"
#include "airmvc/networks.hpp"
#include "airmvc/trainer.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace airmvc;
using airmvc::testing::probe;
using airmvc::testing::random_matrix;

namespace {

ViewModel small_model(std::size_t input, std::size_t k, std::uint64_t seed,
                      std::size_t hidden = 8, std::size_t latent = 4, std::size_t proj = 4) {
  auto rng = make_rng({seed});
  NetworkShape shape{input, hidden, latent, proj, k};
  return ViewModel(shape, rng, 0);
}

}  // namespace

TEST_SUITE("networks") {

TEST_CASE("default widths are 256 and 64 with a mirrored decoder") {
  auto rng = make_rng({0});
  NetworkShape shape;
  shape.input_dim = 10;
  shape.num_clusters = 3;
  ViewModel m(shape, rng, 0);
  CHECK(m.enc1_w.value.rows() == 10);
  CHECK(m.enc1_w.value.cols() == 256);
  CHECK(m.enc2_w.value.cols() == 64);
  CHECK(m.dec1_w.value.rows() == 64);
  CHECK(m.dec2_w.value.cols() == 10);
  CHECK(m.proj_w.value.rows() == 64);
  CHECK(m.proj_w.value.cols() == 64);
  CHECK(m.cls_w.value.cols() == 3);
  CHECK(m.parameters().size() == 12);
  CHECK(m.autoencoder_parameters().size() == 8);
  for (const Parameter* p : m.parameters()) CHECK(p->value.same_shape(p->grad));
}

TEST_CASE("encode: zero input gives zero latent; batch independence") {
  const ViewModel m = small_model(5, 3, 1);
  CHECK(encode(m, Matrix(2, 5)) == Matrix(2, 4));

  auto rng = make_rng({2});
  const Matrix batch = random_matrix(3, 5, rng);
  const Matrix all = encode(m, batch);
  for (std::size_t i = 0; i < 3; ++i) {
    const Matrix one = encode(m, select_rows(batch, std::vector<std::size_t>{i}));
    for (std::size_t d = 0; d < 4; ++d) CHECK(one(0, d) == all(i, d));
  }
  CHECK_THROWS_AS(encode(m, Matrix(1, 6)), DimensionError);
}

TEST_CASE("encode stays finite on extreme standardized inputs") {
  MultiViewDataset ds = synth_blobs(30, 3, {16, 16}, 8.0, 3);
  ds.views[0](0, 0) = 1e3;
  ds.views[0](1, 2) = -1e3;
  const ModelBundle b = make_bundle({16, 16}, 3, 256, 64, 0);
  const MultiViewDataset z = zscore_normalize(ds);
  Matrix big = z.views[0];
  big(2, 3) = 1e3;
  CHECK(all_finite(encode(b.views[0], big)));
  const ViewForward f = forward(b.views[0], big);
  CHECK(all_finite(f.recon()));
  CHECK(all_finite(f.z()));
  CHECK(all_finite(f.probs()));
}

TEST_CASE("project: hand normalization and identity projector") {
  ViewModel m = small_model(3, 2, 4, 8, 2, 2);
  m.proj_w.value = Matrix{{1, 0}, {0, 1}};
  m.proj_b.value = Matrix{{0, 0}};
  const Projection p = project(m, Matrix{{3, 4}, {0.6, 0.8}, {0, 0}});
  CHECK(p.unit()(0, 0) == doctest::Approx(0.6));
  CHECK(p.unit()(0, 1) == doctest::Approx(0.8));
  CHECK(p.unit()(1, 0) == doctest::Approx(0.6));
  CHECK(p.unit()(1, 1) == doctest::Approx(0.8));
  CHECK(p.unit()(2, 0) == 0.0);
  CHECK(p.degenerate_rows() == 1);
}

TEST_CASE("project rows are unit norm on random batches") {
  const ModelBundle b = make_bundle({12}, 4, 32, 16, 7);
  auto rng = make_rng({8});
  const Matrix z = project(b.views[0], encode(b.views[0], random_matrix(20, 12, rng))).unit();
  const std::vector<double> norms = row_norms(z);
  for (double n : norms) CHECK(std::abs(n - 1.0) < 1e-9);
}

TEST_CASE("decode: zero latent gives zero output, shape round trip") {
  const ViewModel m = small_model(5, 3, 5);
  CHECK(decode(m, Matrix(3, 4)) == Matrix(3, 5));
  auto rng = make_rng({6});
  const Matrix x = random_matrix(7, 5, rng);
  const Matrix r = decode(m, encode(m, x));
  CHECK(r.rows() == 7);
  CHECK(r.cols() == 5);
}

TEST_CASE("classify: zero head is uniform, rows sum to one, shift invariant argmax") {
  ViewModel m = small_model(5, 4, 9);
  m.cls_w.value.fill(0.0);
  m.cls_b.value.fill(0.0);
  const Matrix u = classify(m, Matrix{{1, 2, 3, 4}}).probs;
  for (double v : u.values()) CHECK(v == doctest::Approx(0.25));

  ViewModel r = small_model(5, 4, 10);
  auto rng = make_rng({11});
  const Matrix latent = random_matrix(9, 4, rng, 3.0);
  const Classification before = classify(r, latent);
  for (std::size_t i = 0; i < 9; ++i) {
    double s = 0;
    for (double v : before.probs.row(i)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  for (auto& b : r.cls_b.value.values()) b += 17.5;
  const Classification after = classify(r, latent);
  for (std::size_t i = 0; i < 9; ++i) CHECK(argmax_row(before.probs, i) == argmax_row(after.probs, i));
}

TEST_CASE("forward and backward through all four heads pass grad_check") {
  ViewModel m = small_model(6, 3, 12, 7, 5, 4);
  auto rng = make_rng({13});
  const Matrix x = random_matrix(4, 6, rng);
  const Matrix g_recon = random_matrix(4, 6, rng);
  const Matrix g_z = random_matrix(4, 4, rng);
  const Matrix g_probs = random_matrix(4, 3, rng);
  auto loss = [&] {
    const ViewForward f = forward(m, x);
    backward(m, f, {g_recon, g_z, g_probs});
    return probe(g_recon, f.recon()) + probe(g_z, f.z()) + probe(g_probs, f.probs());
  };
  const auto params = m.parameters();
  const GradCheckReport r = grad_check(loss, params);
  INFO("worst " << r.worst_parameter << "[" << r.worst_index << "]");
  CHECK(r.max_relative_error < 1e-3);
}

TEST_CASE("reconstruction-only backward leaves the heads without gradient") {
  ViewModel m = small_model(6, 3, 14);
  auto rng = make_rng({15});
  const Matrix x = random_matrix(4, 6, rng);
  for (Parameter* p : m.parameters()) p->zero_grad();
  const ViewForward f = forward(m, x);
  backward(m, f, {random_matrix(4, 6, rng), {}, {}});
  CHECK(m.proj_w.grad == Matrix(m.proj_w.value.rows(), m.proj_w.value.cols()));
  CHECK(m.cls_w.grad == Matrix(m.cls_w.value.rows(), m.cls_w.value.cols()));
  CHECK(frobenius_sq(m.enc1_w.grad) > 0.0);
}

TEST_CASE("pretraining lowers reconstruction error monotonically over 10 epochs") {
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MultiViewDataset ds = zscore_normalize(synth_blobs(300, 3, {20, 20, 20}, 10.0, seed));
    TrainConfig c;
    c.seed = seed;
    c.pretrain_epochs = 10;
    const TrainState s = pretrain(ds, c);
    bool ok = true;
    for (std::size_t e = 1; e < s.history.size(); ++e)
      ok = ok && s.history[e].loss.recon < s.history[e - 1].loss.recon;
    monotone += ok;
  }
  CHECK(monotone >= 9);
}

TEST_CASE("checkpoint arrays round-trip bit-exactly") {
  const ModelBundle b = make_bundle({7, 3}, 4, 16, 8, 21);
  const auto file = std::filesystem::temp_directory_path() / "airmvc_test_bundle.bin";
  write_named_arrays(bundle_arrays(b), file);
  ModelBundle other = make_bundle({7, 3}, 4, 16, 8, 99);
  load_bundle_arrays(other, read_named_arrays(file));
  const auto pa = b.parameters();
  const auto pb = other.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(pa[k]->name == pb[k]->name);
    CHECK(pa[k]->value == pb[k]->value);
  }
  CHECK_FALSE(std::filesystem::exists(file.string() + ".tmp"));
}

TEST_CASE("checkpoint reader rejects foreign files and mismatched shapes") {
  const auto junk = std::filesystem::temp_directory_path() / "airmvc_test_junk.bin";
  std::ofstream(junk) << "not a checkpoint";
  CHECK_THROWS(read_named_arrays(junk));

  ModelBundle small = make_bundle({7}, 4, 16, 8, 1);
  const ModelBundle wide = make_bundle({9}, 4, 16, 8, 1);
  CHECK_THROWS(load_bundle_arrays(small, bundle_arrays(wide)));
  NamedArrays missing = bundle_arrays(small);
  missing.erase(missing.begin());
  CHECK_THROWS(load_bundle_arrays(small, missing));
}

}  // TEST_SUITE
