#include "airmvc/dataset.hpp"
#include "airmvc/kmeans.hpp"
#include "airmvc/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace airmvc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("airmvc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream(file) << text;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("load a two-view directory with labels") {
  const fs::path dir = scratch_dir("load");
  write_text(dir / "view_1.csv", "1,2\n3,4\n5,6\n");
  write_text(dir / "view_2.csv", "0.5,1\n1.5,2\n2.5,3\n");
  write_text(dir / "labels.csv", "0\n1\n0\n");
  const MultiViewDataset ds = load_dataset(dir);
  CHECK(ds.num_samples() == 3);
  CHECK(ds.num_views() == 2);
  CHECK(ds.num_clusters == 2);
  CHECK(ds.views[1](2, 1) == 3.0);
  CHECK(*ds.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("meta.txt supplies the cluster count and name") {
  const fs::path dir = scratch_dir("meta");
  write_text(dir / "view_1.csv", "1\n2\n");
  write_text(dir / "view_2.csv", "3\n4\n");
  write_text(dir / "meta.txt", "clusters=5\nname=tiny\n");
  const MultiViewDataset ds = load_dataset(dir);
  CHECK(ds.num_clusters == 5);
  CHECK(ds.name == "tiny");
  CHECK_FALSE(ds.labels.has_value());
}

TEST_CASE("row-count mismatch names both files") {
  const fs::path dir = scratch_dir("mismatch");
  write_text(dir / "view_1.csv", "1\n2\n3\n");
  write_text(dir / "view_2.csv", "1\n2\n3\n4\n");
  write_text(dir / "labels.csv", "0\n1\n0\n");
  try {
    load_dataset(dir);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("view_1.csv") != std::string::npos);
    CHECK(what.find("view_2.csv") != std::string::npos);
  }
}

TEST_CASE("non-numeric cell reports row and column") {
  const fs::path dir = scratch_dir("parse");
  write_text(dir / "view_1.csv", "1,2\n3,x\n");
  write_text(dir / "view_2.csv", "1\n2\n");
  write_text(dir / "labels.csv", "0\n1\n");
  try {
    load_dataset(dir);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 2") != std::string::npos);
    CHECK(what.find("column 2") != std::string::npos);
  }
}

TEST_CASE("save then load round-trips bit-exactly") {
  MultiViewDataset ds = synth_blobs(12, 3, {4, 2}, 3.0, 9);
  ds.views[0](0, 0) = 0.1 + 0.2;  // not representable in short decimal
  ds.name = "roundtrip";
  const fs::path dir = scratch_dir("roundtrip");
  save_dataset(ds, dir);
  const MultiViewDataset back = load_dataset(dir);
  CHECK(back.views == ds.views);
  CHECK(*back.labels == *ds.labels);
  CHECK(back.num_clusters == 3);
  CHECK(back.name == "roundtrip");
}

TEST_CASE("synth_blobs balance, shape and determinism") {
  const MultiViewDataset ds = synth_blobs(6, 3, {5, 5}, 8.0, 1);
  CHECK(ds.num_views() == 2);
  CHECK(ds.views[0].rows() == 6);
  CHECK(ds.views[0].cols() == 5);
  std::vector<int> counts(3, 0);
  for (int l : *ds.labels) ++counts[static_cast<std::size_t>(l)];
  CHECK(counts == std::vector<int>{2, 2, 2});
  CHECK(synth_blobs(6, 3, {5, 5}, 8.0, 1).views == ds.views);
  CHECK(synth_blobs(6, 3, {5, 5}, 8.0, 2).views != ds.views);
}

TEST_CASE("well separated blobs are perfectly recoverable by k-means on one view") {
  const MultiViewDataset ds = synth_blobs(90, 3, {10, 10}, 50.0, 4);
  const KMeansResult km = kmeans(ds.views[0], 3, 0);
  CHECK(clustering_accuracy(km.labels, *ds.labels, 3) == 1.0);
}

TEST_CASE("inject_noise: ratio 0 leaves data unchanged") {
  const MultiViewDataset ds = synth_blobs(20, 2, {3, 3}, 5.0, 2);
  NoiseSpec spec;
  spec.ratio = 0.0;
  const NoisyDataset n = inject_noise(ds, spec);
  CHECK(n.dataset.views == ds.views);
  for (const auto& rows : n.mask.rows)
    for (bool c : rows) CHECK_FALSE(c);
}

TEST_CASE("inject_noise: ratio 1 replaces every row of view 2 only") {
  const MultiViewDataset ds = synth_blobs(20, 2, {3, 3}, 5.0, 2);
  NoiseSpec spec;
  spec.ratio = 1.0;
  spec.seed = 7;
  const NoisyDataset n = inject_noise(ds, spec);
  CHECK(n.dataset.views[0] == ds.views[0]);
  CHECK(n.mask.count(1) == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(n.dataset.views[1](i, 0) != ds.views[1](i, 0));
}

TEST_CASE("inject_noise: exact count, untouched clean rows, determinism") {
  const MultiViewDataset ds = synth_blobs(10, 2, {4, 4, 4}, 5.0, 3);
  NoiseSpec spec;
  spec.ratio = 0.5;
  spec.seed = 11;
  const NoisyDataset a = inject_noise(ds, spec);
  const NoisyDataset b = inject_noise(ds, spec);
  CHECK(a.mask.rows == b.mask.rows);
  CHECK(a.dataset.views == b.dataset.views);
  for (std::size_t v = 1; v < 3; ++v) {
    CHECK(a.mask.count(v) == 5);
    for (std::size_t i = 0; i < 10; ++i) {
      if (a.mask.corrupted(v, i)) continue;
      for (std::size_t d = 0; d < 4; ++d) CHECK(a.dataset.views[v](i, d) == ds.views[v](i, d));
    }
  }
  CHECK(a.mask.count(0) == 0);
}

TEST_CASE("inject_noise: corrupted count is round(ratio * N) for many ratios") {
  const MultiViewDataset ds = synth_blobs(37, 3, {2, 2}, 4.0, 5);
  for (double ratio : {0.1, 0.25, 0.3, 0.5, 0.7, 0.9}) {
    NoiseSpec spec;
    spec.ratio = ratio;
    const NoisyDataset n = inject_noise(ds, spec);
    CHECK(n.mask.count(1) == static_cast<std::size_t>(std::llround(ratio * 37)));
  }
}

TEST_CASE("corrupting the first view needs the explicit override") {
  const MultiViewDataset ds = synth_blobs(10, 2, {2, 2}, 4.0, 5);
  NoiseSpec spec;
  spec.ratio = 0.5;
  spec.corrupted_views = {0};
  CHECK_THROWS(inject_noise(ds, spec));
  spec.allow_first_view = true;
  const NoisyDataset n = inject_noise(ds, spec);
  CHECK(n.mask.count(0) == 5);
  CHECK(n.dataset.views[1] == ds.views[1]);
}

TEST_CASE("zscore: constant column, hand column, idempotence") {
  MultiViewDataset ds;
  ds.views = {Matrix{{2, 1}, {2, 3}}, Matrix{{1}, {2}}};
  ds.num_clusters = 1;
  const MultiViewDataset z = zscore_normalize(ds);
  CHECK(z.views[0](0, 0) == 0.0);
  CHECK(z.views[0](1, 0) == 0.0);
  CHECK(z.views[0](0, 1) == doctest::Approx(-1.0));
  CHECK(z.views[0](1, 1) == doctest::Approx(1.0));

  const MultiViewDataset blobs = zscore_normalize(synth_blobs(40, 2, {3, 3}, 6.0, 8));
  const MultiViewDataset again = zscore_normalize(blobs);
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t k = 0; k < blobs.views[v].size(); ++k)
      CHECK(std::abs(again.views[v].values()[k] - blobs.views[v].values()[k]) < 1e-9);
}

TEST_CASE("minibatches partition the indices") {
  const auto batches = minibatch_iter(5, 2, 0, 0);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 2);
  CHECK(batches[1].size() == 2);
  CHECK(batches[2].size() == 1);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("minibatch order is seeded per epoch") {
  CHECK(minibatch_iter(50, 7, 3, 4) == minibatch_iter(50, 7, 3, 4));
  std::set<std::vector<std::vector<std::size_t>>> distinct;
  for (std::uint64_t e = 0; e < 10; ++e) distinct.insert(minibatch_iter(16, 16, 3, e));
  CHECK(distinct.size() == 10);
}

}  // TEST_SUITE
