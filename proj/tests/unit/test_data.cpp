#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "pipesim/data.hpp"
#include "pipesim/error.hpp"
#include "pipesim/executor.hpp"

using namespace pipesim;

TEST_CASE("noiseless blobs sit on their centers") {
  BlobsParams p{.seed = 3, .n = 120, .dim = 5, .classes = 4, .noise = 0.0};
  const Dataset ds = make_blobs(p);
  const auto centers = blob_centers(3, 5, 4);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double d = 0;
      for (std::size_t j = 0; j < 5; ++j) d += std::pow(ds.features.at(i, j) - centers[c][j], 2);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    CHECK(best_d == 0.0);
    correct += best == ds.labels[i];
  }
  CHECK(correct == ds.size());
}

TEST_CASE("blobs are deterministic and splits are disjoint draws") {
  BlobsParams p{.seed = 11, .n = 64, .dim = 3, .classes = 3, .noise = 0.4};
  const Dataset a = make_blobs(p), b = make_blobs(p);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const Dataset v = make_blobs(p, Split::val);
  CHECK(v.split == Split::val);
  CHECK(v.features != a.features);

  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::count(a.labels.begin(), a.labels.end(), c) >= 21);
  }
  p.classes = 1;
  CHECK_THROWS_AS(make_blobs(p), InputError);
  p.classes = 2;
  p.noise = -1;
  CHECK_THROWS_AS(make_blobs(p), InputError);
}

TEST_CASE("moons") {
  const Dataset m = make_moons(4, 200, 0.1);
  CHECK(m.dim() == 2);
  CHECK(m.classes == 2);
  CHECK(m.features == make_moons(4, 200, 0.1).features);
}

TEST_CASE("batch stream covers each epoch exactly once") {
  BlobsParams p{.seed = 1, .n = 50, .dim = 2, .classes = 2, .noise = 1.0};
  const Dataset ds = make_blobs(p);

  SUBCASE("batch == n is a permutation") {
    BatchStream s(ds, 50, 9);
    const Batch b = s.next();
    auto rows = b.rows;
    std::sort(rows.begin(), rows.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(rows[i] == i);
    CHECK(s.next().epoch == 1);
  }

  SUBCASE("multiset equality per epoch, with a short final batch") {
    BatchStream s(ds, 8, 9);
    CHECK(s.batches_per_epoch() == 7);
    for (std::size_t epoch = 0; epoch < 3; ++epoch) {
      std::vector<std::size_t> seen;
      std::vector<std::size_t> label_counts(2, 0);
      for (std::size_t k = 0; k < 7; ++k) {
        const Batch b = s.next();
        CHECK(b.epoch == epoch);
        CHECK(b.x.rows() == b.rows.size());
        for (std::size_t i = 0; i < b.rows.size(); ++i) {
          CHECK(b.x.at(i, 0) == ds.features.at(b.rows[i], 0));
          CHECK(b.y[i] == static_cast<double>(ds.labels[b.rows[i]]));
          ++label_counts[ds.labels[b.rows[i]]];
        }
        seen.insert(seen.end(), b.rows.begin(), b.rows.end());
      }
      std::sort(seen.begin(), seen.end());
      CHECK(seen.size() == 50);
      for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);
      CHECK(label_counts[0] == 25);
      CHECK(label_counts[1] == 25);
    }
  }

  SUBCASE("drop_last keeps batches full") {
    BatchStream s(ds, 8, 9, true);
    CHECK(s.batches_per_epoch() == 6);
    for (int k = 0; k < 20; ++k) CHECK(s.next().rows.size() == 8);
  }

  SUBCASE("same seed, same stream") {
    BatchStream a(ds, 8, 5), b(ds, 8, 5), c(ds, 8, 6);
    bool differs = false;
    for (int k = 0; k < 30; ++k) {
      const Batch x = a.next();
      CHECK(x.rows == b.next().rows);
      differs |= x.rows != c.next().rows;
    }
    CHECK(differs);
  }

  CHECK_THROWS_AS(BatchStream(ds, 51, 0), InputError);
  CHECK_THROWS_AS(BatchStream(ds, 0, 0), InputError);
}

TEST_CASE("csv import") {
  const auto path = std::filesystem::temp_directory_path() / "pipesim_test_data.csv";
  {
    std::ofstream out(path);
    out << "x0,x1,label\n# comment\n0.5,1.5,0\n-1,2,2\n\n3,4,1\n";
  }
  const Dataset ds = load_csv_dataset(path);
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.classes == 3);
  CHECK(ds.features.at(1, 0) == -1.0);
  CHECK(ds.labels == std::vector<std::size_t>{0, 2, 1});

  {
    std::ofstream out(path);
    out << "1,2,0\n1,2\n";
  }
  CHECK_THROWS_AS(load_csv_dataset(path), InputError);
  {
    std::ofstream out(path);
    out << "1,2,0.5\n";
  }
  CHECK_THROWS_AS(load_csv_dataset(path), InputError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_csv_dataset(path), InputError);
}

TEST_CASE("a small net learns low-noise blobs") {
  // Baseline for the strategy comparisons: noise at 0.1x the closest pair
  // of centers.
  const std::uint64_t seed = 21;
  const auto centers = blob_centers(seed, 8, 4);
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      double d = 0;
      for (std::size_t j = 0; j < 8; ++j) d += std::pow(centers[a][j] - centers[b][j], 2);
      min_dist = std::min(min_dist, std::sqrt(d));
    }
  BlobsParams p{.seed = seed, .n = 1024, .dim = 8, .classes = 4, .noise = 0.1 * min_dist};
  const Dataset train = make_blobs(p), val = make_blobs(p, Split::val);
  const ModelSpec spec = ModelSpec::stacked(8, {32}, 4);
  Rng rng(seed);
  BatchStream stream(train, 32, seed);
  TrainOptions opts;
  opts.eta = 0.1;
  opts.steps = 2000;
  const RunResult r = train_single(spec, init_params(spec, rng), stream, opts);
  const auto pred = predict_classes(forward(spec, r.final_params, val.features).output);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == val.labels[i];
  CHECK(static_cast<double>(correct) / static_cast<double>(val.size()) > 0.95);
}
