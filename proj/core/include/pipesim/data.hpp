#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pipesim/rng.hpp"
#include "pipesim/tensor.hpp"

namespace pipesim {

enum class Split { train, val };

struct Dataset {
  Tensor features;                  // [n x d]
  std::vector<std::size_t> labels;  // n entries in [0, classes)
  std::size_t classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  // Rows selected by index, labels as a [k] class-id tensor.
  Tensor gather_features(const std::vector<std::size_t>& rows) const;
  Tensor gather_labels(const std::vector<std::size_t>& rows) const;
  Tensor label_tensor() const;
};

struct BlobsParams {
  std::uint64_t seed = 0;
  std::size_t n = 1024;
  std::size_t dim = 16;
  std::size_t classes = 4;
  double noise = 0.5;
};

// Gaussian clusters around `classes` centers drawn uniformly from [-1, 1]^d.
// Centers depend only on the seed; points depend on (seed, split), so the
// train and val splits never share a draw. Labels cycle through the classes.
Dataset make_blobs(const BlobsParams& p, Split split = Split::train);
std::vector<std::vector<double>> blob_centers(std::uint64_t seed, std::size_t dim,
                                              std::size_t classes);

// Two interleaved half circles in 2-D with Gaussian jitter. Two classes.
Dataset make_moons(std::uint64_t seed, std::size_t n, double noise, Split split = Split::train);

// Rows of d numeric feature columns followed by an integer label. Lines that
// are empty or start with '#' are skipped; a non-numeric first line is
// treated as a header.
Dataset load_csv_dataset(const std::filesystem::path& path, Split split = Split::train);

struct Batch {
  std::size_t index = 0;  // position in the stream, 0-based
  std::size_t epoch = 0;
  std::vector<std::size_t> rows;
  Tensor x;
  Tensor y;
};

// Infinite stream of mini-batches: every epoch draws a fresh permutation of
// the rows from the seed and cuts it into consecutive batches. The final
// short batch of an epoch is emitted unless drop_last is set.
class BatchStream {
 public:
  BatchStream(const Dataset& data, std::size_t batch, std::uint64_t seed, bool drop_last = false);

  Batch next();
  std::size_t batches_per_epoch() const noexcept;

 private:
  void reshuffle();

  const Dataset* data_;
  std::size_t batch_;
  Rng rng_;
  bool drop_last_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  std::size_t produced_ = 0;
};

}  // namespace pipesim
