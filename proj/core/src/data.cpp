#include "pipesim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "pipesim/error.hpp"

namespace pipesim {

Tensor Dataset::gather_features(const std::vector<std::size_t>& rows) const {
  const std::size_t d = dim();
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = features.at(rows[i], j);
  return out;
}

Tensor Dataset::gather_labels(const std::vector<std::size_t>& rows) const {
  Tensor out({rows.size()});
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = static_cast<double>(labels[rows[i]]);
  return out;
}

Tensor Dataset::label_tensor() const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), 0);
  return gather_labels(all);
}

namespace {
constexpr std::uint64_t kCenterStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kValStream = 3;

std::uint64_t split_stream(Split s) { return s == Split::train ? kTrainStream : kValStream; }
}  // namespace

std::vector<std::vector<double>> blob_centers(std::uint64_t seed, std::size_t dim,
                                              std::size_t classes) {
  Rng rng = Rng(seed).split(kCenterStream);
  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
  for (auto& c : centers)
    for (double& x : c) x = rng.uniform(-1.0, 1.0);
  return centers;
}

Dataset make_blobs(const BlobsParams& p, Split split) {
  if (p.classes < 2) throw InputError("blobs need at least 2 classes");
  if (p.n == 0 || p.dim == 0) throw InputError("blobs need n > 0 and dim > 0");
  if (!(p.noise >= 0.0)) throw InputError("blob noise must be non-negative");

  const auto centers = blob_centers(p.seed, p.dim, p.classes);
  Rng rng = Rng(p.seed).split(split_stream(split));
  Dataset ds;
  ds.classes = p.classes;
  ds.split = split;
  ds.features = Tensor({p.n, p.dim});
  ds.labels.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const std::size_t label = i % p.classes;
    ds.labels[i] = label;
    for (std::size_t j = 0; j < p.dim; ++j) {
      ds.features.at(i, j) = centers[label][j] + p.noise * rng.normal();
    }
  }
  return ds;
}

Dataset make_moons(std::uint64_t seed, std::size_t n, double noise, Split split) {
  if (n == 0) throw InputError("moons need n > 0");
  if (!(noise >= 0.0)) throw InputError("moon noise must be non-negative");
  Rng rng = Rng(seed).split(split_stream(split));
  Dataset ds;
  ds.classes = 2;
  ds.split = split;
  ds.features = Tensor({n, 2});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    const double angle = std::numbers::pi * rng.uniform();
    double x = std::cos(angle);
    double y = std::sin(angle);
    if (label == 1) {
      x = 1.0 - x;
      y = 0.5 - y;
    }
    ds.labels[i] = label;
    ds.features.at(i, 0) = x + noise * rng.normal();
    ds.features.at(i, 1) = y + noise * rng.normal();
  }
  return ds;
}

Dataset load_csv_dataset(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset '" + path.string() + "'");

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first_data_line) {
        first_data_line = false;
        continue;
      }
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    first_data_line = false;
    if (row.size() < 2) {
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": need at least one feature and a label");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " columns, got " + std::to_string(row.size()));
    }
    const double label = row.back();
    if (label < 0.0 || label != std::floor(label)) {
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": label must be a non-negative integer");
    }
    labels.push_back(static_cast<std::size_t>(label));
    values.insert(values.end(), row.begin(), row.end() - 1);
  }
  if (labels.empty()) throw InputError("dataset '" + path.string() + "' has no rows");

  Dataset ds;
  ds.split = split;
  ds.features = Tensor({labels.size(), width - 1}, std::move(values));
  ds.labels = std::move(labels);
  std::size_t max_label = 0;
  for (std::size_t l : ds.labels) max_label = std::max(max_label, l);
  ds.classes = std::max<std::size_t>(2, max_label + 1);
  return ds;
}

BatchStream::BatchStream(const Dataset& data, std::size_t batch, std::uint64_t seed,
                         bool drop_last)
    : data_(&data), batch_(batch), rng_(seed), drop_last_(drop_last) {
  if (batch == 0) throw InputError("batch size must be positive");
  if (batch > data.size()) {
    throw InputError("batch size " + std::to_string(batch) + " exceeds dataset size " +
                     std::to_string(data.size()));
  }
  order_.resize(data.size());
  reshuffle();
}

std::size_t BatchStream::batches_per_epoch() const noexcept {
  const std::size_t n = data_->size();
  return drop_last_ ? n / batch_ : (n + batch_ - 1) / batch_;
}

void BatchStream::reshuffle() {
  std::iota(order_.begin(), order_.end(), 0);
  // Fisher-Yates with the counter-based generator; std::shuffle is not
  // specified identically across standard libraries.
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng_.below(i)]);
  }
  cursor_ = 0;
}

Batch BatchStream::next() {
  const std::size_t n = order_.size();
  if (cursor_ >= n || (drop_last_ && cursor_ + batch_ > n)) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t take = std::min(batch_, n - cursor_);
  Batch b;
  b.index = produced_++;
  b.epoch = epoch_;
  b.rows.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
  cursor_ += take;
  b.x = data_->gather_features(b.rows);
  b.y = data_->gather_labels(b.rows);
  return b;
}

}  // namespace pipesim
