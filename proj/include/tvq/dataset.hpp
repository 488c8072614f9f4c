#pragma once

#include "tvq/rng.hpp"
#include "tvq/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tvq {

enum class Split { train, test };

/// Univariate series with 0-based contiguous class labels. Immutable after
/// construction; safe for concurrent reads.
struct TimeSeriesDataset {
  XMat samples;             // N × L
  std::vector<int> labels;  // in [0, C-1]
  std::string name;
  Split split = Split::train;
  double mean = 0.0, std = 1.0;  // normalization stats applied (identity until normalize)
  bool normalized = false;

  int n() const { return static_cast<int>(samples.rows()); }
  int length() const { return static_cast<int>(samples.cols()); }
  int n_classes() const;
  std::vector<int> class_counts() const;
};

/// Parse one UCR text file: one record per line, class label first, then L
/// values; tabs or arbitrary whitespace; '#' lines and blank lines skipped.
/// NaN gaps are repaired by linear interpolation (edges copy the nearest
/// finite value); labels are remapped to 0-based contiguous indices.
TimeSeriesDataset load_ucr(const std::string& path, Split split);

/// Load `<data_dir>/<name>/<name>_{TRAIN,TEST}.tsv`.
TimeSeriesDataset load_ucr_dir(const std::string& data_dir, const std::string& name, Split split);

/// Write samples in the same text format (label column first). A non-empty
/// comment is emitted as leading '#' header lines.
void save_ucr(const std::string& path, const XMat& samples, const std::vector<int>& labels,
              const std::string& comment = "");

/// Standardize with the dataset's own global statistics (flattened mean and
/// population std). Errors on zero variance.
TimeSeriesDataset normalize(const TimeSeriesDataset& ds);

/// Standardize with externally supplied statistics (test splits reuse the
/// train split's).
TimeSeriesDataset normalize_with(const TimeSeriesDataset& ds, double mean, double std);

/// Per-series z-normalization (off-by-default alternative).
TimeSeriesDataset normalize_per_series(const TimeSeriesDataset& ds);

XMat denormalize(const XMat& samples, double mean, double std);

/// Global mean and population std of a dataset's values.
std::pair<double, double> global_stats(const XMat& samples);

/// Deterministic epoch batcher. Every sample appears exactly once; with
/// shuffle the order is a function of the seed alone.
class BatchIterator {
 public:
  BatchIterator(const TimeSeriesDataset& ds, int batch_size, bool shuffle, std::uint64_t seed);
  /// Fills the next (samples, labels) batch; false at end of epoch.
  bool next(XMat& xb, std::vector<int>& yb);
  const std::vector<int>& order() const { return order_; }

 private:
  const TimeSeriesDataset& ds_;
  int batch_size_;
  std::vector<int> order_;
  std::size_t pos_ = 0;
};

BatchIterator batches(const TimeSeriesDataset& ds, int batch_size, bool shuffle, std::uint64_t seed);

}  // namespace tvq
