#pragma once

#include "tvq/dataset.hpp"
#include "tvq/nn.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>

namespace tvq {

struct FcnTrainOptions {
  int epochs = 1000;
  int batch_size = 256;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
};

/// Fully convolutional classifier: three 1-D conv blocks with widths
/// (128, 256, 128) and kernels (8, 5, 3), each conv -> batch norm ->
/// rectifier, then global average pooling, a linear head, and softmax.
/// The 128-dim GAP activations are the metric feature space.
class FcnModel {
 public:
  static constexpr int kFeatureDim = 128;

  FcnModel(int n_classes, std::uint64_t seed);

  int n_classes() const { return n_classes_; }

  /// GAP-layer activations, eval mode: N × 128.
  XMat features(const XMat& samples) const;
  /// Softmax class probabilities, eval mode: N × C.
  XMat predict_proba(const XMat& samples) const;
  double accuracy(const XMat& samples, const std::vector<int>& labels) const;

  /// Feature forward that keeps layer caches so features_backward can return
  /// input gradients (used by the perceptual loss).
  XMat features_cached(const XMat& samples);
  XMat features_backward(const XMat& g_features);

  void register_state(nn::Registry& r);
  void set_train(bool train);

  /// One supervised step over a batch; returns mean cross-entropy.
  double train_step(const XMat& xb, const std::vector<int>& yb);

  double test_accuracy = -1.0;  // recorded by train_fcn

 private:
  GridBatch to_grids(const XMat& samples) const;
  XMat gap_forward(const XMat& samples, bool train) const;

  int n_classes_;
  mutable nn::GridSequential conv_;
  std::unique_ptr<nn::Linear> head_;
  mutable int last_width_ = 0;
};

/// AdamW + cosine schedule supervised training; records test accuracy on the
/// returned model. Errors on single-class data.
FcnModel train_fcn(const TimeSeriesDataset& ds_train, const TimeSeriesDataset& ds_test,
                   const FcnTrainOptions& opts,
                   const std::function<void(int, double)>& on_epoch = {});

/// Frechet distance between Gaussian fits of two feature sets, with a
/// symmetrized matrix square root and negative-eigenvalue clipping.
double fid(const XMat& feat_real, const XMat& feat_gen);

/// exp(E_x[KL(p(y|x) || p(y))]) computed from a prediction matrix.
std::pair<double, double> inception_score_from_probs(const XMat& probs, int n_splits = 1);
std::pair<double, double> inception_score(const FcnModel& model, const XMat& samples,
                                          int n_splits = 1);

/// Synthetic sample count for IS/FID evaluation: max(test_size, 256).
int eval_sample_count(int test_size);

/// Per-class generation counts for CAS: the real per-class counts, scaled by
/// ceil(1000 / N) when the training set holds fewer than 1000 samples.
std::vector<int> cas_class_counts(const std::vector<int>& train_class_counts, int target = 1000);

/// Class-conditional sample source: (class index, count, rng) -> count × L.
using ClassConditionalGenerator = std::function<XMat(int, int, Rng&)>;

/// Train a fresh classifier on synthetic samples, test on real data; mean and
/// std over `runs` repetitions.
std::pair<double, double> cas(const ClassConditionalGenerator& generator,
                              const TimeSeriesDataset& ds_real_train,
                              const TimeSeriesDataset& ds_real_test, int runs,
                              const FcnTrainOptions& fcn_opts, std::uint64_t seed);

/// One evaluation row of the results table.
struct MetricReport {
  std::string dataset;
  std::optional<double> fid_value;
  std::optional<double> is_mean, is_std;
  std::optional<double> cas_mean, cas_std;
  int n_real = 0, n_gen = 0;
};

}  // namespace tvq
