#include "tvq/fcnmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tvq {

namespace {

XVec softmax_row(const XVec& logits) {
  const double mx = logits.maxCoeff();
  XVec p = (logits.array() - mx).exp();
  p /= p.sum();
  return p;
}

}  // namespace

FcnModel::FcnModel(int n_classes, std::uint64_t seed) : n_classes_(n_classes) {
  if (n_classes < 2) throw TvqError("fcn: need at least 2 classes");
  Rng rng = Rng(seed).split("fcn");
  const int widths[3] = {128, 256, kFeatureDim};
  const int kernels[3] = {8, 5, 3};
  int cin = 1;
  for (int i = 0; i < 3; ++i) {
    const int k = kernels[i];
    conv_.add(std::make_unique<nn::Conv2d>(cin, widths[i], 1, k, 1, 1, 0, (k - 1) / 2, rng));
    conv_.add(std::make_unique<nn::BatchNorm2d>(widths[i]));
    conv_.add(std::make_unique<nn::LeakyReLU>(0.0));  // plain rectifier
    cin = widths[i];
  }
  head_ = std::make_unique<nn::Linear>(kFeatureDim, n_classes, rng);
}

GridBatch FcnModel::to_grids(const XMat& samples) const {
  GridBatch g(samples.rows());
  for (int i = 0; i < samples.rows(); ++i) {
    g[i] = Grid(1, 1, static_cast<int>(samples.cols()));
    g[i].m.row(0) = samples.row(i);
  }
  return g;
}

XMat FcnModel::gap_forward(const XMat& samples, bool train) const {
  conv_.set_train(train);
  const GridBatch h = conv_.forward(to_grids(samples));
  last_width_ = h.empty() ? 0 : h[0].w;
  XMat feat(samples.rows(), kFeatureDim);
  for (std::size_t i = 0; i < h.size(); ++i)
    feat.row(i) = h[i].m.rowwise().mean().transpose();
  return feat;
}

XMat FcnModel::features(const XMat& samples) const { return gap_forward(samples, false); }

XMat FcnModel::features_cached(const XMat& samples) { return gap_forward(samples, false); }

XMat FcnModel::features_backward(const XMat& g_features) {
  GridBatch gh(g_features.rows());
  const double inv = 1.0 / last_width_;
  for (int i = 0; i < g_features.rows(); ++i) {
    gh[i] = Grid(kFeatureDim, 1, last_width_);
    for (int c = 0; c < kFeatureDim; ++c) gh[i].m.row(c).setConstant(g_features(i, c) * inv);
  }
  const GridBatch gx = conv_.backward(gh);
  XMat out(g_features.rows(), gx.empty() ? 0 : gx[0].w);
  for (std::size_t i = 0; i < gx.size(); ++i) out.row(i) = gx[i].m.row(0);
  return out;
}

XMat FcnModel::predict_proba(const XMat& samples) const {
  const XMat feat = gap_forward(samples, false);
  XMat logits = feat * head_->W.transpose();
  logits.rowwise() += head_->b.col(0).transpose();
  XMat probs(logits.rows(), logits.cols());
  for (int i = 0; i < logits.rows(); ++i)
    probs.row(i) = softmax_row(logits.row(i).transpose()).transpose();
  return probs;
}

double FcnModel::accuracy(const XMat& samples, const std::vector<int>& labels) const {
  const XMat probs = predict_proba(samples);
  int correct = 0;
  for (int i = 0; i < probs.rows(); ++i) {
    int arg = 0;
    probs.row(i).maxCoeff(&arg);
    if (arg == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / probs.rows();
}

void FcnModel::register_state(nn::Registry& r) {
  conv_.register_state("fcn.conv", r);
  head_->register_state("fcn.head", r);
}

void FcnModel::set_train(bool train) { conv_.set_train(train); }

double FcnModel::train_step(const XMat& xb, const std::vector<int>& yb) {
  const int B = static_cast<int>(xb.rows());
  conv_.set_train(true);
  const GridBatch h = conv_.forward(to_grids(xb));
  const int width = h[0].w;
  XMat feat(B, kFeatureDim);
  for (int i = 0; i < B; ++i) feat.row(i) = h[i].m.rowwise().mean().transpose();

  XMat logits = feat * head_->W.transpose();
  logits.rowwise() += head_->b.col(0).transpose();

  double loss = 0.0;
  XMat g_logits(B, n_classes_);
  for (int i = 0; i < B; ++i) {
    const XVec p = softmax_row(logits.row(i).transpose());
    loss -= std::log(std::max(p[yb[i]], 1e-300));
    g_logits.row(i) = p.transpose();
    g_logits(i, yb[i]) -= 1.0;
  }
  loss /= B;
  g_logits /= B;

  // Head backward.
  head_->gW.noalias() += g_logits.transpose() * feat;
  head_->gb.col(0) += g_logits.colwise().sum().transpose();
  const XMat g_feat = g_logits * head_->W;

  GridBatch gh(B);
  const double inv = 1.0 / width;
  for (int i = 0; i < B; ++i) {
    gh[i] = Grid(kFeatureDim, 1, width);
    for (int c = 0; c < kFeatureDim; ++c) gh[i].m.row(c).setConstant(g_feat(i, c) * inv);
  }
  conv_.backward(gh);
  return loss;
}

FcnModel train_fcn(const TimeSeriesDataset& ds_train, const TimeSeriesDataset& ds_test,
                   const FcnTrainOptions& opts, const std::function<void(int, double)>& on_epoch) {
  if (ds_train.n_classes() < 2) throw TvqError("train_fcn: single-class dataset");
  FcnModel model(ds_train.n_classes(), opts.seed);
  nn::Registry reg;
  model.register_state(reg);
  nn::AdamW opt(reg.params, opts.weight_decay);
  Rng root(opts.seed);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr = nn::cosine_lr(opts.lr, epoch, opts.epochs);
    Rng shuffle_rng = root.split("fcn.shuffle", epoch);
    std::vector<int> order(ds_train.n());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double epoch_loss = 0.0;
    for (int pos = 0; pos < ds_train.n(); pos += opts.batch_size) {
      const int b = std::min(opts.batch_size, ds_train.n() - pos);
      XMat xb(b, ds_train.length());
      std::vector<int> yb(b);
      for (int i = 0; i < b; ++i) {
        xb.row(i) = ds_train.samples.row(order[pos + i]);
        yb[i] = ds_train.labels[order[pos + i]];
      }
      reg.zero_grads();
      const double l = model.train_step(xb, yb);
      if (!std::isfinite(l)) throw TvqError("train_fcn: non-finite loss at epoch " + std::to_string(epoch));
      opt.step(lr);
      epoch_loss += l * b;
    }
    if (on_epoch) on_epoch(epoch, epoch_loss / ds_train.n());
  }
  model.set_train(false);
  model.test_accuracy = model.accuracy(ds_test.samples, ds_test.labels);
  return model;
}

// ------------------------------------------------------------------- FID ---

namespace {

/// Symmetric PSD square root via eigendecomposition; small negative
/// eigenvalues are clipped to zero.
XMat sqrt_psd(const XMat& sym) {
  Eigen::SelfAdjointEigenSolver<XMat> es(0.5 * (sym + sym.transpose()));
  if (es.info() != Eigen::Success) throw TvqError("fid: eigendecomposition failed");
  XVec lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

void gaussian_stats(const XMat& feat, XVec& mean, XMat& cov) {
  const int n = static_cast<int>(feat.rows());
  mean = feat.colwise().mean().transpose();
  const XMat centered = feat.rowwise() - mean.transpose();
  cov = centered.transpose() * centered / std::max(1, n - 1);
}

}  // namespace

double fid(const XMat& feat_real, const XMat& feat_gen) {
  if (feat_real.rows() < 2 || feat_gen.rows() < 2) throw TvqError("fid: need >= 2 rows per side");
  XVec mu_r, mu_g;
  XMat cov_r, cov_g;
  gaussian_stats(feat_real, mu_r, cov_r);
  gaussian_stats(feat_gen, mu_g, cov_g);
  if (!cov_r.allFinite() || !cov_g.allFinite()) throw TvqError("fid: non-finite covariance");

  const XMat s_r = sqrt_psd(cov_r);
  const XMat inner = sqrt_psd(s_r * cov_g * s_r);
  const double value =
      (mu_r - mu_g).squaredNorm() + cov_r.trace() + cov_g.trace() - 2.0 * inner.trace();
  return std::max(0.0, value);
}

// -------------------------------------------------------------------- IS ---

std::pair<double, double> inception_score_from_probs(const XMat& probs, int n_splits) {
  const int n = static_cast<int>(probs.rows());
  if (n < 1) throw TvqError("inception_score: empty predictions");
  n_splits = std::max(1, std::min(n_splits, n));
  std::vector<double> scores;
  const int per = n / n_splits;
  for (int s = 0; s < n_splits; ++s) {
    const int lo = s * per;
    const int hi = s + 1 == n_splits ? n : lo + per;
    const auto chunk = probs.middleRows(lo, hi - lo);
    const XVec marginal = chunk.colwise().mean().transpose();
    double kl = 0.0;
    for (int i = 0; i < chunk.rows(); ++i)
      for (int c = 0; c < chunk.cols(); ++c) {
        const double p = chunk(i, c);
        if (p > 0.0) kl += p * (std::log(p) - std::log(std::max(marginal[c], 1e-300)));
      }
    scores.push_back(std::exp(kl / chunk.rows()));
  }
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  const double sd = scores.size() > 1 ? std::sqrt(var / scores.size()) : 0.0;
  return {mean, sd};
}

std::pair<double, double> inception_score(const FcnModel& model, const XMat& samples, int n_splits) {
  return inception_score_from_probs(model.predict_proba(samples), n_splits);
}

int eval_sample_count(int test_size) {
  if (test_size < 1) throw TvqError("eval_sample_count: test_size must be >= 1");
  return std::max(test_size, 256);
}

std::vector<int> cas_class_counts(const std::vector<int>& train_class_counts, int target) {
  const int total = std::accumulate(train_class_counts.begin(), train_class_counts.end(), 0);
  if (total < 1) throw TvqError("cas: empty training distribution");
  const int factor = total >= target ? 1 : (target + total - 1) / total;
  std::vector<int> counts(train_class_counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = factor * train_class_counts[i];
  return counts;
}

std::pair<double, double> cas(const ClassConditionalGenerator& generator,
                              const TimeSeriesDataset& ds_real_train,
                              const TimeSeriesDataset& ds_real_test, int runs,
                              const FcnTrainOptions& fcn_opts, std::uint64_t seed) {
  if (!generator) throw TvqError("cas: generator lacks class conditioning");
  const std::vector<int> counts = cas_class_counts(ds_real_train.class_counts());
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  std::vector<double> scores;
  Rng root(seed);
  for (int run = 0; run < runs; ++run) {
    TimeSeriesDataset synth;
    synth.name = ds_real_train.name + "-synth";
    synth.samples.resize(total, ds_real_train.length());
    synth.labels.reserve(total);
    synth.normalized = ds_real_train.normalized;
    int row = 0;
    Rng gen_rng = root.split("cas.generate", run);
    for (std::size_t c = 0; c < counts.size(); ++c) {
      const XMat xs = generator(static_cast<int>(c), counts[c], gen_rng);
      for (int i = 0; i < counts[c]; ++i) {
        synth.samples.row(row++) = xs.row(i);
        synth.labels.push_back(static_cast<int>(c));
      }
    }
    FcnTrainOptions run_opts = fcn_opts;
    run_opts.seed = root.split("cas.fcn", run).seed();
    const FcnModel model = train_fcn(synth, ds_real_test, run_opts);
    scores.push_back(model.test_accuracy);
  }
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  const double sd = scores.size() > 1 ? std::sqrt(var / scores.size()) : 0.0;
  return {mean, sd};
}

}  // namespace tvq
