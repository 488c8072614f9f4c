#pragma once

#include "tvq/dataset.hpp"
#include "tvq/nn.hpp"
#include "tvq/quantizer.hpp"
#include "tvq/tfr.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace tvq {

class FcnModel;

/// Encoder/decoder sizing. kernel_h=1 selects the 1-D (raw time series)
/// variant used by the naive ablation.
struct EncDecConfig {
  int hidden_dim = 64;
  int n_resblocks = 4;
  int target_width = 8;
  int in_channels = 2;
  int kernel_h = 3;
  double leaky_slope = 0.01;

  static EncDecConfig small(int target_width_, int in_channels_ = 2, int kernel_h_ = 3) {
    EncDecConfig c;
    c.hidden_dim = 32;
    c.n_resblocks = 2;
    c.target_width = target_width_;
    c.in_channels = in_channels_;
    c.kernel_h = kernel_h_;
    return c;
  }
  static EncDecConfig base(int target_width_, int in_channels_ = 2, int kernel_h_ = 3) {
    EncDecConfig c;
    c.hidden_dim = 64;
    c.n_resblocks = 4;
    c.target_width = target_width_;
    c.in_channels = in_channels_;
    c.kernel_h = kernel_h_;
    return c;
  }
};

/// Temporal downsample count: max(0, round(log2(W / target))), clamped so
/// every downsampling block still sees a width of at least 2.
int downsample_count(int width, int target_width);

/// n downsampling blocks (conv (kh,4)/(1,2) -> batch norm -> leaky rectifier),
/// m residual blocks, 1×1 projection to the code dimension. Height is never
/// downsampled. With n=0 a 1×1 stem lifts the input channels.
class SpectrogramEncoder : public nn::Module {
 public:
  SpectrogramEncoder(const EncDecConfig& cfg, int input_width, Rng& rng);
  GridBatch forward(const GridBatch& u);
  GridBatch backward(const GridBatch& gz);
  void register_state(const std::string& prefix, nn::Registry& r) override;
  void set_train(bool train) override { net_.set_train(train); }
  int n_down() const { return n_down_; }
  int output_width(int input_width) const;

 private:
  nn::GridSequential net_;
  int n_down_;
};

/// 1×1 projection from the code dimension, m residual blocks, then n+1
/// upsampling blocks; the final (extra) upsampling block maps to the output
/// channels and is followed by frame-level linear interpolation outside.
class SpectrogramDecoder : public nn::Module {
 public:
  SpectrogramDecoder(const EncDecConfig& cfg, int n_down, Rng& rng);
  GridBatch forward(const GridBatch& zq);
  GridBatch backward(const GridBatch& gy);
  void register_state(const std::string& prefix, nn::Registry& r) override;
  void set_train(bool train) override { net_.set_train(train); }

 private:
  nn::GridSequential net_;
};

/// Row-wise linear interpolation of every channel/row to a new width.
Grid grid_length_match(const Grid& g, int target_w);
Grid grid_length_match_adjoint(const Grid& gy, int source_w);

enum class BandMode { lf, hf, full_tf, raw_time };

struct Stage1Losses {
  double recons_time_lf = 0, recons_time_hf = 0;
  double recons_tf_lf = 0, recons_tf_hf = 0;
  double codebook = 0;
  double perceptual = 0;
  double total = 0;
};

struct Stage1Config {
  StftConfig stft;
  EncDecConfig lf = EncDecConfig::base(8);
  EncDecConfig hf = EncDecConfig::base(32);
  int codebook_size = 32;
  double ema_decay = 0.8;
  double beta = 1.0;
  bool use_ema = true;          // false = pure-loss codebook variant
  bool band_separation = true;  // false with naive_time=false => single full-TF branch
  bool naive_time = false;      // single raw-time branch with 1-D convolutions
  bool hf_time_squared = true;  // false restores the literal unsquared HF time term
  bool perceptual = false;
};

struct Stage1TrainOptions {
  int epochs = 2000;
  int batch_size = 128;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
};

/// Per-dataset precomputed stage-1 tensors: band-masked spectrogram grids and
/// their time-domain counterparts, in dataset row order.
struct Stage1Data {
  std::vector<GridBatch> u;          // per band: N grids
  std::vector<std::vector<XVec>> x;  // per band: N series
  std::vector<XVec> x_orig;          // the source series
  int series_length = 0;
};

/// One or two band autoencoders plus codebooks; the complete stage-1 model.
class Stage1Model {
 public:
  Stage1Model(const Stage1Config& cfg, int series_length, std::uint64_t seed);

  int n_bands() const { return static_cast<int>(bands_.size()); }
  BandMode band_mode(int band) const { return bands_[band].mode; }
  const Codebook& codebook(int band) const { return bands_[band].cb; }
  Codebook& codebook(int band) { return bands_[band].cb; }
  int token_rows(int band) const { return bands_[band].freq_bins; }
  int token_cols(int band) const { return bands_[band].latent_width; }
  int token_count(int band) const { return token_rows(band) * token_cols(band); }
  const Stage1Config& config() const { return cfg_; }
  int series_length() const { return series_length_; }

  void set_train(bool train);
  void register_state(nn::Registry& r);

  Stage1Data prepare(const TimeSeriesDataset& ds) const;

  /// Encoder activations for one sample (eval-mode path used by tokenizers).
  Grid encode_one(int band, const Grid& u);

  /// Squared code distances for one sample: K × token_count.
  XMat token_distances(int band, const Grid& u);

  /// Decode a token grid to (u_hat, x_hat) through the band decoder, the
  /// frame-level length match, the band mask, and the inverse transform.
  std::pair<Spectrogram, XVec> decode_tokens(int band, const TokenGrid& tokens);

  /// One optimization step over a batch; returns the losses. Also used with
  /// compute_grads=false for evaluation passes.
  Stage1Losses train_step(const Stage1Data& data, const std::vector<int>& batch,
                          bool compute_grads, const FcnModel* perceptual_fcn = nullptr);

 private:
  struct BandNet {
    BandMode mode;
    EncDecConfig cfg;
    std::unique_ptr<SpectrogramEncoder> enc;
    std::unique_ptr<SpectrogramDecoder> dec;
    Codebook cb;
    int freq_bins = 1;     // latent/token rows (height preserved)
    int frames = 0;        // spectrogram frames (or L for raw mode)
    int latent_width = 0;  // token columns
  };

  Grid input_grid(const BandNet& band, const XVec& x) const;
  XVec band_series(const BandNet& band, const Grid& u) const;

  Stage1Config cfg_;
  int series_length_;
  std::vector<BandNet> bands_;
  std::vector<XMat> g_codes_;  // codebook grads for the pure-loss variant
};

/// The four squared-error reconstruction terms for one sample: time-domain
/// LF/HF and time-frequency LF/HF. hf_time_squared=false restores the
/// literal unsquared HF time norm.
struct ReconsTerms {
  double time_lf = 0, time_hf = 0, tf_lf = 0, tf_hf = 0;
  double total() const { return time_lf + time_hf + tf_lf + tf_hf; }
};

ReconsTerms reconstruction_terms(const XVec& x_lf, const XVec& xhat_lf, const XVec& x_hf,
                                 const XVec& xhat_hf, const Grid& u_lf, const Grid& uhat_lf,
                                 const Grid& u_hf, const Grid& uhat_hf,
                                 bool hf_time_squared = true);

double reconstruction_loss(const XVec& x_lf, const XVec& xhat_lf, const XVec& x_hf,
                           const XVec& xhat_hf, const Grid& u_lf, const Grid& uhat_lf,
                           const Grid& u_hf, const Grid& uhat_hf, bool hf_time_squared = true);

/// Squared distance between two feature matrices, divided by the row count.
double feature_gap_loss(const XMat& f_a, const XMat& f_b);

/// Squared distance between GAP-layer feature vectors, summed over samples and
/// divided by the batch size.
double perceptual_loss(const XMat& x, const XMat& x_hat, const FcnModel& fcn);

struct Stage1TrainResult {
  std::vector<Stage1Losses> history;  // one entry per epoch
  int start_epoch = 0;
};

/// AdamW + cosine schedule training loop. Throws on non-finite losses.
/// `start_epoch`/`opt_state` support exact resume.
Stage1TrainResult train_stage1(Stage1Model& model, const TimeSeriesDataset& ds,
                               const Stage1TrainOptions& opts, const FcnModel* perceptual_fcn = nullptr,
                               int start_epoch = 0, nn::AdamW* external_opt = nullptr,
                               const std::function<void(int, const Stage1Losses&)>& on_epoch = {});

}  // namespace tvq
