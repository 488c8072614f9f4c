#include "tvq/autoencoder.hpp"

#include "tvq/fcnmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tvq {

int downsample_count(int width, int target_width) {
  if (width < 2) throw TvqError("encoder: input width must be >= 2");
  if (target_width < 1) throw ConfigError("encoder: target_width must be >= 1");
  int n = static_cast<int>(
      std::lround(std::log2(static_cast<double>(width) / static_cast<double>(target_width))));
  n = std::max(0, n);
  // Every downsampling block must see a width of at least 2.
  int w = width, feasible = 0;
  while (feasible < n && w >= 2) {
    w = nn::conv_out_size(w, 4, 2, 1);
    ++feasible;
  }
  return feasible;
}

namespace {

std::string band_name(BandMode mode) {
  switch (mode) {
    case BandMode::lf: return "lf";
    case BandMode::hf: return "hf";
    case BandMode::full_tf: return "full";
    case BandMode::raw_time: return "raw";
  }
  return "band";
}

}  // namespace

// ----------------------------------------------------- SpectrogramEncoder ---

SpectrogramEncoder::SpectrogramEncoder(const EncDecConfig& cfg, int input_width, Rng& rng) {
  n_down_ = downsample_count(input_width, cfg.target_width);
  const int kh = cfg.kernel_h;
  const int ph = kh / 2;
  if (n_down_ == 0) {
    net_.add(std::make_unique<nn::Conv2d>(cfg.in_channels, cfg.hidden_dim, 1, 1, 1, 1, 0, 0, rng));
  } else {
    for (int i = 0; i < n_down_; ++i) {
      const int cin = i == 0 ? cfg.in_channels : cfg.hidden_dim;
      net_.add(std::make_unique<nn::Conv2d>(cin, cfg.hidden_dim, kh, 4, 1, 2, ph, 1, rng));
      net_.add(std::make_unique<nn::BatchNorm2d>(cfg.hidden_dim));
      net_.add(std::make_unique<nn::LeakyReLU>(cfg.leaky_slope));
    }
  }
  for (int i = 0; i < cfg.n_resblocks; ++i)
    net_.add(std::make_unique<nn::ResBlock2d>(cfg.hidden_dim, kh, cfg.leaky_slope, rng));
  // 1×1 projection to the code dimension (equal to hidden_dim).
  net_.add(std::make_unique<nn::Conv2d>(cfg.hidden_dim, cfg.hidden_dim, 1, 1, 1, 1, 0, 0, rng));
}

GridBatch SpectrogramEncoder::forward(const GridBatch& u) {
  for (const auto& g : u)
    if (g.w < 2) throw TvqError("encoder: input width must be >= 2");
  return net_.forward(u);
}

GridBatch SpectrogramEncoder::backward(const GridBatch& gz) { return net_.backward(gz); }

void SpectrogramEncoder::register_state(const std::string& prefix, nn::Registry& r) {
  net_.register_state(prefix, r);
}

int SpectrogramEncoder::output_width(int input_width) const {
  int w = input_width;
  for (int i = 0; i < n_down_; ++i) w = nn::conv_out_size(w, 4, 2, 1);
  return w;
}

// ----------------------------------------------------- SpectrogramDecoder ---

SpectrogramDecoder::SpectrogramDecoder(const EncDecConfig& cfg, int n_down, Rng& rng) {
  const int kh = cfg.kernel_h;
  const int ph = kh / 2;
  net_.add(std::make_unique<nn::Conv2d>(cfg.hidden_dim, cfg.hidden_dim, 1, 1, 1, 1, 0, 0, rng));
  for (int i = 0; i < cfg.n_resblocks; ++i)
    net_.add(std::make_unique<nn::ResBlock2d>(cfg.hidden_dim, kh, cfg.leaky_slope, rng));
  for (int i = 0; i < n_down; ++i) {
    net_.add(std::make_unique<nn::ConvT2d>(cfg.hidden_dim, cfg.hidden_dim, kh, 4, 1, 2, ph, 1, rng));
    net_.add(std::make_unique<nn::BatchNorm2d>(cfg.hidden_dim));
    net_.add(std::make_unique<nn::LeakyReLU>(cfg.leaky_slope));
  }
  // Extra upsampling layer; linear interpolation restores the exact width.
  net_.add(std::make_unique<nn::ConvT2d>(cfg.hidden_dim, cfg.in_channels, kh, 4, 1, 2, ph, 1, rng));
}

GridBatch SpectrogramDecoder::forward(const GridBatch& zq) { return net_.forward(zq); }
GridBatch SpectrogramDecoder::backward(const GridBatch& gy) { return net_.backward(gy); }

void SpectrogramDecoder::register_state(const std::string& prefix, nn::Registry& r) {
  net_.register_state(prefix, r);
}

// ----------------------------------------------------------- length match ---

Grid grid_length_match(const Grid& g, int target_w) {
  Grid out(g.c, g.h, target_w);
  XVec row(g.w);
  for (int c = 0; c < g.c; ++c)
    for (int y = 0; y < g.h; ++y) {
      row = g.m.row(c).segment(y * g.w, g.w).transpose();
      out.m.row(c).segment(y * target_w, target_w) = length_match(row, target_w).transpose();
    }
  return out;
}

Grid grid_length_match_adjoint(const Grid& gy, int source_w) {
  Grid out(gy.c, gy.h, source_w);
  XVec row(gy.w);
  for (int c = 0; c < gy.c; ++c)
    for (int y = 0; y < gy.h; ++y) {
      row = gy.m.row(c).segment(y * gy.w, gy.w).transpose();
      out.m.row(c).segment(y * source_w, source_w) =
          length_match_adjoint(row, source_w).transpose();
    }
  return out;
}

// ------------------------------------------------------------ Stage1Model ---

Stage1Model::Stage1Model(const Stage1Config& cfg, int series_length, std::uint64_t seed)
    : cfg_(cfg), series_length_(series_length) {
  if (cfg.naive_time && cfg.band_separation)
    throw ConfigError("stage1: naive_vqvae requires band_separation off");
  cfg_.stft.validate();

  std::vector<BandMode> modes;
  if (cfg.naive_time)
    modes = {BandMode::raw_time};
  else if (cfg.band_separation)
    modes = {BandMode::lf, BandMode::hf};
  else
    modes = {BandMode::full_tf};

  Rng root(seed);
  for (BandMode mode : modes) {
    BandNet band;
    band.mode = mode;
    band.cfg = mode == BandMode::hf ? cfg_.hf : cfg_.lf;
    if (mode == BandMode::raw_time) {
      band.cfg.in_channels = 1;
      band.cfg.kernel_h = 1;
      band.freq_bins = 1;
      band.frames = series_length;
    } else {
      band.cfg.in_channels = 2;
      band.freq_bins = cfg_.stft.freq_bins();
      band.frames = stft_frames(series_length, cfg_.stft);
    }
    Rng rng = root.split("stage1." + band_name(mode));
    band.enc = std::make_unique<SpectrogramEncoder>(band.cfg, band.frames, rng);
    band.dec = std::make_unique<SpectrogramDecoder>(band.cfg, band.enc->n_down(), rng);
    band.latent_width = band.enc->output_width(band.frames);
    Rng cb_rng = root.split("stage1.codebook." + band_name(mode));
    band.cb = Codebook::init(cfg_.codebook_size, band.cfg.hidden_dim, cb_rng, cfg_.ema_decay, cfg_.beta);
    bands_.push_back(std::move(band));
  }
  g_codes_.resize(bands_.size());
  for (std::size_t b = 0; b < bands_.size(); ++b)
    g_codes_[b] = XMat::Zero(cfg_.codebook_size, bands_[b].cfg.hidden_dim);
}

void Stage1Model::set_train(bool train) {
  for (auto& b : bands_) {
    b.enc->set_train(train);
    b.dec->set_train(train);
  }
}

void Stage1Model::register_state(nn::Registry& r) {
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    auto& b = bands_[i];
    const std::string p = band_name(b.mode);
    b.enc->register_state(p + ".enc", r);
    b.dec->register_state(p + ".dec", r);
    if (cfg_.use_ema)
      r.add_buffer(p + ".codebook.codes", &b.cb.codes);
    else
      r.add(p + ".codebook.codes", &b.cb.codes, &g_codes_[i]);
    r.add_buffer(p + ".codebook.ema_cluster_size", &b.cb.ema_cluster_size);
    r.add_buffer(p + ".codebook.ema_embed_sum", &b.cb.ema_embed_sum);
  }
}

Grid Stage1Model::input_grid(const BandNet& band, const XVec& x) const {
  if (band.mode == BandMode::raw_time) {
    Grid g(1, 1, static_cast<int>(x.size()));
    g.m.row(0) = x.transpose();
    return g;
  }
  Spectrogram sp = stft(x, cfg_.stft);
  if (band.mode == BandMode::lf)
    apply_band_mask(sp, cfg_.stft.lf_bins, true);
  else if (band.mode == BandMode::hf)
    apply_band_mask(sp, cfg_.stft.lf_bins, false);
  return sp.to_grid();
}

XVec Stage1Model::band_series(const BandNet& band, const Grid& u) const {
  if (band.mode == BandMode::raw_time) return u.m.row(0).transpose();
  return istft(Spectrogram::from_grid(u, series_length_), cfg_.stft);
}

Stage1Data Stage1Model::prepare(const TimeSeriesDataset& ds) const {
  if (ds.length() != series_length_) throw TvqError("stage1: dataset length mismatch");
  Stage1Data data;
  data.series_length = series_length_;
  data.u.resize(bands_.size());
  data.x.resize(bands_.size());
  data.x_orig.reserve(ds.n());
  for (int i = 0; i < ds.n(); ++i) data.x_orig.push_back(ds.samples.row(i).transpose());
  for (std::size_t b = 0; b < bands_.size(); ++b) {
    data.u[b].reserve(ds.n());
    data.x[b].reserve(ds.n());
    for (int i = 0; i < ds.n(); ++i) {
      Grid u = input_grid(bands_[b], data.x_orig[i]);
      data.x[b].push_back(band_series(bands_[b], u));
      data.u[b].push_back(std::move(u));
    }
  }
  return data;
}

Grid Stage1Model::encode_one(int band, const Grid& u) {
  GridBatch out = bands_[band].enc->forward({u});
  return out[0];
}

XMat Stage1Model::token_distances(int band, const Grid& u) {
  return code_distances_sq(encode_one(band, u), bands_[band].cb);
}

std::pair<Spectrogram, XVec> Stage1Model::decode_tokens(int band, const TokenGrid& tokens) {
  BandNet& bn = bands_[band];
  if (tokens.h() != bn.freq_bins || tokens.w() != bn.latent_width)
    throw TvqError("decode_tokens: token grid shape mismatch");
  Grid zq(bn.cfg.hidden_dim, tokens.h(), tokens.w());
  const std::vector<int> seq = tokens.flatten();
  for (std::size_t j = 0; j < seq.size(); ++j) {
    if (seq[j] < 0 || seq[j] >= bn.cb.size()) throw TvqError("decode_tokens: token out of range");
    zq.m.col(j) = bn.cb.codes.row(seq[j]).transpose();
  }
  GridBatch d = bn.dec->forward({zq});
  Grid u_hat = grid_length_match(d[0], bn.frames);
  if (bn.mode == BandMode::raw_time) {
    Spectrogram sp;
    sp.re = u_hat.m;
    sp.im = XMat::Zero(1, u_hat.w);
    sp.origin_length = series_length_;
    return {sp, u_hat.m.row(0).transpose()};
  }
  if (bn.mode == BandMode::lf) apply_band_mask(u_hat, cfg_.stft.lf_bins, true);
  if (bn.mode == BandMode::hf) apply_band_mask(u_hat, cfg_.stft.lf_bins, false);
  Spectrogram sp = Spectrogram::from_grid(u_hat, series_length_);
  return {sp, istft(sp, cfg_.stft)};
}

Stage1Losses Stage1Model::train_step(const Stage1Data& data, const std::vector<int>& batch,
                                     bool compute_grads, const FcnModel* perceptual_fcn) {
  const int B = static_cast<int>(batch.size());
  const double invB = 1.0 / B;
  set_train(compute_grads);

  struct BandCache {
    GridBatch u, z, zq, d_out, u_hat;
    std::vector<TokenGrid> s;
    std::vector<XVec> x_band, x_hat;
  };
  std::vector<BandCache> caches(bands_.size());
  Stage1Losses losses;

  // Forward.
  for (std::size_t b = 0; b < bands_.size(); ++b) {
    BandNet& bn = bands_[b];
    BandCache& c = caches[b];
    c.u.reserve(B);
    c.x_band.reserve(B);
    for (int idx : batch) {
      c.u.push_back(data.u[b][idx]);
      c.x_band.push_back(data.x[b][idx]);
    }
    c.z = bn.enc->forward(c.u);
    c.zq.resize(B);
    c.s.resize(B);
    for (int i = 0; i < B; ++i) {
      auto [zq, s] = quantize(c.z[i], bn.cb, bn.mode == BandMode::hf ? Band::hf : Band::lf);
      c.zq[i] = std::move(zq);
      c.s[i] = std::move(s);
    }
    c.d_out = bn.dec->forward(c.zq);
    c.u_hat.resize(B);
    c.x_hat.resize(B);
    for (int i = 0; i < B; ++i) {
      Grid uh = grid_length_match(c.d_out[i], bn.frames);
      if (bn.mode == BandMode::lf) apply_band_mask(uh, cfg_.stft.lf_bins, true);
      if (bn.mode == BandMode::hf) apply_band_mask(uh, cfg_.stft.lf_bins, false);
      if (bn.mode == BandMode::raw_time)
        c.x_hat[i] = uh.m.row(0).transpose();
      else
        c.x_hat[i] = istft(Spectrogram::from_grid(uh, series_length_), cfg_.stft);
      c.u_hat[i] = std::move(uh);
    }

    // Losses for this band.
    double time_term = 0.0, tf_term = 0.0, commit = 0.0;
    const bool literal_hf = bn.mode == BandMode::hf && !cfg_.hf_time_squared;
    for (int i = 0; i < B; ++i) {
      const double sq = (c.x_hat[i] - c.x_band[i]).squaredNorm();
      time_term += literal_hf ? std::sqrt(sq) : sq;
      if (bn.mode != BandMode::raw_time) tf_term += (c.u_hat[i].m - c.u[i].m).squaredNorm();
      commit += (c.z[i].m - c.zq[i].m).squaredNorm();
    }
    time_term *= invB;
    tf_term *= invB;
    commit *= invB;
    if (bn.mode == BandMode::hf) {
      losses.recons_time_hf = time_term;
      losses.recons_tf_hf = tf_term;
    } else {
      losses.recons_time_lf = time_term;
      losses.recons_tf_lf = tf_term;
    }
    // Commitment always contributes; the codebook term is carried by the EMA
    // rule when enabled and by the loss value otherwise.
    losses.codebook += cfg_.beta * commit + (cfg_.use_ema ? 0.0 : commit);
  }

  // Perceptual term on the summed reconstruction.
  XMat g_x_perc;
  if (cfg_.perceptual) {
    if (perceptual_fcn == nullptr)
      throw ConfigError("stage1: perceptual loss enabled but no pretrained FCN provided");
    XMat x_real(B, series_length_), x_rec(B, series_length_);
    for (int i = 0; i < B; ++i) {
      x_real.row(i) = data.x_orig[batch[i]].transpose();
      XVec sum = XVec::Zero(series_length_);
      for (auto& c : caches) sum += c.x_hat[i];
      x_rec.row(i) = sum.transpose();
    }
    const XMat f_real = perceptual_fcn->features(x_real);
    FcnModel* fcn = const_cast<FcnModel*>(perceptual_fcn);
    const XMat f_rec = fcn->features_cached(x_rec);
    losses.perceptual = (f_rec - f_real).squaredNorm() * invB;
    if (compute_grads) g_x_perc = fcn->features_backward(2.0 * invB * (f_rec - f_real));
  }

  losses.total = losses.codebook + losses.recons_time_lf + losses.recons_time_hf +
                 losses.recons_tf_lf + losses.recons_tf_hf + losses.perceptual;

  if (!compute_grads) return losses;

  // Backward.
  for (std::size_t b = 0; b < bands_.size(); ++b) {
    BandNet& bn = bands_[b];
    BandCache& c = caches[b];
    const bool literal_hf = bn.mode == BandMode::hf && !cfg_.hf_time_squared;
    GridBatch g_dec(B);
    for (int i = 0; i < B; ++i) {
      // Time-domain gradient.
      XVec g_x;
      if (literal_hf) {
        const XVec diff = c.x_hat[i] - c.x_band[i];
        const double nrm = diff.norm();
        g_x = nrm > 1e-12 ? XVec((invB / nrm) * diff) : XVec(XVec::Zero(diff.size()));
      } else {
        g_x = 2.0 * invB * (c.x_hat[i] - c.x_band[i]);
      }
      if (g_x_perc.size() > 0) g_x += g_x_perc.row(i).transpose();

      Grid g_uhat(c.u_hat[i].c, c.u_hat[i].h, c.u_hat[i].w);
      if (bn.mode == BandMode::raw_time) {
        g_uhat.m.row(0) = g_x.transpose();
      } else {
        g_uhat.m = 2.0 * invB * (c.u_hat[i].m - c.u[i].m);
        const Spectrogram gsp =
            istft_adjoint(g_x, bn.frames, series_length_, cfg_.stft);
        g_uhat.m += gsp.to_grid().m;
        if (bn.mode == BandMode::lf) apply_band_mask(g_uhat, cfg_.stft.lf_bins, true);
        if (bn.mode == BandMode::hf) apply_band_mask(g_uhat, cfg_.stft.lf_bins, false);
      }
      g_dec[i] = grid_length_match_adjoint(g_uhat, c.d_out[i].w);
    }
    GridBatch g_zst = bn.dec->backward(g_dec);
    // Straight-through to the encoder plus the commitment gradient.
    for (int i = 0; i < B; ++i)
      g_zst[i].m += 2.0 * cfg_.beta * invB * (c.z[i].m - c.zq[i].m);
    bn.enc->backward(g_zst);

    if (cfg_.use_ema) {
      ema_update_batch(bn.cb, c.z, c.s);
    } else {
      for (int i = 0; i < B; ++i) {
        const std::vector<int> seq = c.s[i].flatten();
        for (std::size_t j = 0; j < seq.size(); ++j)
          g_codes_[b].row(seq[j]) +=
              2.0 * invB * (c.zq[i].m.col(j) - c.z[i].m.col(j)).transpose();
      }
    }
  }
  return losses;
}

ReconsTerms reconstruction_terms(const XVec& x_lf, const XVec& xhat_lf, const XVec& x_hf,
                                 const XVec& xhat_hf, const Grid& u_lf, const Grid& uhat_lf,
                                 const Grid& u_hf, const Grid& uhat_hf, bool hf_time_squared) {
  ReconsTerms t;
  t.time_lf = (x_lf - xhat_lf).squaredNorm();
  const double hf_sq = (x_hf - xhat_hf).squaredNorm();
  t.time_hf = hf_time_squared ? hf_sq : std::sqrt(hf_sq);
  t.tf_lf = (u_lf.m - uhat_lf.m).squaredNorm();
  t.tf_hf = (u_hf.m - uhat_hf.m).squaredNorm();
  return t;
}

double reconstruction_loss(const XVec& x_lf, const XVec& xhat_lf, const XVec& x_hf,
                           const XVec& xhat_hf, const Grid& u_lf, const Grid& uhat_lf,
                           const Grid& u_hf, const Grid& uhat_hf, bool hf_time_squared) {
  return reconstruction_terms(x_lf, xhat_lf, x_hf, xhat_hf, u_lf, uhat_lf, u_hf, uhat_hf,
                              hf_time_squared)
      .total();
}

double feature_gap_loss(const XMat& f_a, const XMat& f_b) {
  if (f_a.rows() != f_b.rows() || f_a.cols() != f_b.cols())
    throw TvqError("feature_gap_loss: shape mismatch");
  return (f_a - f_b).squaredNorm() / static_cast<double>(f_a.rows());
}

double perceptual_loss(const XMat& x, const XMat& x_hat, const FcnModel& fcn) {
  return feature_gap_loss(fcn.features(x), fcn.features(x_hat));
}

Stage1TrainResult train_stage1(Stage1Model& model, const TimeSeriesDataset& ds,
                               const Stage1TrainOptions& opts, const FcnModel* perceptual_fcn,
                               int start_epoch, nn::AdamW* external_opt,
                               const std::function<void(int, const Stage1Losses&)>& on_epoch) {
  if (!ds.normalized) throw TvqError("train_stage1: dataset must be normalized");
  const Stage1Data data = model.prepare(ds);
  nn::Registry reg;
  model.register_state(reg);
  std::unique_ptr<nn::AdamW> local;
  nn::AdamW* opt = external_opt;
  if (opt == nullptr) {
    local = std::make_unique<nn::AdamW>(reg.params, opts.weight_decay);
    opt = local.get();
  }
  Rng root(opts.seed);

  Stage1TrainResult result;
  result.start_epoch = start_epoch;
  for (int epoch = start_epoch; epoch < opts.epochs; ++epoch) {
    const double lr = nn::cosine_lr(opts.lr, epoch, opts.epochs);
    Rng shuffle_rng = root.split("stage1.shuffle", epoch);
    std::vector<int> order(ds.n());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    Stage1Losses epoch_losses;
    int seen = 0;
    for (int pos = 0; pos < ds.n(); pos += opts.batch_size) {
      const int b = std::min(opts.batch_size, ds.n() - pos);
      std::vector<int> batch(order.begin() + pos, order.begin() + pos + b);
      reg.zero_grads();
      const Stage1Losses l = model.train_step(data, batch, true, perceptual_fcn);
      if (!std::isfinite(l.total))
        throw TvqError("train_stage1: non-finite loss at epoch " + std::to_string(epoch) +
                       " (codebook=" + std::to_string(l.codebook) +
                       ", time_lf=" + std::to_string(l.recons_time_lf) +
                       ", time_hf=" + std::to_string(l.recons_time_hf) + ")");
      opt->step(lr);
      epoch_losses.recons_time_lf += l.recons_time_lf * b;
      epoch_losses.recons_time_hf += l.recons_time_hf * b;
      epoch_losses.recons_tf_lf += l.recons_tf_lf * b;
      epoch_losses.recons_tf_hf += l.recons_tf_hf * b;
      epoch_losses.codebook += l.codebook * b;
      epoch_losses.perceptual += l.perceptual * b;
      seen += b;
    }
    const double inv = 1.0 / seen;
    epoch_losses.recons_time_lf *= inv;
    epoch_losses.recons_time_hf *= inv;
    epoch_losses.recons_tf_lf *= inv;
    epoch_losses.recons_tf_hf *= inv;
    epoch_losses.codebook *= inv;
    epoch_losses.perceptual *= inv;
    epoch_losses.total = epoch_losses.codebook + epoch_losses.recons_time_lf +
                         epoch_losses.recons_time_hf + epoch_losses.recons_tf_lf +
                         epoch_losses.recons_tf_hf + epoch_losses.perceptual;
    result.history.push_back(epoch_losses);
    if (on_epoch) on_epoch(epoch, epoch_losses);
  }
  return result;
}

}  // namespace tvq
