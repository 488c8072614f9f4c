#include "tvq/tfr.hpp"

#include <cmath>

namespace tvq {

namespace {

constexpr double kPi = 3.14159265358979323846;

XVec hann_window(int n) {
  XVec w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / n));
  return w;
}

XVec reflect_pad(const XVec& x, int pad) {
  const int n = static_cast<int>(x.size());
  XVec out(n + 2 * pad);
  for (int i = -pad; i < n + pad; ++i) {
    int j = i;
    if (j < 0) j = -j;
    if (j >= n) j = 2 * n - 2 - j;
    out[i + pad] = x[j];
  }
  return out;
}

/// Squared-window overlap envelope over the padded signal.
XVec window_envelope(int padded_len, int frames, const StftConfig& cfg, const XVec& w) {
  XVec den = XVec::Zero(padded_len);
  for (int t = 0; t < frames; ++t)
    for (int n = 0; n < cfg.n_fft; ++n) den[t * cfg.hop + n] += w[n] * w[n];
  return den;
}

}  // namespace

void StftConfig::validate() const {
  if (n_fft < 2) throw ConfigError("stft: n_fft must be >= 2");
  if (hop < 1 || hop > n_fft) throw ConfigError("stft: hop must be in [1, n_fft]");
  if (lf_bins < 1 || lf_bins >= freq_bins()) throw ConfigError("stft: lf_bins must be in [1, n_fft/2]");
}

Grid Spectrogram::to_grid() const {
  Grid g(2, bins(), frames());
  for (int f = 0; f < bins(); ++f)
    for (int t = 0; t < frames(); ++t) {
      g.at(0, f, t) = re(f, t);
      g.at(1, f, t) = im(f, t);
    }
  return g;
}

Spectrogram Spectrogram::from_grid(const Grid& g, int origin_length) {
  Spectrogram u;
  u.re.resize(g.h, g.w);
  u.im.resize(g.h, g.w);
  u.origin_length = origin_length;
  for (int f = 0; f < g.h; ++f)
    for (int t = 0; t < g.w; ++t) {
      u.re(f, t) = g.at(0, f, t);
      u.im(f, t) = g.at(1, f, t);
    }
  return u;
}

int stft_frames(int length, const StftConfig& cfg) { return length / cfg.hop + 1; }

Spectrogram stft(const XVec& x, const StftConfig& cfg) {
  cfg.validate();
  const int L = static_cast<int>(x.size());
  if (L < cfg.n_fft) throw TvqError("stft: series shorter than n_fft");
  const int N = cfg.n_fft;
  const int F = cfg.freq_bins();
  const int W = stft_frames(L, cfg);
  const XVec w = hann_window(N);
  const XVec xp = reflect_pad(x, N / 2);

  Spectrogram u;
  u.re = XMat::Zero(F, W);
  u.im = XMat::Zero(F, W);
  u.origin_length = L;
  for (int t = 0; t < W; ++t) {
    for (int f = 0; f < F; ++f) {
      double sr = 0.0, si = 0.0;
      for (int n = 0; n < N; ++n) {
        const double v = w[n] * xp[t * cfg.hop + n];
        const double th = 2.0 * kPi * f * n / N;
        sr += v * std::cos(th);
        si -= v * std::sin(th);
      }
      u.re(f, t) = sr;
      u.im(f, t) = si;
    }
  }
  return u;
}

XVec istft(const Spectrogram& u, const StftConfig& cfg) {
  cfg.validate();
  const int N = cfg.n_fft;
  const int F = cfg.freq_bins();
  const int W = u.frames();
  const int L = u.origin_length;
  const XVec w = hann_window(N);
  const int padded = L + N;

  XVec acc = XVec::Zero(padded);
  const XVec den = window_envelope(padded, W, cfg, w);
  for (int t = 0; t < W; ++t) {
    for (int n = 0; n < N; ++n) {
      // One-sided inverse DFT of this frame at sample n.
      double y = 0.0;
      for (int f = 0; f < F; ++f) {
        const double cf = (f == 0 || 2 * f == N) ? 1.0 : 2.0;
        const double th = 2.0 * kPi * f * n / N;
        y += cf * (u.re(f, t) * std::cos(th) - u.im(f, t) * std::sin(th));
      }
      const int pos = t * cfg.hop + n;
      if (pos < padded) acc[pos] += w[n] * y / N;
    }
  }
  XVec out(L);
  for (int i = 0; i < L; ++i) {
    const int pos = i + N / 2;
    out[i] = den[pos] > 1e-12 ? acc[pos] / den[pos] : 0.0;
  }
  return out;
}

Spectrogram istft_adjoint(const XVec& grad, int frames, int origin_length, const StftConfig& cfg) {
  cfg.validate();
  const int N = cfg.n_fft;
  const int F = cfg.freq_bins();
  const int L = origin_length;
  const XVec w = hann_window(N);
  const int padded = L + N;
  const XVec den = window_envelope(padded, frames, cfg, w);

  // Scatter grad through the division and overlap-add, then through the
  // per-frame inverse DFT coefficients.
  XVec gacc = XVec::Zero(padded);
  for (int i = 0; i < L; ++i) {
    const int pos = i + N / 2;
    if (den[pos] > 1e-12) gacc[pos] = grad[i] / den[pos];
  }
  Spectrogram gu;
  gu.re = XMat::Zero(F, frames);
  gu.im = XMat::Zero(F, frames);
  gu.origin_length = L;
  for (int t = 0; t < frames; ++t) {
    for (int n = 0; n < N; ++n) {
      const int pos = t * cfg.hop + n;
      if (pos >= padded) continue;
      const double g = gacc[pos] * w[n] / N;
      if (g == 0.0) continue;
      for (int f = 0; f < F; ++f) {
        const double cf = (f == 0 || 2 * f == N) ? 1.0 : 2.0;
        const double th = 2.0 * kPi * f * n / N;
        gu.re(f, t) += g * cf * std::cos(th);
        gu.im(f, t) -= g * cf * std::sin(th);
      }
    }
  }
  return gu;
}

SpectrogramPair band_split(const Spectrogram& u, const StftConfig& cfg) {
  cfg.validate();
  SpectrogramPair p{u, u};
  apply_band_mask(p.u_lf, cfg.lf_bins, true);
  apply_band_mask(p.u_hf, cfg.lf_bins, false);
  return p;
}

void apply_band_mask(Spectrogram& u, int lf_bins, bool keep_lf) {
  const int F = u.bins();
  for (int f = 0; f < F; ++f) {
    const bool in_lf = f < lf_bins;
    if (in_lf != keep_lf) {
      u.re.row(f).setZero();
      u.im.row(f).setZero();
    }
  }
}

void apply_band_mask(Grid& g, int lf_bins, bool keep_lf) {
  for (int f = 0; f < g.h; ++f) {
    const bool in_lf = f < lf_bins;
    if (in_lf != keep_lf)
      for (int c = 0; c < g.c; ++c)
        for (int x = 0; x < g.w; ++x) g.at(c, f, x) = 0.0;
  }
}

XVec length_match(const XVec& y, int target) {
  const int src = static_cast<int>(y.size());
  if (src < 2) throw TvqError("length_match: source must have >= 2 points");
  XVec out(target);
  if (target == 1) {
    out[0] = y[0];
    return out;
  }
  const double scale = static_cast<double>(src - 1) / (target - 1);
  for (int j = 0; j < target; ++j) {
    const double pos = j * scale;
    int i0 = static_cast<int>(pos);
    if (i0 >= src - 1) i0 = src - 2;
    const double f = pos - i0;
    out[j] = (1.0 - f) * y[i0] + f * y[i0 + 1];
  }
  return out;
}

XVec length_match_adjoint(const XVec& grad, int source_len) {
  const int target = static_cast<int>(grad.size());
  XVec out = XVec::Zero(source_len);
  if (target == 1) {
    out[0] = grad[0];
    return out;
  }
  const double scale = static_cast<double>(source_len - 1) / (target - 1);
  for (int j = 0; j < target; ++j) {
    const double pos = j * scale;
    int i0 = static_cast<int>(pos);
    if (i0 >= source_len - 1) i0 = source_len - 2;
    const double f = pos - i0;
    out[i0] += (1.0 - f) * grad[j];
    out[i0 + 1] += f * grad[j];
  }
  return out;
}

}  // namespace tvq
