#pragma once

#include "tvq/types.hpp"

namespace tvq {

/// Short-time Fourier transform settings. hop defaults to n_fft/4; lf_bins is
/// the count of lowest-frequency rows assigned to the low-frequency band.
struct StftConfig {
  int n_fft = 8;
  int hop = 2;
  int lf_bins = 1;

  int freq_bins() const { return n_fft / 2 + 1; }
  void validate() const;
};

/// One-sided complex spectrogram carried as two real channels.
struct Spectrogram {
  XMat re, im;  // F × W
  int origin_length = 0;

  int bins() const { return static_cast<int>(re.rows()); }
  int frames() const { return static_cast<int>(re.cols()); }
  Grid to_grid() const;
  static Spectrogram from_grid(const Grid& g, int origin_length);
};

/// Complementary zero-padded copies of one source spectrogram.
struct SpectrogramPair {
  Spectrogram u_lf, u_hf;
};

/// Frame count for a series of the given length: floor(L/hop) + 1.
int stft_frames(int length, const StftConfig& cfg);

/// Centered Hann-window STFT with reflect padding. Requires length >= n_fft.
Spectrogram stft(const XVec& x, const StftConfig& cfg);

/// Inverse STFT via overlap-add with squared-window normalization. Returns a
/// series of exactly u.origin_length samples.
XVec istft(const Spectrogram& u, const StftConfig& cfg);

/// Adjoint of istft as a linear map, for gradients flowing from time-domain
/// losses back into spectrogram space.
Spectrogram istft_adjoint(const XVec& grad, int frames, int origin_length, const StftConfig& cfg);

/// Split into LF rows [0, lf_bins) and HF rows [lf_bins, F).
SpectrogramPair band_split(const Spectrogram& u, const StftConfig& cfg);

/// Zero the rows outside the kept band in place (keep_lf ? rows < lf_bins
/// : rows >= lf_bins).
void apply_band_mask(Spectrogram& u, int lf_bins, bool keep_lf);
void apply_band_mask(Grid& g, int lf_bins, bool keep_lf);

/// Linear interpolation of y onto `target` uniformly spaced points with the
/// endpoints aligned (y[0] and y[last] map exactly).
XVec length_match(const XVec& y, int target);

/// Adjoint of length_match for a fixed (source_len, target) geometry.
XVec length_match_adjoint(const XVec& grad, int source_len);

}  // namespace tvq
