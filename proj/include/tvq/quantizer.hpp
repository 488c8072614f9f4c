#pragma once

#include "tvq/rng.hpp"
#include "tvq/types.hpp"

#include <utility>

namespace tvq {

enum class Band { lf, hf, full };

/// K discrete code vectors with EMA usage statistics.
struct Codebook {
  XMat codes;             // K × d
  XMat ema_cluster_size;  // K × 1
  XMat ema_embed_sum;     // K × d
  double decay = 0.8;
  double beta = 1.0;
  double eps = 1e-5;

  int size() const { return static_cast<int>(codes.rows()); }
  int dim() const { return static_cast<int>(codes.cols()); }

  static Codebook init(int K, int d, Rng& rng, double decay = 0.8, double beta = 1.0);
  void validate() const;
};

/// Grid of codebook indices for one band; flattens row-major
/// (frequency-major, then time).
struct TokenGrid {
  IMat indices;  // H × W
  Band band = Band::lf;

  int h() const { return static_cast<int>(indices.rows()); }
  int w() const { return static_cast<int>(indices.cols()); }
  std::vector<int> flatten() const;
  static TokenGrid unflatten(const std::vector<int>& seq, int h, int w, Band band);
};

/// Squared Euclidean distances from every grid position to every code:
/// K × (H·W), column j in grid row-major order.
XMat code_distances_sq(const Grid& z, const Codebook& cb);

/// Nearest-code assignment (lowest index wins ties). z_q columns are
/// bit-identical copies of codebook rows.
std::pair<Grid, TokenGrid> quantize(const Grid& z, const Codebook& cb, Band band = Band::lf);

/// Straight-through combine: value equals z_q; the backward pass treats
/// quantization as identity, so gradients w.r.t. the output flow to z
/// unchanged (trainers route them accordingly).
Grid straight_through(const Grid& z, const Grid& z_q);

/// Eq.-style codebook learning value over both bands:
/// ||sg[z]-z_q||^2 + beta ||z-sg[z_q]||^2 summed per band.
/// include_codebook_term=false drops the first (EMA-replaced) part.
double codebook_loss(const Grid& z_lf, const Grid& z_hf, const Grid& zq_lf, const Grid& zq_hf,
                     double beta, bool include_codebook_term = true);

/// One EMA step with this step's assignments:
/// size_k <- decay*size_k + (1-decay)*count_k,
/// sum_k  <- decay*sum_k  + (1-decay)*sum of assigned vectors,
/// code_k <- sum_k / (size_k + eps).
void ema_update(Codebook& cb, const Grid& z, const TokenGrid& s);

/// Same decay step applied once with a whole batch's assignments.
void ema_update_batch(Codebook& cb, const GridBatch& z, const std::vector<TokenGrid>& s);

/// Token sampling from softmax(-Euclidean distance) over all codes; with
/// enabled=false this is exactly quantize.
std::pair<Grid, TokenGrid> stochastic_sample(const Grid& z, const Codebook& cb, bool enabled,
                                             Rng& rng, Band band = Band::lf);

/// Sample one token grid from precomputed squared distances (K × positions).
std::vector<int> sample_tokens_from_distances(const XMat& dist_sq, Rng& rng);

/// Argmin tokens from precomputed squared distances.
std::vector<int> argmin_tokens_from_distances(const XMat& dist_sq);

}  // namespace tvq
