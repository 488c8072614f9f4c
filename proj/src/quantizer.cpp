#include "tvq/quantizer.hpp"

#include <cmath>

namespace tvq {

Codebook Codebook::init(int K, int d, Rng& rng, double decay, double beta) {
  Codebook cb;
  cb.codes.resize(K, d);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < d; ++j) cb.codes(k, j) = rng.normal();
  cb.ema_cluster_size = XMat::Ones(K, 1);
  cb.ema_embed_sum = cb.codes;
  cb.decay = decay;
  cb.beta = beta;
  return cb;
}

void Codebook::validate() const {
  if (size() < 1) throw ConfigError("codebook: K must be >= 1");
  if (decay <= 0.0 || decay >= 1.0) throw ConfigError("codebook: decay must be in (0,1)");
  if (!codes.allFinite()) throw TvqError("codebook: non-finite codes");
}

std::vector<int> TokenGrid::flatten() const {
  std::vector<int> seq;
  seq.reserve(indices.size());
  for (int i = 0; i < indices.rows(); ++i)
    for (int j = 0; j < indices.cols(); ++j) seq.push_back(indices(i, j));
  return seq;
}

TokenGrid TokenGrid::unflatten(const std::vector<int>& seq, int h, int w, Band band) {
  if (static_cast<int>(seq.size()) != h * w) throw TvqError("TokenGrid: sequence length mismatch");
  TokenGrid g;
  g.indices.resize(h, w);
  g.band = band;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) g.indices(i, j) = seq[i * w + j];
  return g;
}

XMat code_distances_sq(const Grid& z, const Codebook& cb) {
  if (z.c != cb.dim()) throw TvqError("quantize: code dimension mismatch");
  // z.m is d × (h·w); columns are positions in grid row-major order.
  const XVec cn = cb.codes.rowwise().squaredNorm();
  const XVec zn = z.m.colwise().squaredNorm().transpose();
  XMat d = -2.0 * (cb.codes * z.m);
  d.colwise() += cn;
  d.rowwise() += zn.transpose();
  return d.cwiseMax(0.0);
}

namespace {

std::pair<Grid, TokenGrid> lookup(const Grid& z, const Codebook& cb, const std::vector<int>& tokens,
                                  Band band) {
  Grid zq(z.c, z.h, z.w);
  TokenGrid s = TokenGrid::unflatten(tokens, z.h, z.w, band);
  for (int j = 0; j < static_cast<int>(tokens.size()); ++j)
    zq.m.col(j) = cb.codes.row(tokens[j]).transpose();
  return {std::move(zq), std::move(s)};
}

}  // namespace

std::vector<int> argmin_tokens_from_distances(const XMat& dist_sq) {
  std::vector<int> tokens(dist_sq.cols());
  for (int j = 0; j < dist_sq.cols(); ++j) {
    int best = 0;
    double bd = dist_sq(0, j);
    for (int k = 1; k < dist_sq.rows(); ++k)
      if (dist_sq(k, j) < bd) {
        bd = dist_sq(k, j);
        best = k;
      }
    tokens[j] = best;
  }
  return tokens;
}

std::vector<int> sample_tokens_from_distances(const XMat& dist_sq, Rng& rng) {
  std::vector<int> tokens(dist_sq.cols());
  const int K = static_cast<int>(dist_sq.rows());
  XVec logits(K), p(K);
  for (int j = 0; j < dist_sq.cols(); ++j) {
    for (int k = 0; k < K; ++k) logits[k] = -std::sqrt(dist_sq(k, j));
    const double mx = logits.maxCoeff();
    p = (logits.array() - mx).exp();
    p /= p.sum();
    double u = rng.uniform();
    int pick = K - 1;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += p[k];
      if (u < acc) {
        pick = k;
        break;
      }
    }
    tokens[j] = pick;
  }
  return tokens;
}

std::pair<Grid, TokenGrid> quantize(const Grid& z, const Codebook& cb, Band band) {
  const XMat d = code_distances_sq(z, cb);
  return lookup(z, cb, argmin_tokens_from_distances(d), band);
}

Grid straight_through(const Grid& z, const Grid& z_q) {
  if (!z.same_shape(z_q)) throw TvqError("straight_through: shape mismatch");
  return z_q;
}

double codebook_loss(const Grid& z_lf, const Grid& z_hf, const Grid& zq_lf, const Grid& zq_hf,
                     double beta, bool include_codebook_term) {
  if (!z_lf.same_shape(zq_lf) || !z_hf.same_shape(zq_hf))
    throw TvqError("codebook_loss: shape mismatch");
  const double d_lf = (z_lf.m - zq_lf.m).squaredNorm();
  const double d_hf = (z_hf.m - zq_hf.m).squaredNorm();
  double loss = beta * (d_lf + d_hf);
  if (include_codebook_term) loss += d_lf + d_hf;
  return loss;
}

void ema_update_batch(Codebook& cb, const GridBatch& z, const std::vector<TokenGrid>& s) {
  const int K = cb.size();
  XVec counts = XVec::Zero(K);
  XMat sums = XMat::Zero(K, cb.dim());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const std::vector<int> tokens = s[i].flatten();
    for (int j = 0; j < static_cast<int>(tokens.size()); ++j) {
      counts[tokens[j]] += 1.0;
      sums.row(tokens[j]) += z[i].m.col(j).transpose();
    }
  }
  cb.ema_cluster_size.col(0) = cb.decay * cb.ema_cluster_size.col(0) + (1.0 - cb.decay) * counts;
  cb.ema_embed_sum = cb.decay * cb.ema_embed_sum + (1.0 - cb.decay) * sums;
  for (int k = 0; k < K; ++k)
    cb.codes.row(k) = cb.ema_embed_sum.row(k) / (cb.ema_cluster_size(k, 0) + cb.eps);
}

void ema_update(Codebook& cb, const Grid& z, const TokenGrid& s) {
  ema_update_batch(cb, {z}, {s});
}

std::pair<Grid, TokenGrid> stochastic_sample(const Grid& z, const Codebook& cb, bool enabled,
                                             Rng& rng, Band band) {
  if (!enabled) return quantize(z, cb, band);
  const XMat d = code_distances_sq(z, cb);
  return lookup(z, cb, sample_tokens_from_distances(d, rng), band);
}

}  // namespace tvq
