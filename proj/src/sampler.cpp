#include "tvq/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace tvq {

namespace {
constexpr double kPi = 3.14159265358979323846;

double gumbel(Rng& rng) {
  const double u = std::min(std::max(rng.uniform(), 1e-12), 1.0 - 1e-12);
  return -std::log(-std::log(u));
}

XVec log_softmax(const XVec& logits) {
  const double mx = logits.maxCoeff();
  const double lse = std::log((logits.array() - mx).exp().sum()) + mx;
  return logits.array() - lse;
}
}  // namespace

int mask_schedule(int t, int T, int n_tokens) {
  if (t < 0 || t > T) throw TvqError("mask_schedule: t out of range");
  if (t == T) return 0;
  return static_cast<int>(std::ceil(n_tokens * std::cos(kPi / 2.0 * t / T)));
}

XMat guided_logits(const XMat& logits_uncond, const XMat& logits_cond, double alpha) {
  if (logits_uncond.rows() != logits_cond.rows() || logits_uncond.cols() != logits_cond.cols())
    throw TvqError("guided_logits: shape mismatch");
  return logits_uncond + alpha * (logits_cond - logits_uncond);
}

std::vector<int> decode_pass(const LogitsFn& model, int n_tokens, int mask_id, int null_class,
                             std::optional<int> class_index, const DecodeOptions& opts, Rng& rng) {
  std::vector<int> tokens(n_tokens, mask_id);
  const int T = opts.T;
  if (T < 1) throw TvqError("decode_pass: T must be >= 1");

  for (int t = 0; t < T; ++t) {
    const int n_keep = mask_schedule(t, T, n_tokens) - mask_schedule(t + 1, T, n_tokens);
    XMat logits;
    if (class_index.has_value() && opts.guidance_scale != 1.0) {
      const XMat u = model(tokens, null_class);
      const XMat c = model(tokens, *class_index);
      logits = guided_logits(u, c, opts.guidance_scale);
    } else if (class_index.has_value()) {
      logits = model(tokens, *class_index);
    } else {
      logits = model(tokens, null_class);
    }

    const double temperature = opts.temperature0 * (1.0 - static_cast<double>(t + 1) / T);
    struct Candidate {
      int pos;
      int token;
      double confidence;
    };
    std::vector<Candidate> candidates;
    for (int p = 0; p < n_tokens; ++p) {
      if (tokens[p] != mask_id) continue;
      const XVec lp = log_softmax(logits.row(p).transpose());
      int pick;
      if (opts.greedy) {
        lp.maxCoeff(&pick);
      } else {
        const XVec probs = lp.array().exp();
        const double u = rng.uniform();
        double acc = 0.0;
        pick = static_cast<int>(lp.size()) - 1;
        for (int k = 0; k < lp.size(); ++k) {
          acc += probs[k];
          if (u < acc) {
            pick = k;
            break;
          }
        }
      }
      double confidence = lp[pick];
      if (!opts.greedy) confidence += temperature * gumbel(rng);
      candidates.push_back({p, pick, confidence});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.confidence > b.confidence; });
    for (int j = 0; j < n_keep && j < static_cast<int>(candidates.size()); ++j)
      tokens[candidates[j].pos] = candidates[j].token;
  }
  for (int p = 0; p < n_tokens; ++p)
    if (tokens[p] == mask_id) throw TvqError("decode_pass: MASK survived the schedule");
  return tokens;
}

DecodedTokens generate_tokens(const GenerationRequest& req, int sample_index, PriorSet& priors) {
  DecodeOptions opts = req.decode;
  opts.guidance_scale = req.guidance_scale;
  const int mask_id = priors.cfg.mask_id();
  const int null_class = priors.cfg.null_class();
  Rng sample_rng = Rng(req.seed).split("generate", static_cast<std::uint64_t>(sample_index));

  DecodedTokens out;
  Rng lf_rng = sample_rng.split("lf");
  const LogitsFn lf_fn = [&priors](const std::vector<int>& toks, int cls) {
    return priors.lf->forward_one(toks, cls);
  };
  out.s_lf = decode_pass(lf_fn, priors.lf->n_tokens(), mask_id, null_class, req.class_index, opts,
                         lf_rng);
  if (priors.two_band()) {
    Rng hf_rng = sample_rng.split("hf");
    const std::vector<int>& s_lf = out.s_lf;
    const LogitsFn hf_fn = [&priors, &s_lf](const std::vector<int>& toks, int cls) {
      return priors.hf->forward_one(toks, cls, s_lf);
    };
    out.s_hf = decode_pass(hf_fn, priors.hf->n_tokens(), mask_id, null_class, req.class_index, opts,
                           hf_rng);
  }
  return out;
}

XMat generate(const GenerationRequest& req, Stage1Model& stage1, PriorSet& priors, double norm_mean,
              double norm_std) {
  if (req.n_samples < 1) throw TvqError("generate: n_samples must be >= 1");
  if (req.class_index.has_value() &&
      (*req.class_index < 0 || *req.class_index >= priors.cfg.n_classes))
    throw TvqError("generate: class index out of range");
  stage1.set_train(false);

  XMat out(req.n_samples, stage1.series_length());
  for (int i = 0; i < req.n_samples; ++i) {
    const DecodedTokens toks = generate_tokens(req, i, priors);
    const TokenGrid lf_grid =
        TokenGrid::unflatten(toks.s_lf, stage1.token_rows(0), stage1.token_cols(0),
                             stage1.n_bands() == 2 ? Band::lf : Band::full);
    XVec x = stage1.decode_tokens(0, lf_grid).second;
    if (priors.two_band()) {
      const TokenGrid hf_grid =
          TokenGrid::unflatten(toks.s_hf, stage1.token_rows(1), stage1.token_cols(1), Band::hf);
      x += stage1.decode_tokens(1, hf_grid).second;
    }
    out.row(i) = x.transpose();
  }
  if (!out.allFinite()) throw TvqError("generate: non-finite samples");
  if (req.denormalize) out = denormalize(out, norm_mean, norm_std);
  return out;
}

}  // namespace tvq
