#pragma once

#include "tvq/prior.hpp"

#include <functional>
#include <optional>

namespace tvq {

/// Masked positions remaining at iteration t of T:
/// ceil(N · cos(pi/2 · t/T)), clamped to 0 at t = T.
int mask_schedule(int t, int T, int n_tokens);

/// Classifier-free guidance mix in logit space: u + alpha · (c − u).
XMat guided_logits(const XMat& logits_uncond, const XMat& logits_cond, double alpha);

/// Model surface used by the decoder: (current tokens, class token) -> logits
/// of shape n_tokens × K. The class token is the ∅ index for unconditional
/// calls.
using LogitsFn = std::function<XMat(const std::vector<int>&, int)>;

struct DecodeOptions {
  int T = 10;
  double guidance_scale = 1.0;
  double temperature0 = 1.0;
  bool greedy = false;  // argmax candidates, no Gumbel perturbation
};

/// Iterative masked decoding of one sequence from all-MASK. Per step:
/// sample a candidate token per masked position, perturb its log-probability
/// confidence with annealed Gumbel noise, and commit the top
/// masked_count(t) − masked_count(t+1) positions. Committed tokens are final.
std::vector<int> decode_pass(const LogitsFn& model, int n_tokens, int mask_id, int null_class,
                             std::optional<int> class_index, const DecodeOptions& opts, Rng& rng);

struct GenerationRequest {
  int n_samples = 1;
  std::optional<int> class_index;
  double guidance_scale = 1.0;
  std::uint64_t seed = 0;
  DecodeOptions decode;       // T, temperature, greedy (guidance_scale above wins)
  bool denormalize = false;   // map back through the stored dataset statistics
};

/// Double-pass generation: decode the LF sequence, then the HF sequence
/// conditioned on it, map tokens through the band decoders, and sum the band
/// reconstructions. Returns n_samples × L.
XMat generate(const GenerationRequest& req, Stage1Model& stage1, PriorSet& priors,
              double norm_mean = 0.0, double norm_std = 1.0);

/// Token sequences produced by the two passes (exposed for tests).
struct DecodedTokens {
  std::vector<int> s_lf, s_hf;
};
DecodedTokens generate_tokens(const GenerationRequest& req, int sample_index, PriorSet& priors);

}  // namespace tvq
