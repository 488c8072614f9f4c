#pragma once

#include "tvq/autoencoder.hpp"
#include "tvq/nn.hpp"

#include <memory>
#include <optional>

namespace tvq {

struct PriorConfig {
  int hidden = 256;
  int layers = 4;
  int heads = 2;
  int ff_ratio = 1;
  int vocab = 33;  // K codes + MASK
  int n_classes = 1;
  double p_uncond = 0.2;

  int mask_id() const { return vocab - 1; }
  int null_class() const { return n_classes; }  // the ∅ embedding row

  static PriorConfig small(int K, int n_classes_) {
    PriorConfig c;
    c.hidden = 64;
    c.layers = 2;
    c.vocab = K + 1;
    c.n_classes = n_classes_;
    return c;
  }
  static PriorConfig base(int K, int n_classes_) {
    PriorConfig c;
    c.hidden = 256;
    c.layers = 4;
    c.vocab = K + 1;
    c.n_classes = n_classes_;
    return c;
  }
  void validate() const;
};

/// One masked training view of a token sequence.
struct MaskedBatch {
  std::vector<int> s;        // model input, MASK ids at masked positions
  std::vector<bool> mask;    // true = masked (loss support)
  std::vector<int> target;   // original tokens
  int class_token = 0;       // class index, or n_classes for ∅
};

/// Bidirectional transformer over one band's token sequence. A learned class
/// embedding occupies slot 0; an optional conditioning prefix (the LF
/// sequence for the HF model) is embedded through a separate table, projected,
/// and tagged with a segment embedding. Logits cover only the K code ids.
class BidirectionalPrior {
 public:
  BidirectionalPrior(const PriorConfig& cfg, int n_tokens, int prefix_len, int prefix_vocab,
                     std::uint64_t seed);

  int n_tokens() const { return n_tokens_; }
  int prefix_len() const { return prefix_len_; }
  const PriorConfig& config() const { return cfg_; }

  /// Batched forward: per-sample logits of shape n_tokens × K.
  std::vector<XMat> forward(const std::vector<std::vector<int>>& tokens,
                            const std::vector<int>& class_tokens,
                            const std::vector<std::vector<int>>& prefix_tokens = {});
  /// Single-sample convenience.
  XMat forward_one(const std::vector<int>& tokens, int class_token,
                   const std::vector<int>& prefix_tokens = {});

  /// Backward for the most recent forward batch.
  void backward(const std::vector<XMat>& g_logits);

  void register_state(const std::string& prefix, nn::Registry& r);
  /// Initialize code-token embedding rows from stage-1 code vectors
  /// (zero-padded or truncated to the hidden width); rows stay trainable.
  void init_token_embedding_from_codes(const XMat& codes);

 private:
  PriorConfig cfg_;
  int n_tokens_, prefix_len_, prefix_vocab_;

  XMat tok_emb_, g_tok_emb_;
  XMat pos_emb_, g_pos_emb_;
  XMat cls_emb_, g_cls_emb_;
  XMat lf_emb_, g_lf_emb_;
  XMat seg_emb_, g_seg_emb_;
  std::unique_ptr<nn::Linear> lf_proj_;
  std::vector<std::unique_ptr<nn::TransformerBlock>> blocks_;
  std::unique_ptr<nn::RMSNorm> final_norm_;
  std::unique_ptr<nn::Linear> head_;

  // caches
  std::vector<std::vector<int>> tokens_, prefix_;
  std::vector<int> cls_;
};

/// LF prior plus, for two-band models, an HF prior conditioned on LF tokens.
struct PriorSet {
  PriorConfig cfg;
  std::unique_ptr<BidirectionalPrior> lf;
  std::unique_ptr<BidirectionalPrior> hf;  // null for single-band models

  static PriorSet create(const PriorConfig& cfg, const Stage1Model& stage1, std::uint64_t seed);
  void register_state(nn::Registry& r);
  bool two_band() const { return hf != nullptr; }
};

/// Per-sample squared code distances for each band, the basis for both
/// deterministic and stochastic tokenization.
struct TokenDataset {
  std::vector<XMat> dist;  // [band][sample]: K × n_tokens — flattened as dist[band*N + i]
  int n_bands = 0, n_samples = 0;
  std::vector<int> labels;
  std::vector<int> n_tokens;  // per band

  const XMat& distances(int band, int sample) const { return dist[band * n_samples + sample]; }
};

TokenDataset build_token_dataset(Stage1Model& stage1, const TimeSeriesDataset& ds);

/// Flattened (s_lf, s_hf) per sample; single-band models leave s_hf empty.
/// stochastic=true draws from softmax(-distance), else argmin.
std::vector<std::pair<std::vector<int>, std::vector<int>>> tokenize_dataset(
    Stage1Model& stage1, const TimeSeriesDataset& ds, bool stochastic, Rng& rng);

/// Masked-token count for a draw r in [0,1]: ceil(cos(pi r / 2) · n), at
/// least 1 during training.
int masked_count_for_ratio(double r, int n_tokens);

/// Build one training view: draw the mask size, choose positions, replace
/// with MASK, and draw the class token (∅ with probability p_uncond).
MaskedBatch make_masked_batch(const std::vector<int>& tokens, int label, const PriorConfig& cfg,
                              Rng& rng);

struct PriorTrainOptions {
  int epochs = 10000;
  int batch_size = 256;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  bool stochastic_tokens = true;
  std::uint64_t seed = 0;
};

struct Stage2TrainResult {
  std::vector<double> history;  // mean masked NLL per epoch (LF + HF)
  int start_epoch = 0;
};

/// Masked-token NLL for one model over a batch of views; fills g_logits with
/// the gradient when requested (mean over masked positions).
double masked_nll(const std::vector<XMat>& logits, const std::vector<MaskedBatch>& views,
                  std::vector<XMat>* g_logits);

Stage2TrainResult train_stage2(PriorSet& priors, Stage1Model& stage1, const TimeSeriesDataset& ds,
                               const PriorTrainOptions& opts, int start_epoch = 0,
                               nn::AdamW* external_opt = nullptr,
                               const std::function<void(int, double)>& on_epoch = {});

}  // namespace tvq
