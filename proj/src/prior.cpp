#include "tvq/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tvq {

namespace {
constexpr double kPi = 3.14159265358979323846;

void init_normal(XMat& m, double sd, Rng& rng) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = sd * rng.normal();
}
}  // namespace

void PriorConfig::validate() const {
  if (hidden % heads != 0) throw ConfigError("prior: hidden must be divisible by heads");
  if (vocab < 2) throw ConfigError("prior: vocab must be >= 2");
  if (p_uncond < 0.0 || p_uncond > 1.0) throw ConfigError("prior: p_uncond must be in [0,1]");
}

BidirectionalPrior::BidirectionalPrior(const PriorConfig& cfg, int n_tokens, int prefix_len,
                                       int prefix_vocab, std::uint64_t seed)
    : cfg_(cfg), n_tokens_(n_tokens), prefix_len_(prefix_len), prefix_vocab_(prefix_vocab) {
  cfg_.validate();
  Rng rng = Rng(seed).split("prior");
  const int slots = 1 + prefix_len + n_tokens;
  tok_emb_.resize(cfg.vocab, cfg.hidden);
  pos_emb_.resize(slots, cfg.hidden);
  cls_emb_.resize(cfg.n_classes + 1, cfg.hidden);
  init_normal(tok_emb_, 0.02, rng);
  init_normal(pos_emb_, 0.02, rng);
  init_normal(cls_emb_, 0.02, rng);
  g_tok_emb_ = XMat::Zero(tok_emb_.rows(), tok_emb_.cols());
  g_pos_emb_ = XMat::Zero(pos_emb_.rows(), pos_emb_.cols());
  g_cls_emb_ = XMat::Zero(cls_emb_.rows(), cls_emb_.cols());
  if (prefix_len > 0) {
    lf_emb_.resize(prefix_vocab, cfg.hidden);
    seg_emb_.resize(2, cfg.hidden);
    init_normal(lf_emb_, 0.02, rng);
    init_normal(seg_emb_, 0.02, rng);
    g_lf_emb_ = XMat::Zero(lf_emb_.rows(), lf_emb_.cols());
    g_seg_emb_ = XMat::Zero(seg_emb_.rows(), seg_emb_.cols());
    lf_proj_ = std::make_unique<nn::Linear>(cfg.hidden, cfg.hidden, rng);
  }
  for (int l = 0; l < cfg.layers; ++l)
    blocks_.push_back(std::make_unique<nn::TransformerBlock>(cfg.hidden, cfg.heads, cfg.ff_ratio, rng));
  final_norm_ = std::make_unique<nn::RMSNorm>(cfg.hidden);
  // Zero-init head: an untrained prior is exactly uniform over the K codes.
  head_ = std::make_unique<nn::Linear>(cfg.hidden, cfg.vocab - 1, rng, /*zero_init=*/true);
}

std::vector<XMat> BidirectionalPrior::forward(const std::vector<std::vector<int>>& tokens,
                                              const std::vector<int>& class_tokens,
                                              const std::vector<std::vector<int>>& prefix_tokens) {
  const int B = static_cast<int>(tokens.size());
  const int slots = 1 + prefix_len_ + n_tokens_;
  tokens_ = tokens;
  cls_ = class_tokens;
  prefix_ = prefix_tokens;

  nn::SeqBatch x(B);
  nn::SeqBatch prefix_in(prefix_len_ > 0 ? B : 0);
  for (int i = 0; i < B; ++i) {
    if (static_cast<int>(tokens[i].size()) != n_tokens_)
      throw TvqError("prior: token sequence length mismatch");
    if (class_tokens[i] < 0 || class_tokens[i] > cfg_.n_classes)
      throw TvqError("prior: class token out of range");
    x[i].resize(slots, cfg_.hidden);
    x[i].row(0) = cls_emb_.row(class_tokens[i]);
    if (prefix_len_ > 0) {
      if (static_cast<int>(prefix_tokens[i].size()) != prefix_len_)
        throw TvqError("prior: prefix length mismatch");
      prefix_in[i].resize(prefix_len_, cfg_.hidden);
      for (int p = 0; p < prefix_len_; ++p) {
        const int t = prefix_tokens[i][p];
        if (t < 0 || t >= prefix_vocab_) throw TvqError("prior: prefix token out of range");
        prefix_in[i].row(p) = lf_emb_.row(t);
      }
    }
    for (int p = 0; p < n_tokens_; ++p) {
      const int t = tokens[i][p];
      if (t < 0 || t >= cfg_.vocab) throw TvqError("prior: token id out of range");
      x[i].row(1 + prefix_len_ + p) = tok_emb_.row(t);
      if (prefix_len_ > 0) x[i].row(1 + prefix_len_ + p) += seg_emb_.row(1);
    }
  }
  if (prefix_len_ > 0) {
    const nn::SeqBatch projected = lf_proj_->forward(prefix_in);
    for (int i = 0; i < B; ++i)
      for (int p = 0; p < prefix_len_; ++p)
        x[i].row(1 + p) = projected[i].row(p) + seg_emb_.row(0);
  }
  for (int i = 0; i < B; ++i) x[i] += pos_emb_;

  nn::SeqBatch h = x;
  for (auto& block : blocks_) h = block->forward(h);
  h = final_norm_->forward(h);

  nn::SeqBatch token_rows(B);
  for (int i = 0; i < B; ++i) token_rows[i] = h[i].bottomRows(n_tokens_);
  return head_->forward(token_rows);
}

XMat BidirectionalPrior::forward_one(const std::vector<int>& tokens, int class_token,
                                     const std::vector<int>& prefix_tokens) {
  std::vector<std::vector<int>> t{tokens};
  std::vector<int> c{class_token};
  std::vector<std::vector<int>> p;
  if (prefix_len_ > 0) p.push_back(prefix_tokens);
  return forward(t, c, p)[0];
}

void BidirectionalPrior::backward(const std::vector<XMat>& g_logits) {
  const int B = static_cast<int>(g_logits.size());
  const int slots = 1 + prefix_len_ + n_tokens_;
  nn::SeqBatch g_token_rows = head_->backward(g_logits);
  nn::SeqBatch g(B);
  for (int i = 0; i < B; ++i) {
    g[i] = XMat::Zero(slots, cfg_.hidden);
    g[i].bottomRows(n_tokens_) = g_token_rows[i];
  }
  g = final_norm_->backward(g);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);

  nn::SeqBatch g_prefix(prefix_len_ > 0 ? B : 0);
  for (int i = 0; i < B; ++i) {
    g_pos_emb_ += g[i];
    g_cls_emb_.row(cls_[i]) += g[i].row(0);
    for (int p = 0; p < n_tokens_; ++p) {
      g_tok_emb_.row(tokens_[i][p]) += g[i].row(1 + prefix_len_ + p);
      if (prefix_len_ > 0) g_seg_emb_.row(1) += g[i].row(1 + prefix_len_ + p);
    }
    if (prefix_len_ > 0) {
      g_prefix[i] = g[i].middleRows(1, prefix_len_);
      for (int p = 0; p < prefix_len_; ++p) g_seg_emb_.row(0) += g[i].row(1 + p);
    }
  }
  if (prefix_len_ > 0) {
    const nn::SeqBatch g_emb = lf_proj_->backward(g_prefix);
    for (int i = 0; i < B; ++i)
      for (int p = 0; p < prefix_len_; ++p) g_lf_emb_.row(prefix_[i][p]) += g_emb[i].row(p);
  }
}

void BidirectionalPrior::register_state(const std::string& prefix, nn::Registry& r) {
  r.add(prefix + ".tok_emb", &tok_emb_, &g_tok_emb_);
  r.add(prefix + ".pos_emb", &pos_emb_, &g_pos_emb_);
  r.add(prefix + ".cls_emb", &cls_emb_, &g_cls_emb_);
  if (prefix_len_ > 0) {
    r.add(prefix + ".lf_emb", &lf_emb_, &g_lf_emb_);
    r.add(prefix + ".seg_emb", &seg_emb_, &g_seg_emb_);
    lf_proj_->register_state(prefix + ".lf_proj", r);
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i]->register_state(prefix + ".block" + std::to_string(i), r);
  final_norm_->register_state(prefix + ".final_norm", r);
  head_->register_state(prefix + ".head", r);
}

void BidirectionalPrior::init_token_embedding_from_codes(const XMat& codes) {
  const int rows = std::min<int>(static_cast<int>(codes.rows()), cfg_.vocab - 1);
  const int cols = std::min<int>(static_cast<int>(codes.cols()), cfg_.hidden);
  for (int k = 0; k < rows; ++k) {
    tok_emb_.row(k).setZero();
    tok_emb_.row(k).head(cols) = codes.row(k).head(cols);
  }
}

PriorSet PriorSet::create(const PriorConfig& cfg, const Stage1Model& stage1, std::uint64_t seed) {
  PriorSet set;
  set.cfg = cfg;
  const int n_lf = stage1.token_count(0);
  set.lf = std::make_unique<BidirectionalPrior>(cfg, n_lf, 0, 0, fnv1a("prior.lf", seed));
  set.lf->init_token_embedding_from_codes(stage1.codebook(0).codes);
  if (stage1.n_bands() == 2) {
    const int n_hf = stage1.token_count(1);
    set.hf = std::make_unique<BidirectionalPrior>(cfg, n_hf, n_lf, cfg.vocab - 1,
                                                  fnv1a("prior.hf", seed));
    set.hf->init_token_embedding_from_codes(stage1.codebook(1).codes);
  }
  return set;
}

void PriorSet::register_state(nn::Registry& r) {
  lf->register_state("prior.lf", r);
  if (hf) hf->register_state("prior.hf", r);
}

TokenDataset build_token_dataset(Stage1Model& stage1, const TimeSeriesDataset& ds) {
  stage1.set_train(false);
  const Stage1Data data = stage1.prepare(ds);
  TokenDataset td;
  td.n_bands = stage1.n_bands();
  td.n_samples = ds.n();
  td.labels = ds.labels;
  td.dist.resize(td.n_bands * td.n_samples);
  for (int b = 0; b < td.n_bands; ++b) {
    td.n_tokens.push_back(stage1.token_count(b));
    for (int i = 0; i < ds.n(); ++i) td.dist[b * td.n_samples + i] = stage1.token_distances(b, data.u[b][i]);
  }
  return td;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> tokenize_dataset(
    Stage1Model& stage1, const TimeSeriesDataset& ds, bool stochastic, Rng& rng) {
  const TokenDataset td = build_token_dataset(stage1, ds);
  std::vector<std::pair<std::vector<int>, std::vector<int>>> out(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    out[i].first = stochastic ? sample_tokens_from_distances(td.distances(0, i), rng)
                              : argmin_tokens_from_distances(td.distances(0, i));
    if (td.n_bands == 2)
      out[i].second = stochastic ? sample_tokens_from_distances(td.distances(1, i), rng)
                                 : argmin_tokens_from_distances(td.distances(1, i));
  }
  return out;
}

int masked_count_for_ratio(double r, int n_tokens) {
  const double gamma = std::cos(kPi * r / 2.0);
  int count = static_cast<int>(std::ceil(gamma * n_tokens));
  return std::clamp(count, 1, n_tokens);
}

MaskedBatch make_masked_batch(const std::vector<int>& tokens, int label, const PriorConfig& cfg,
                              Rng& rng) {
  MaskedBatch view;
  view.target = tokens;
  view.s = tokens;
  const int n = static_cast<int>(tokens.size());
  view.mask.assign(n, false);
  const int count = masked_count_for_ratio(rng.uniform(), n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  for (int j = 0; j < count; ++j) {
    view.mask[order[j]] = true;
    view.s[order[j]] = cfg.mask_id();
  }
  view.class_token = rng.uniform() < cfg.p_uncond ? cfg.null_class() : label;
  return view;
}

double masked_nll(const std::vector<XMat>& logits, const std::vector<MaskedBatch>& views,
                  std::vector<XMat>* g_logits) {
  double nll = 0.0;
  long long masked_total = 0;
  for (const auto& v : views)
    masked_total += std::count(v.mask.begin(), v.mask.end(), true);
  if (masked_total == 0) throw TvqError("masked_nll: no masked positions");
  if (g_logits) g_logits->resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const XMat& lg = logits[i];
    if (g_logits) (*g_logits)[i] = XMat::Zero(lg.rows(), lg.cols());
    for (int p = 0; p < lg.rows(); ++p) {
      if (!views[i].mask[p]) continue;
      const double mx = lg.row(p).maxCoeff();
      const XVec ex = (lg.row(p).transpose().array() - mx).exp();
      const double z = ex.sum();
      const int target = views[i].target[p];
      nll += -(lg(p, target) - mx - std::log(z));
      if (g_logits) {
        (*g_logits)[i].row(p) = (ex / z).transpose() / static_cast<double>(masked_total);
        (*g_logits)[i](p, target) -= 1.0 / static_cast<double>(masked_total);
      }
    }
  }
  return nll / static_cast<double>(masked_total);
}

Stage2TrainResult train_stage2(PriorSet& priors, Stage1Model& stage1, const TimeSeriesDataset& ds,
                               const PriorTrainOptions& opts, int start_epoch,
                               nn::AdamW* external_opt, const std::function<void(int, double)>& on_epoch) {
  if (!ds.normalized) throw TvqError("train_stage2: dataset must be normalized");
  const TokenDataset td = build_token_dataset(stage1, ds);
  nn::Registry reg;
  priors.register_state(reg);
  std::unique_ptr<nn::AdamW> local;
  nn::AdamW* opt = external_opt;
  if (opt == nullptr) {
    local = std::make_unique<nn::AdamW>(reg.params, opts.weight_decay);
    opt = local.get();
  }
  Rng root(opts.seed);
  const int N = td.n_samples;

  Stage2TrainResult result;
  result.start_epoch = start_epoch;
  for (int epoch = start_epoch; epoch < opts.epochs; ++epoch) {
    const double lr = nn::cosine_lr(opts.lr, epoch, opts.epochs);
    Rng epoch_rng = root.split("stage2.epoch", epoch);
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), epoch_rng.engine());

    double epoch_loss = 0.0;
    int seen = 0;
    for (int pos = 0; pos < N; pos += opts.batch_size) {
      const int b = std::min(opts.batch_size, N - pos);
      std::vector<MaskedBatch> lf_views(b), hf_views;
      std::vector<std::vector<int>> lf_inputs(b), lf_full(b), hf_inputs;
      std::vector<int> lf_cls(b), hf_cls;
      if (priors.two_band()) {
        hf_views.resize(b);
        hf_inputs.resize(b);
        hf_cls.resize(b);
      }
      for (int i = 0; i < b; ++i) {
        const int idx = order[pos + i];
        Rng sample_rng = epoch_rng.split("sample", idx);
        const std::vector<int> s_lf =
            opts.stochastic_tokens ? sample_tokens_from_distances(td.distances(0, idx), sample_rng)
                                   : argmin_tokens_from_distances(td.distances(0, idx));
        lf_views[i] = make_masked_batch(s_lf, td.labels[idx], priors.cfg, sample_rng);
        lf_inputs[i] = lf_views[i].s;
        lf_full[i] = s_lf;
        lf_cls[i] = lf_views[i].class_token;
        if (priors.two_band()) {
          const std::vector<int> s_hf =
              opts.stochastic_tokens
                  ? sample_tokens_from_distances(td.distances(1, idx), sample_rng)
                  : argmin_tokens_from_distances(td.distances(1, idx));
          hf_views[i] = make_masked_batch(s_hf, td.labels[idx], priors.cfg, sample_rng);
          // The class draw is shared between the two models of one sample.
          hf_views[i].class_token = lf_views[i].class_token;
          hf_inputs[i] = hf_views[i].s;
          hf_cls[i] = hf_views[i].class_token;
        }
      }

      reg.zero_grads();
      const std::vector<XMat> lf_logits = priors.lf->forward(lf_inputs, lf_cls);
      std::vector<XMat> g_lf;
      double loss = masked_nll(lf_logits, lf_views, &g_lf);
      priors.lf->backward(g_lf);
      if (priors.two_band()) {
        // HF conditions on the full (unmasked) stochastic LF tokens.
        const std::vector<XMat> hf_logits = priors.hf->forward(hf_inputs, hf_cls, lf_full);
        std::vector<XMat> g_hf;
        loss += masked_nll(hf_logits, hf_views, &g_hf);
        priors.hf->backward(g_hf);
      }
      if (!std::isfinite(loss))
        throw TvqError("train_stage2: non-finite loss at epoch " + std::to_string(epoch));
      opt->step(lr);
      epoch_loss += loss * b;
      seen += b;
    }
    result.history.push_back(epoch_loss / seen);
    if (on_epoch) on_epoch(epoch, epoch_loss / seen);
  }
  return result;
}

}  // namespace tvq
