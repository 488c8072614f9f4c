#pragma once

#include "tvq/rng.hpp"
#include "tvq/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tvq::nn {

// ---------------------------------------------------------------------------
// Parameter registry: one traversal API serving the optimizer (params+grads)
// and checkpointing (named params and buffers).
// ---------------------------------------------------------------------------

struct ParamEntry {
  std::string name;
  XMat* value;
  XMat* grad;
};

struct BufferEntry {
  std::string name;
  XMat* value;
};

class Registry {
 public:
  void add(const std::string& name, XMat* v, XMat* g) { params.push_back({name, v, g}); }
  void add_buffer(const std::string& name, XMat* v) { buffers.push_back({name, v}); }
  void zero_grads() {
    for (auto& p : params) p.grad->setZero();
  }
  std::vector<ParamEntry> params;
  std::vector<BufferEntry> buffers;
};

class Module {
 public:
  virtual ~Module() = default;
  virtual void register_state(const std::string& prefix, Registry& r) = 0;
  virtual void set_train(bool) {}
};

// ---------------------------------------------------------------------------
// Grid (2-D convolutional) layers. Batches are vectors of Grid; layers cache
// what the backward pass needs for the most recent forward batch.
// ---------------------------------------------------------------------------

struct ConvGeom {
  int cin, h, w;          // dense side (convolution input)
  int kh, kw, sh, sw, ph, pw;
  int ho, wo;             // strided side (convolution output)
};

ConvGeom conv_geom(int cin, int h, int w, int kh, int kw, int sh, int sw, int ph, int pw);
int conv_out_size(int in, int k, int s, int p);

/// Patch matrix of shape (cin·kh·kw) × (ho·wo).
XMat im2col(const Grid& x, const ConvGeom& g);
/// Adjoint scatter-add of im2col.
Grid col2im(const XMat& cols, const ConvGeom& g);

class GridLayer : public Module {
 public:
  virtual GridBatch forward(const GridBatch& x) = 0;
  virtual GridBatch backward(const GridBatch& gy) = 0;
};

class Conv2d : public GridLayer {
 public:
  Conv2d(int cin, int cout, int kh, int kw, int sh, int sw, int ph, int pw, Rng& rng);
  GridBatch forward(const GridBatch& x) override;
  GridBatch backward(const GridBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;

  XMat W, b, gW, gb;  // W: cout × (cin·kh·kw)

 private:
  int cin_, cout_, kh_, kw_, sh_, sw_, ph_, pw_;
  std::vector<XMat> cols_;
  std::vector<ConvGeom> geoms_;
};

class ConvT2d : public GridLayer {
 public:
  ConvT2d(int cin, int cout, int kh, int kw, int sh, int sw, int ph, int pw, Rng& rng);
  GridBatch forward(const GridBatch& x) override;
  GridBatch backward(const GridBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;

  XMat W, b, gW, gb;  // W: cin × (cout·kh·kw)

 private:
  int cin_, cout_, kh_, kw_, sh_, sw_, ph_, pw_;
  GridBatch x_;
  std::vector<ConvGeom> geoms_;
};

class BatchNorm2d : public GridLayer {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);
  GridBatch forward(const GridBatch& x) override;
  GridBatch backward(const GridBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;
  void set_train(bool train) override { train_ = train; }

  XMat gamma, beta, ggamma, gbeta;
  XMat running_mean, running_var;  // c × 1

 private:
  int c_;
  double momentum_, eps_;
  bool train_ = true;
  GridBatch xhat_;
  XVec inv_std_;
  long long count_ = 0;
};

class LeakyReLU : public GridLayer {
 public:
  explicit LeakyReLU(double slope = 0.01) : slope_(slope) {}
  GridBatch forward(const GridBatch& x) override;
  GridBatch backward(const GridBatch& gy) override;
  void register_state(const std::string&, Registry&) override {}

 private:
  double slope_;
  GridBatch x_;
};

/// leaky rectifier -> conv (kh×3) -> batch norm -> leaky rectifier -> conv,
/// with an additive skip. kernel_h=1 gives the 1-D variant.
class ResBlock2d : public GridLayer {
 public:
  ResBlock2d(int channels, int kernel_h, double slope, Rng& rng);
  GridBatch forward(const GridBatch& x) override;
  GridBatch backward(const GridBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;
  void set_train(bool train) override;

 private:
  LeakyReLU act1_, act2_;
  std::unique_ptr<Conv2d> conv1_, conv2_;
  std::unique_ptr<BatchNorm2d> bn_;
};

class GridSequential : public GridLayer {
 public:
  void add(std::unique_ptr<GridLayer> layer) { layers_.push_back(std::move(layer)); }
  GridBatch forward(const GridBatch& x) override;
  GridBatch backward(const GridBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;
  void set_train(bool train) override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<GridLayer>> layers_;
};

// ---------------------------------------------------------------------------
// Sequence (transformer) layers. A batch is a vector of (seq_len × dim)
// matrices; sequence lengths may differ across samples.
// ---------------------------------------------------------------------------

using SeqBatch = std::vector<XMat>;

class SeqLayer : public Module {
 public:
  virtual SeqBatch forward(const SeqBatch& x) = 0;
  virtual SeqBatch backward(const SeqBatch& gy) = 0;
};

class Linear : public SeqLayer {
 public:
  Linear(int in, int out, Rng& rng, bool zero_init = false);
  SeqBatch forward(const SeqBatch& x) override;
  SeqBatch backward(const SeqBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;

  XMat W, b, gW, gb;  // W: out × in

 private:
  SeqBatch x_;
};

class RMSNorm : public SeqLayer {
 public:
  explicit RMSNorm(int dim, double eps = 1e-8);
  SeqBatch forward(const SeqBatch& x) override;
  SeqBatch backward(const SeqBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;

  XMat gain, ggain;  // dim × 1

 private:
  double eps_;
  SeqBatch xhat_;
  std::vector<XVec> inv_rms_;
};

class Gelu : public SeqLayer {
 public:
  SeqBatch forward(const SeqBatch& x) override;
  SeqBatch backward(const SeqBatch& gy) override;
  void register_state(const std::string&, Registry&) override {}

 private:
  SeqBatch x_;
};

/// Full bidirectional multi-head self-attention (no causal mask).
class MultiHeadSelfAttention : public SeqLayer {
 public:
  MultiHeadSelfAttention(int dim, int heads, Rng& rng);
  SeqBatch forward(const SeqBatch& x) override;
  SeqBatch backward(const SeqBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;

  Linear qkv, proj;

 private:
  int dim_, heads_, dh_;
  struct Cache {
    XMat q, k, v;                // n × dim (heads concatenated)
    std::vector<XMat> probs;     // per head: n × n
  };
  std::vector<Cache> cache_;
};

/// Pre-norm block: x + attn(norm1(x)), then + ffn(norm2(·)).
class TransformerBlock : public SeqLayer {
 public:
  TransformerBlock(int dim, int heads, int ff_ratio, Rng& rng);
  SeqBatch forward(const SeqBatch& x) override;
  SeqBatch backward(const SeqBatch& gy) override;
  void register_state(const std::string& prefix, Registry& r) override;

  RMSNorm norm1, norm2;
  MultiHeadSelfAttention attn;
  Linear ff1, ff2;
  Gelu gelu;
};

// ---------------------------------------------------------------------------
// Optimization.
// ---------------------------------------------------------------------------

/// Decoupled-weight-decay optimizer over a registry's parameters.
class AdamW {
 public:
  AdamW(std::vector<ParamEntry> params, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);
  const std::vector<ParamEntry>& params() const { return params_; }

  // Exposed for checkpoint resume.
  std::vector<XMat> m, v;
  long long t = 0;

 private:
  std::vector<ParamEntry> params_;
  double wd_, b1_, b2_, eps_;
};

/// Cosine schedule decaying lr0 to 0 over max_epochs.
double cosine_lr(double lr0, int epoch, int max_epochs);

}  // namespace tvq::nn
