#include "tvq/nn.hpp"

#include <cmath>

namespace tvq::nn {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Uniform(-a, a) with a = 1/sqrt(fan_in), the usual conv/linear default.
void init_uniform(XMat& w, int fan_in, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
}

}  // namespace

int conv_out_size(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

ConvGeom conv_geom(int cin, int h, int w, int kh, int kw, int sh, int sw, int ph, int pw) {
  ConvGeom g{cin, h, w, kh, kw, sh, sw, ph, pw, 0, 0};
  g.ho = conv_out_size(h, kh, sh, ph);
  g.wo = conv_out_size(w, kw, sw, pw);
  if (g.ho < 1 || g.wo < 1) throw TvqError("conv: output size would be empty");
  return g;
}

XMat im2col(const Grid& x, const ConvGeom& g) {
  XMat cols = XMat::Zero(g.cin * g.kh * g.kw, g.ho * g.wo);
  for (int oy = 0; oy < g.ho; ++oy) {
    for (int ox = 0; ox < g.wo; ++ox) {
      const int col = oy * g.wo + ox;
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.sh + ky - g.ph;
        if (iy < 0 || iy >= g.h) continue;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.sw + kx - g.pw;
          if (ix < 0 || ix >= g.w) continue;
          const int in_col = iy * g.w + ix;
          const int row0 = (ky * g.kw + kx);
          for (int c = 0; c < g.cin; ++c)
            cols(c * g.kh * g.kw + row0, col) = x.m(c, in_col);
        }
      }
    }
  }
  return cols;
}

Grid col2im(const XMat& cols, const ConvGeom& g) {
  Grid x(g.cin, g.h, g.w);
  for (int oy = 0; oy < g.ho; ++oy) {
    for (int ox = 0; ox < g.wo; ++ox) {
      const int col = oy * g.wo + ox;
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.sh + ky - g.ph;
        if (iy < 0 || iy >= g.h) continue;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.sw + kx - g.pw;
          if (ix < 0 || ix >= g.w) continue;
          const int in_col = iy * g.w + ix;
          const int row0 = (ky * g.kw + kx);
          for (int c = 0; c < g.cin; ++c)
            x.m(c, in_col) += cols(c * g.kh * g.kw + row0, col);
        }
      }
    }
  }
  return x;
}

// ---------------------------------------------------------------- Conv2d ---

Conv2d::Conv2d(int cin, int cout, int kh, int kw, int sh, int sw, int ph, int pw, Rng& rng)
    : cin_(cin), cout_(cout), kh_(kh), kw_(kw), sh_(sh), sw_(sw), ph_(ph), pw_(pw) {
  W.resize(cout, cin * kh * kw);
  b = XMat::Zero(cout, 1);
  init_uniform(W, cin * kh * kw, rng);
  init_uniform(b, cin * kh * kw, rng);
  gW = XMat::Zero(W.rows(), W.cols());
  gb = XMat::Zero(b.rows(), b.cols());
}

GridBatch Conv2d::forward(const GridBatch& x) {
  GridBatch y(x.size());
  cols_.resize(x.size());
  geoms_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    geoms_[i] = conv_geom(cin_, x[i].h, x[i].w, kh_, kw_, sh_, sw_, ph_, pw_);
    cols_[i] = im2col(x[i], geoms_[i]);
    y[i] = Grid(cout_, geoms_[i].ho, geoms_[i].wo);
    y[i].m.noalias() = W * cols_[i];
    y[i].m.colwise() += b.col(0);
  }
  return y;
}

GridBatch Conv2d::backward(const GridBatch& gy) {
  GridBatch gx(gy.size());
  for (std::size_t i = 0; i < gy.size(); ++i) {
    gW.noalias() += gy[i].m * cols_[i].transpose();
    gb.col(0) += gy[i].m.rowwise().sum();
    gx[i] = col2im(W.transpose() * gy[i].m, geoms_[i]);
  }
  return gx;
}

void Conv2d::register_state(const std::string& prefix, Registry& r) {
  r.add(prefix + ".W", &W, &gW);
  r.add(prefix + ".b", &b, &gb);
}

// --------------------------------------------------------------- ConvT2d ---

ConvT2d::ConvT2d(int cin, int cout, int kh, int kw, int sh, int sw, int ph, int pw, Rng& rng)
    : cin_(cin), cout_(cout), kh_(kh), kw_(kw), sh_(sh), sw_(sw), ph_(ph), pw_(pw) {
  W.resize(cin, cout * kh * kw);
  b = XMat::Zero(cout, 1);
  init_uniform(W, cin * kh * kw, rng);
  init_uniform(b, cin * kh * kw, rng);
  gW = XMat::Zero(W.rows(), W.cols());
  gb = XMat::Zero(b.rows(), b.cols());
}

GridBatch ConvT2d::forward(const GridBatch& x) {
  GridBatch y(x.size());
  x_ = x;
  geoms_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int hb = (x[i].h - 1) * sh_ - 2 * ph_ + kh_;
    const int wb = (x[i].w - 1) * sw_ - 2 * pw_ + kw_;
    geoms_[i] = conv_geom(cout_, hb, wb, kh_, kw_, sh_, sw_, ph_, pw_);
    y[i] = col2im(W.transpose() * x[i].m, geoms_[i]);
    y[i].m.colwise() += b.col(0);
  }
  return y;
}

GridBatch ConvT2d::backward(const GridBatch& gy) {
  GridBatch gx(gy.size());
  for (std::size_t i = 0; i < gy.size(); ++i) {
    const XMat cols = im2col(gy[i], geoms_[i]);
    gx[i] = Grid(cin_, x_[i].h, x_[i].w);
    gx[i].m.noalias() = W * cols;
    gW.noalias() += x_[i].m * cols.transpose();
    gb.col(0) += gy[i].m.rowwise().sum();
  }
  return gx;
}

void ConvT2d::register_state(const std::string& prefix, Registry& r) {
  r.add(prefix + ".W", &W, &gW);
  r.add(prefix + ".b", &b, &gb);
}

// ----------------------------------------------------------- BatchNorm2d ---

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : c_(channels), momentum_(momentum), eps_(eps) {
  gamma = XMat::Ones(channels, 1);
  beta = XMat::Zero(channels, 1);
  ggamma = XMat::Zero(channels, 1);
  gbeta = XMat::Zero(channels, 1);
  running_mean = XMat::Zero(channels, 1);
  running_var = XMat::Ones(channels, 1);
}

GridBatch BatchNorm2d::forward(const GridBatch& x) {
  GridBatch y(x.size());
  if (train_) {
    count_ = 0;
    for (const auto& g : x) count_ += g.m.cols();
    XVec mean = XVec::Zero(c_), var = XVec::Zero(c_);
    for (const auto& g : x) mean += g.m.rowwise().sum();
    mean /= static_cast<double>(count_);
    for (const auto& g : x)
      for (int ch = 0; ch < c_; ++ch) var[ch] += (g.m.row(ch).array() - mean[ch]).square().sum();
    var /= static_cast<double>(count_);
    inv_std_ = (var.array() + eps_).rsqrt();

    const double unbias = count_ > 1 ? static_cast<double>(count_) / (count_ - 1) : 1.0;
    running_mean.col(0) = (1.0 - momentum_) * running_mean.col(0) + momentum_ * mean;
    running_var.col(0) = (1.0 - momentum_) * running_var.col(0) + momentum_ * (unbias * var);

    xhat_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xhat_[i] = Grid(x[i].c, x[i].h, x[i].w);
      y[i] = Grid(x[i].c, x[i].h, x[i].w);
      for (int ch = 0; ch < c_; ++ch) {
        xhat_[i].m.row(ch) = ((x[i].m.row(ch).array() - mean[ch]) * inv_std_[ch]).matrix();
        y[i].m.row(ch) = (xhat_[i].m.row(ch).array() * gamma(ch, 0) + beta(ch, 0)).matrix();
      }
    }
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = Grid(x[i].c, x[i].h, x[i].w);
      for (int ch = 0; ch < c_; ++ch) {
        const double inv = 1.0 / std::sqrt(running_var(ch, 0) + eps_);
        y[i].m.row(ch) =
            ((x[i].m.row(ch).array() - running_mean(ch, 0)) * inv * gamma(ch, 0) + beta(ch, 0)).matrix();
      }
    }
  }
  return y;
}

GridBatch BatchNorm2d::backward(const GridBatch& gy) {
  GridBatch gx(gy.size());
  if (!train_) {
    for (std::size_t i = 0; i < gy.size(); ++i) {
      gx[i] = Grid(gy[i].c, gy[i].h, gy[i].w);
      for (int ch = 0; ch < c_; ++ch) {
        const double inv = 1.0 / std::sqrt(running_var(ch, 0) + eps_);
        gx[i].m.row(ch) = gy[i].m.row(ch) * (inv * gamma(ch, 0));
      }
    }
    return gx;
  }
  const double n = static_cast<double>(count_);
  XVec sum_gy = XVec::Zero(c_), sum_gy_xhat = XVec::Zero(c_);
  for (std::size_t i = 0; i < gy.size(); ++i) {
    sum_gy += gy[i].m.rowwise().sum();
    for (int ch = 0; ch < c_; ++ch)
      sum_gy_xhat[ch] += gy[i].m.row(ch).dot(xhat_[i].m.row(ch));
  }
  ggamma.col(0) += sum_gy_xhat;
  gbeta.col(0) += sum_gy;
  for (std::size_t i = 0; i < gy.size(); ++i) {
    gx[i] = Grid(gy[i].c, gy[i].h, gy[i].w);
    for (int ch = 0; ch < c_; ++ch) {
      const double a = gamma(ch, 0) * inv_std_[ch] / n;
      gx[i].m.row(ch) =
          a * (gy[i].m.row(ch).array() * n - sum_gy[ch] - xhat_[i].m.row(ch).array() * sum_gy_xhat[ch])
                  .matrix();
    }
  }
  return gx;
}

void BatchNorm2d::register_state(const std::string& prefix, Registry& r) {
  r.add(prefix + ".gamma", &gamma, &ggamma);
  r.add(prefix + ".beta", &beta, &gbeta);
  r.add_buffer(prefix + ".running_mean", &running_mean);
  r.add_buffer(prefix + ".running_var", &running_var);
}

// ------------------------------------------------------------- LeakyReLU ---

GridBatch LeakyReLU::forward(const GridBatch& x) {
  x_ = x;
  GridBatch y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = Grid(x[i].c, x[i].h, x[i].w);
    y[i].m = x[i].m.unaryExpr([s = slope_](double v) { return v > 0.0 ? v : s * v; });
  }
  return y;
}

GridBatch LeakyReLU::backward(const GridBatch& gy) {
  GridBatch gx(gy.size());
  for (std::size_t i = 0; i < gy.size(); ++i) {
    gx[i] = Grid(gy[i].c, gy[i].h, gy[i].w);
    gx[i].m = (x_[i].m.array() > 0.0).select(gy[i].m, gy[i].m * slope_);
  }
  return gx;
}

// ------------------------------------------------------------ ResBlock2d ---

ResBlock2d::ResBlock2d(int channels, int kernel_h, double slope, Rng& rng)
    : act1_(slope), act2_(slope) {
  const int ph = kernel_h / 2;
  conv1_ = std::make_unique<Conv2d>(channels, channels, kernel_h, 3, 1, 1, ph, 1, rng);
  conv2_ = std::make_unique<Conv2d>(channels, channels, kernel_h, 3, 1, 1, ph, 1, rng);
  bn_ = std::make_unique<BatchNorm2d>(channels);
}

GridBatch ResBlock2d::forward(const GridBatch& x) {
  GridBatch h = conv2_->forward(act2_.forward(bn_->forward(conv1_->forward(act1_.forward(x)))));
  for (std::size_t i = 0; i < x.size(); ++i) h[i].m += x[i].m;
  return h;
}

GridBatch ResBlock2d::backward(const GridBatch& gy) {
  GridBatch gx = act1_.backward(conv1_->backward(bn_->backward(act2_.backward(conv2_->backward(gy)))));
  for (std::size_t i = 0; i < gy.size(); ++i) gx[i].m += gy[i].m;
  return gx;
}

void ResBlock2d::register_state(const std::string& prefix, Registry& r) {
  conv1_->register_state(prefix + ".conv1", r);
  bn_->register_state(prefix + ".bn", r);
  conv2_->register_state(prefix + ".conv2", r);
}

void ResBlock2d::set_train(bool train) { bn_->set_train(train); }

// -------------------------------------------------------- GridSequential ---

GridBatch GridSequential::forward(const GridBatch& x) {
  GridBatch h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

GridBatch GridSequential::backward(const GridBatch& gy) {
  GridBatch g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void GridSequential::register_state(const std::string& prefix, Registry& r) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->register_state(prefix + "." + std::to_string(i), r);
}

void GridSequential::set_train(bool train) {
  for (auto& l : layers_) l->set_train(train);
}

// ---------------------------------------------------------------- Linear ---

Linear::Linear(int in, int out, Rng& rng, bool zero_init) {
  W.resize(out, in);
  b = XMat::Zero(out, 1);
  if (zero_init)
    W.setZero();
  else {
    init_uniform(W, in, rng);
    init_uniform(b, in, rng);
  }
  gW = XMat::Zero(W.rows(), W.cols());
  gb = XMat::Zero(b.rows(), b.cols());
}

SeqBatch Linear::forward(const SeqBatch& x) {
  x_ = x;
  SeqBatch y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i].noalias() = x[i] * W.transpose();
    y[i].rowwise() += b.col(0).transpose();
  }
  return y;
}

SeqBatch Linear::backward(const SeqBatch& gy) {
  SeqBatch gx(gy.size());
  for (std::size_t i = 0; i < gy.size(); ++i) {
    gW.noalias() += gy[i].transpose() * x_[i];
    gb.col(0) += gy[i].colwise().sum().transpose();
    gx[i].noalias() = gy[i] * W;
  }
  return gx;
}

void Linear::register_state(const std::string& prefix, Registry& r) {
  r.add(prefix + ".W", &W, &gW);
  r.add(prefix + ".b", &b, &gb);
}

// --------------------------------------------------------------- RMSNorm ---

RMSNorm::RMSNorm(int dim, double eps) : eps_(eps) {
  gain = XMat::Ones(dim, 1);
  ggain = XMat::Zero(dim, 1);
}

SeqBatch RMSNorm::forward(const SeqBatch& x) {
  SeqBatch y(x.size());
  xhat_.resize(x.size());
  inv_rms_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int n = static_cast<int>(x[i].rows());
    inv_rms_[i].resize(n);
    xhat_[i].resize(n, x[i].cols());
    for (int r = 0; r < n; ++r) {
      const double rms = std::sqrt(x[i].row(r).squaredNorm() / x[i].cols() + eps_);
      inv_rms_[i][r] = 1.0 / rms;
      xhat_[i].row(r) = x[i].row(r) * inv_rms_[i][r];
    }
    y[i] = (xhat_[i].array().rowwise() * gain.col(0).transpose().array()).matrix();
  }
  return y;
}

SeqBatch RMSNorm::backward(const SeqBatch& gy) {
  SeqBatch gx(gy.size());
  const int d = static_cast<int>(gain.rows());
  for (std::size_t i = 0; i < gy.size(); ++i) {
    ggain.col(0) += (gy[i].array() * xhat_[i].array()).colwise().sum().matrix().transpose();
    XMat gxhat = (gy[i].array().rowwise() * gain.col(0).transpose().array()).matrix();
    gx[i].resize(gy[i].rows(), gy[i].cols());
    for (int r = 0; r < gy[i].rows(); ++r) {
      const double dot = gxhat.row(r).dot(xhat_[i].row(r)) / d;
      gx[i].row(r) = inv_rms_[i][r] * (gxhat.row(r) - dot * xhat_[i].row(r));
    }
  }
  return gx;
}

void RMSNorm::register_state(const std::string& prefix, Registry& r) {
  r.add(prefix + ".gain", &gain, &ggain);
}

// ------------------------------------------------------------------ Gelu ---

SeqBatch Gelu::forward(const SeqBatch& x) {
  x_ = x;
  SeqBatch y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = x[i].unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
  return y;
}

SeqBatch Gelu::backward(const SeqBatch& gy) {
  SeqBatch gx(gy.size());
  for (std::size_t i = 0; i < gy.size(); ++i) {
    const XMat d = x_[i].unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))) +
             v * std::exp(-0.5 * v * v) / std::sqrt(2.0 * kPi);
    });
    gx[i] = (gy[i].array() * d.array()).matrix();
  }
  return gx;
}

// ---------------------------------------------- MultiHeadSelfAttention ---

MultiHeadSelfAttention::MultiHeadSelfAttention(int dim, int heads, Rng& rng)
    : qkv(dim, 3 * dim, rng), proj(dim, dim, rng), dim_(dim), heads_(heads), dh_(dim / heads) {
  if (dim % heads != 0) throw ConfigError("attention: dim must be divisible by heads");
}

SeqBatch MultiHeadSelfAttention::forward(const SeqBatch& x) {
  const SeqBatch fused = qkv.forward(x);
  cache_.resize(x.size());
  SeqBatch out(x.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int n = static_cast<int>(x[i].rows());
    Cache& c = cache_[i];
    c.q = fused[i].leftCols(dim_);
    c.k = fused[i].middleCols(dim_, dim_);
    c.v = fused[i].rightCols(dim_);
    c.probs.assign(heads_, XMat());
    XMat o(n, dim_);
    for (int h = 0; h < heads_; ++h) {
      const auto qh = c.q.middleCols(h * dh_, dh_);
      const auto kh = c.k.middleCols(h * dh_, dh_);
      const auto vh = c.v.middleCols(h * dh_, dh_);
      XMat s = scale * (qh * kh.transpose());
      for (int r = 0; r < n; ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      c.probs[h] = s;
      o.middleCols(h * dh_, dh_).noalias() = s * vh;
    }
    out[i] = std::move(o);
  }
  return proj.forward(out);
}

SeqBatch MultiHeadSelfAttention::backward(const SeqBatch& gy) {
  const SeqBatch go = proj.backward(gy);
  SeqBatch gfused(go.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
  for (std::size_t i = 0; i < go.size(); ++i) {
    const Cache& c = cache_[i];
    const int n = static_cast<int>(go[i].rows());
    XMat gq(n, dim_), gk(n, dim_), gv(n, dim_);
    for (int h = 0; h < heads_; ++h) {
      const auto qh = c.q.middleCols(h * dh_, dh_);
      const auto kh = c.k.middleCols(h * dh_, dh_);
      const auto vh = c.v.middleCols(h * dh_, dh_);
      const XMat& p = c.probs[h];
      const auto goh = go[i].middleCols(h * dh_, dh_);
      const XMat gp = goh * vh.transpose();
      gv.middleCols(h * dh_, dh_).noalias() = p.transpose() * goh;
      XMat gs(n, n);
      for (int r = 0; r < n; ++r) {
        const double dot = gp.row(r).dot(p.row(r));
        gs.row(r) = p.row(r).array() * (gp.row(r).array() - dot);
      }
      gq.middleCols(h * dh_, dh_).noalias() = scale * (gs * kh);
      gk.middleCols(h * dh_, dh_).noalias() = scale * (gs.transpose() * qh);
    }
    gfused[i].resize(n, 3 * dim_);
    gfused[i].leftCols(dim_) = gq;
    gfused[i].middleCols(dim_, dim_) = gk;
    gfused[i].rightCols(dim_) = gv;
  }
  return qkv.backward(gfused);
}

void MultiHeadSelfAttention::register_state(const std::string& prefix, Registry& r) {
  qkv.register_state(prefix + ".qkv", r);
  proj.register_state(prefix + ".proj", r);
}

// ------------------------------------------------------ TransformerBlock ---

TransformerBlock::TransformerBlock(int dim, int heads, int ff_ratio, Rng& rng)
    : norm1(dim),
      norm2(dim),
      attn(dim, heads, rng),
      ff1(dim, dim * ff_ratio, rng),
      ff2(dim * ff_ratio, dim, rng) {}

SeqBatch TransformerBlock::forward(const SeqBatch& x) {
  SeqBatch a = attn.forward(norm1.forward(x));
  for (std::size_t i = 0; i < x.size(); ++i) a[i] += x[i];
  SeqBatch f = ff2.forward(gelu.forward(ff1.forward(norm2.forward(a))));
  for (std::size_t i = 0; i < a.size(); ++i) f[i] += a[i];
  return f;
}

SeqBatch TransformerBlock::backward(const SeqBatch& gy) {
  SeqBatch ga = norm2.backward(ff1.backward(gelu.backward(ff2.backward(gy))));
  for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  SeqBatch gx = norm1.backward(attn.backward(ga));
  for (std::size_t i = 0; i < ga.size(); ++i) gx[i] += ga[i];
  return gx;
}

void TransformerBlock::register_state(const std::string& prefix, Registry& r) {
  norm1.register_state(prefix + ".norm1", r);
  attn.register_state(prefix + ".attn", r);
  norm2.register_state(prefix + ".norm2", r);
  ff1.register_state(prefix + ".ff1", r);
  ff2.register_state(prefix + ".ff2", r);
}

// ----------------------------------------------------------------- AdamW ---

AdamW::AdamW(std::vector<ParamEntry> params, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(std::move(params)), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  m.reserve(params_.size());
  v.reserve(params_.size());
  for (const auto& p : params_) {
    m.push_back(XMat::Zero(p.value->rows(), p.value->cols()));
    v.push_back(XMat::Zero(p.value->rows(), p.value->cols()));
  }
}

void AdamW::step(double lr) {
  ++t;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    XMat& p = *params_[i].value;
    const XMat& g = *params_[i].grad;
    m[i] = b1_ * m[i] + (1.0 - b1_) * g;
    v[i] = b2_ * v[i] + (1.0 - b2_) * g.cwiseProduct(g);
    p -= lr * wd_ * p;
    p.array() -= lr * (m[i].array() / bc1) / ((v[i].array() / bc2).sqrt() + eps_);
  }
}

double cosine_lr(double lr0, int epoch, int max_epochs) {
  if (max_epochs <= 1) return lr0;
  const double x = static_cast<double>(epoch) / (max_epochs - 1);
  return lr0 * 0.5 * (1.0 + std::cos(kPi * std::min(1.0, x)));
}

}  // namespace tvq::nn
