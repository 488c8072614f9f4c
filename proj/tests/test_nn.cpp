#include "tvq/nn.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace tvq;
using namespace tvq::nn;

namespace {

/// Loss = 0.5 sum of squares over the batch, so dL/dy = y.
double grid_loss(const GridBatch& y) {
  double l = 0.0;
  for (const auto& g : y) l += 0.5 * g.m.squaredNorm();
  return l;
}

double seq_loss(const SeqBatch& y) {
  double l = 0.0;
  for (const auto& m : y) l += 0.5 * m.squaredNorm();
  return l;
}

/// FD check of both parameters and inputs for a grid layer.
void check_grid_layer(GridLayer& layer, GridBatch x, Rng& rng, double tol = 1e-5) {
  Registry reg;
  layer.register_state("l", reg);
  const auto loss_fn = [&]() { return grid_loss(layer.forward(x)); };

  reg.zero_grads();
  GridBatch y = layer.forward(x);
  GridBatch gx = layer.backward(y);

  CHECK(test::fd_max_rel_err(reg.params, loss_fn, rng, 6) < tol);

  double worst = 0.0;
  const double eps = 1e-6;
  for (std::size_t b = 0; b < x.size(); ++b)
    for (int s = 0; s < 6; ++s) {
      const int idx = rng.randint(static_cast<int>(x[b].m.size()));
      double* cell = x[b].m.data() + idx;
      const double saved = *cell;
      *cell = saved + eps;
      const double up = loss_fn();
      *cell = saved - eps;
      const double down = loss_fn();
      *cell = saved;
      const double fd = (up - down) / (2 * eps);
      const double analytic = *(gx[b].m.data() + idx);
      worst = std::max(worst, std::abs(fd - analytic) /
                                  std::max({std::abs(fd), std::abs(analytic), 1e-6}));
    }
  CHECK(worst < tol);
}

void check_seq_layer(SeqLayer& layer, SeqBatch x, Rng& rng, double tol = 1e-5) {
  Registry reg;
  layer.register_state("l", reg);
  const auto loss_fn = [&]() { return seq_loss(layer.forward(x)); };

  reg.zero_grads();
  SeqBatch y = layer.forward(x);
  SeqBatch gx = layer.backward(y);

  CHECK(test::fd_max_rel_err(reg.params, loss_fn, rng, 6) < tol);

  double worst = 0.0;
  const double eps = 1e-6;
  for (std::size_t b = 0; b < x.size(); ++b)
    for (int s = 0; s < 6; ++s) {
      const int idx = rng.randint(static_cast<int>(x[b].size()));
      double* cell = x[b].data() + idx;
      const double saved = *cell;
      *cell = saved + eps;
      const double up = loss_fn();
      *cell = saved - eps;
      const double down = loss_fn();
      *cell = saved;
      const double fd = (up - down) / (2 * eps);
      const double analytic = *(gx[b].data() + idx);
      worst = std::max(worst, std::abs(fd - analytic) /
                                  std::max({std::abs(fd), std::abs(analytic), 1e-6}));
    }
  CHECK(worst < tol);
}

}  // namespace

TEST_CASE("conv geometry") {
  CHECK(conv_out_size(64, 4, 2, 1) == 32);
  CHECK(conv_out_size(49, 4, 2, 1) == 24);
  CHECK(conv_out_size(5, 3, 1, 1) == 5);
}

TEST_CASE("Conv2d gradients match finite differences") {
  Rng rng(101);
  Conv2d conv(2, 3, 3, 4, 1, 2, 1, 1, rng);
  GridBatch x{test::random_grid(2, 5, 8, rng), test::random_grid(2, 5, 8, rng)};
  check_grid_layer(conv, x, rng);
}

TEST_CASE("Conv2d with kernel height 1 (1-D variant)") {
  Rng rng(103);
  Conv2d conv(1, 2, 1, 4, 1, 2, 0, 1, rng);
  GridBatch x{test::random_grid(1, 1, 12, rng)};
  check_grid_layer(conv, x, rng);
}

TEST_CASE("ConvT2d matches a brute-force scatter oracle") {
  Rng rng(107);
  ConvT2d deconv(2, 3, 3, 4, 1, 2, 1, 1, rng);
  const Grid x = test::random_grid(2, 4, 5, rng);
  const GridBatch y = deconv.forward({x});

  const int hb = (4 - 1) * 1 - 2 * 1 + 3;   // 4
  const int wb = (5 - 1) * 2 - 2 * 1 + 4;   // 10
  REQUIRE(y[0].h == hb);
  REQUIRE(y[0].w == wb);
  Grid oracle(3, hb, wb);
  for (int co = 0; co < 3; ++co)
    for (int y0 = 0; y0 < hb; ++y0)
      for (int x0 = 0; x0 < wb; ++x0) oracle.at(co, y0, x0) = deconv.b(co, 0);
  // W layout: (cin) × (cout*kh*kw), kernel index row-major (ky, kx).
  for (int ci = 0; ci < 2; ++ci)
    for (int iy = 0; iy < 4; ++iy)
      for (int ix = 0; ix < 5; ++ix)
        for (int co = 0; co < 3; ++co)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 4; ++kx) {
              const int oy = iy * 1 + ky - 1;
              const int ox = ix * 2 + kx - 1;
              if (oy < 0 || oy >= hb || ox < 0 || ox >= wb) continue;
              oracle.at(co, oy, ox) +=
                  x.at(ci, iy, ix) * deconv.W(ci, (co * 3 + ky) * 4 + kx);
            }
  CHECK((y[0].m - oracle.m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ConvT2d gradients match finite differences") {
  Rng rng(109);
  ConvT2d deconv(3, 2, 3, 4, 1, 2, 1, 1, rng);
  GridBatch x{test::random_grid(3, 2, 4, rng), test::random_grid(3, 2, 4, rng)};
  check_grid_layer(deconv, x, rng);
}

TEST_CASE("ConvT2d doubles temporal width with the standard geometry") {
  Rng rng(211);
  ConvT2d deconv(1, 1, 3, 4, 1, 2, 1, 1, rng);
  const GridBatch y = deconv.forward({test::random_grid(1, 5, 6, rng)});
  CHECK(y[0].h == 5);
  CHECK(y[0].w == 12);
}

TEST_CASE("BatchNorm2d normalizes per channel and matches finite differences") {
  Rng rng(113);
  BatchNorm2d bn(3);
  GridBatch x{test::random_grid(3, 2, 4, rng, 2.0), test::random_grid(3, 2, 4, rng, 2.0)};
  bn.set_train(true);
  const GridBatch y = bn.forward(x);
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    int count = 0;
    for (const auto& g : y) {
      sum += g.m.row(c).sum();
      sq += g.m.row(c).squaredNorm();
      count += static_cast<int>(g.m.cols());
    }
    const double mean = sum / count;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(sq / count - mean * mean == doctest::Approx(1.0).epsilon(1e-3));
  }
  check_grid_layer(bn, x, rng, 1e-4);
}

TEST_CASE("BatchNorm2d eval mode uses running statistics") {
  Rng rng(127);
  BatchNorm2d bn(2);
  GridBatch x{test::random_grid(2, 2, 3, rng, 3.0)};
  bn.set_train(true);
  for (int i = 0; i < 200; ++i) bn.forward(x);
  bn.set_train(false);
  const GridBatch y = bn.forward(x);
  // After many updates on one batch, eval output approximates train output.
  bn.set_train(true);
  const GridBatch yt = bn.forward(x);
  CHECK((y[0].m - yt[0].m).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("LeakyReLU gradcheck") {
  Rng rng(131);
  LeakyReLU act(0.01);
  GridBatch x{test::random_grid(2, 3, 4, rng)};
  check_grid_layer(act, x, rng);
}

TEST_CASE("ResBlock2d gradcheck and shape preservation") {
  Rng rng(137);
  ResBlock2d block(3, 3, 0.01, rng);
  GridBatch x{test::random_grid(3, 4, 6, rng), test::random_grid(3, 4, 6, rng)};
  const GridBatch y = block.forward(x);
  CHECK(y[0].h == 4);
  CHECK(y[0].w == 6);
  check_grid_layer(block, x, rng, 1e-4);
}

TEST_CASE("Linear gradcheck") {
  Rng rng(139);
  Linear lin(4, 3, rng);
  SeqBatch x{test::random_matrix(5, 4, rng), test::random_matrix(5, 4, rng)};
  check_seq_layer(lin, x, rng);
}

TEST_CASE("RMSNorm normalizes rows to unit RMS before gain") {
  Rng rng(149);
  RMSNorm norm(6);
  SeqBatch x{test::random_matrix(4, 6, rng, 3.0)};
  const SeqBatch y = norm.forward(x);
  for (int r = 0; r < 4; ++r) {
    const double rms = std::sqrt(y[0].row(r).squaredNorm() / 6.0);
    CHECK(rms == doctest::Approx(1.0).epsilon(1e-5));
  }
  check_seq_layer(norm, x, rng, 1e-4);
}

TEST_CASE("Gelu gradcheck") {
  Rng rng(151);
  Gelu act;
  SeqBatch x{test::random_matrix(3, 5, rng)};
  check_seq_layer(act, x, rng);
}

TEST_CASE("MultiHeadSelfAttention gradcheck") {
  Rng rng(157);
  MultiHeadSelfAttention attn(8, 2, rng);
  SeqBatch x{test::random_matrix(5, 8, rng), test::random_matrix(7, 8, rng)};
  check_seq_layer(attn, x, rng, 1e-4);
}

TEST_CASE("TransformerBlock gradcheck") {
  Rng rng(163);
  TransformerBlock block(8, 2, 1, rng);
  SeqBatch x{test::random_matrix(6, 8, rng)};
  check_seq_layer(block, x, rng, 1e-4);
}

TEST_CASE("AdamW decoupled weight decay shrinks parameters with zero gradient") {
  Rng rng(167);
  XMat w = test::random_matrix(3, 3, rng);
  const XMat w0 = w;
  XMat g = XMat::Zero(3, 3);
  AdamW opt({{"w", &w, &g}}, 0.1);
  opt.step(0.5);
  CHECK((w - (1.0 - 0.5 * 0.1) * w0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("AdamW descends a quadratic") {
  XMat w(1, 1);
  w << 5.0;
  XMat g(1, 1);
  AdamW opt({{"w", &w, &g}}, 0.0);
  for (int i = 0; i < 500; ++i) {
    g(0, 0) = 2.0 * w(0, 0);
    opt.step(0.05);
  }
  CHECK(std::abs(w(0, 0)) < 1e-2);
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(1e-3, 0, 100) == doctest::Approx(1e-3));
  CHECK(cosine_lr(1e-3, 99, 100) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(cosine_lr(1e-3, 50, 100) < 1e-3);
  CHECK(cosine_lr(1e-3, 50, 100) > 0.0);
}
