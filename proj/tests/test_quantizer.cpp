#include "tvq/quantizer.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace tvq;

namespace {

Codebook make_codebook(const XMat& codes) {
  Codebook cb;
  cb.codes = codes;
  cb.ema_cluster_size = XMat::Ones(codes.rows(), 1);
  cb.ema_embed_sum = codes;
  return cb;
}

}  // namespace

TEST_CASE("quantize maps an exact code match to itself") {
  Rng rng(3);
  Codebook cb = Codebook::init(4, 3, rng);
  Grid z(3, 1, 2);
  z.m.col(0) = cb.codes.row(2).transpose();
  z.m.col(1) = cb.codes.row(0).transpose();
  auto [zq, s] = quantize(z, cb);
  CHECK(s.indices(0, 0) == 2);
  CHECK(s.indices(0, 1) == 0);
  CHECK(zq.m.col(0) == cb.codes.row(2).transpose());
}

TEST_CASE("quantize picks the closer of two codes") {
  XMat codes(2, 2);
  codes << 0, 0, 1, 1;
  Codebook cb = make_codebook(codes);
  Grid z(2, 1, 1);
  z.m << 0.9, 0.8;
  auto [zq, s] = quantize(z, cb);
  CHECK(s.indices(0, 0) == 1);  // 0.224 < 1.204
  CHECK(zq.m(0, 0) == 1.0);
}

TEST_CASE("equidistant codes break ties toward the lowest index") {
  XMat codes(3, 2);
  codes << 0, 0, 2, 0, 1, 5;
  Codebook cb = make_codebook(codes);
  Grid z(2, 1, 1);
  z.m << 1.0, 0.0;  // exactly between codes 0 and 1
  auto [zq, s] = quantize(z, cb);
  CHECK(s.indices(0, 0) == 0);
}

TEST_CASE("quantized vectors are bit-identical codebook rows") {
  Rng rng(5);
  Codebook cb = Codebook::init(8, 4, rng);
  const Grid z = test::random_grid(4, 3, 5, rng);
  auto [zq, s] = quantize(z, cb);
  for (int j = 0; j < z.h * z.w; ++j) {
    const int k = s.flatten()[j];
    for (int d = 0; d < 4; ++d) CHECK(zq.m(d, j) == cb.codes(k, d));
  }
}

TEST_CASE("quantize matches an exhaustive-distance oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Codebook cb = Codebook::init(6, 3, rng);
    const Grid z = test::random_grid(3, 2, 4, rng);
    auto [zq, s] = quantize(z, cb);
    const std::vector<int> seq = s.flatten();
    for (int j = 0; j < z.h * z.w; ++j) {
      int best = 0;
      double bd = (z.m.col(j) - cb.codes.row(0).transpose()).squaredNorm();
      for (int k = 1; k < cb.size(); ++k) {
        const double d = (z.m.col(j) - cb.codes.row(k).transpose()).squaredNorm();
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      CHECK(seq[j] == best);
      // Optimality inequality.
      for (int k = 0; k < cb.size(); ++k)
        CHECK((z.m.col(j) - zq.m.col(j)).squaredNorm() <=
              (z.m.col(j) - cb.codes.row(k).transpose()).squaredNorm() + 1e-12);
    }
  }
}

TEST_CASE("quantize rejects dimension mismatch") {
  Rng rng(9);
  Codebook cb = Codebook::init(4, 3, rng);
  const Grid z = test::random_grid(2, 1, 1, rng);
  CHECK_THROWS_AS(quantize(z, cb), TvqError);
}

TEST_CASE("straight_through forwards the quantized value") {
  Rng rng(11);
  const Grid z = test::random_grid(3, 2, 2, rng);
  const Grid zq = test::random_grid(3, 2, 2, rng);
  const Grid st = straight_through(z, zq);
  CHECK(st.m == zq.m);
}

TEST_CASE("straight-through and commitment gradients match finite differences") {
  // 2-code, 3-dim toy: loss = sum(z_st^2) + beta * ||z - sg[zq]||^2 with
  // z_st = z + (zq0 - z0) held straight-through.
  Rng rng(13);
  XMat codes(2, 3);
  codes << 0.3, -0.2, 0.5, -0.4, 0.6, 0.1;
  Codebook cb = make_codebook(codes);
  const double beta = 1.0;
  Grid z0 = test::random_grid(3, 1, 4, rng);
  auto [zq0, s0] = quantize(z0, cb);
  const XMat offset = zq0.m - z0.m;

  Grid z = z0;
  const auto loss = [&]() {
    const XMat zst = z.m + offset;
    return zst.squaredNorm() + beta * (z.m - zq0.m).squaredNorm();
  };
  // Analytic gradient under straight-through semantics.
  XMat analytic = 2.0 * (z.m + offset) + 2.0 * beta * (z.m - zq0.m);

  double worst = 0.0;
  const double eps = 1e-6;
  for (int i = 0; i < z.m.rows(); ++i)
    for (int j = 0; j < z.m.cols(); ++j) {
      const double saved = z.m(i, j);
      z.m(i, j) = saved + eps;
      const double up = loss();
      z.m(i, j) = saved - eps;
      const double down = loss();
      z.m(i, j) = saved;
      const double fd = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(fd - analytic(i, j)) /
                                  std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-6}));
    }
  CHECK(worst < 1e-3);

  // Scalar surrogate: d(sum zq^2)/dzq = 2 zq against central differences.
  const double v = 0.37;
  const auto f = [](double q) { return q * q; };
  const double fd = (f(v + 1e-6) - f(v - 1e-6)) / 2e-6;
  CHECK(std::abs(fd - 2 * v) < 1e-4);
}

TEST_CASE("codebook_loss values") {
  Grid z_lf(1, 1, 1), zq_lf(1, 1, 1), z_hf(1, 1, 1), zq_hf(1, 1, 1);
  z_lf.m << 1.0;
  zq_lf.m << 0.0;
  z_hf.m << 0.7;
  zq_hf.m << 0.7;
  // codebook term + commitment term, both 1.0
  CHECK(codebook_loss(z_lf, z_hf, zq_lf, zq_hf, 1.0) == doctest::Approx(2.0));
  // zero when z == zq on both bands
  CHECK(codebook_loss(z_hf, z_hf, zq_hf, zq_hf, 1.0) == doctest::Approx(0.0));
  // doubling beta doubles the commitment component
  const double l1 = codebook_loss(z_lf, z_hf, zq_lf, zq_hf, 1.0, false);
  const double l2 = codebook_loss(z_lf, z_hf, zq_lf, zq_hf, 2.0, false);
  CHECK(l2 == doctest::Approx(2.0 * l1));
}

TEST_CASE("ema leaves unassigned codes nearly unchanged") {
  Rng rng(17);
  Codebook cb = Codebook::init(3, 2, rng);
  const XMat before = cb.codes;
  Grid z(2, 1, 1);
  z.m.col(0) = cb.codes.row(0).transpose();
  auto [zq, s] = quantize(z, cb);
  ema_update(cb, z, s);
  // Codes 1 and 2 see only decay shrinkage of their statistics.
  for (int k = 1; k < 3; ++k)
    CHECK((cb.codes.row(k) - before.row(k)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("ema converges to a constant token stream") {
  Rng rng(19);
  Codebook cb = Codebook::init(2, 3, rng);
  XVec v(3);
  v << 0.5, -1.0, 2.0;
  Grid z(3, 1, 4);
  for (int j = 0; j < 4; ++j) z.m.col(j) = v;
  for (int step = 0; step < 50; ++step) {
    auto [zq, s] = quantize(z, cb);
    ema_update(cb, z, s);
  }
  // At least the dominant code has converged to v.
  auto [zq, s] = quantize(z, cb);
  const int k = s.indices(0, 0);
  CHECK((cb.codes.row(k).transpose() - v).norm() < 1e-3);
}

TEST_CASE("decay near one freezes the codes") {
  Rng rng(23);
  Codebook cb = Codebook::init(4, 2, rng, 0.999999);
  const XMat before = cb.codes;
  const Grid z = test::random_grid(2, 2, 3, rng);
  auto [zq, s] = quantize(z, cb);
  ema_update(cb, z, s);
  CHECK((cb.codes - before).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("stochastic sampling splits equidistant codes evenly") {
  XMat codes(2, 1);
  codes << -1.0, 1.0;
  Codebook cb = make_codebook(codes);
  Grid z(1, 1, 1);
  z.m << 0.0;
  Rng rng(29);
  int hits = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto [zq, s] = stochastic_sample(z, cb, true, rng);
    hits += s.indices(0, 0);
  }
  const double p = static_cast<double>(hits) / draws;
  CHECK(p > 0.48);
  CHECK(p < 0.52);
}

TEST_CASE("stochastic sampling all but ignores a distant code") {
  XMat codes(2, 1);
  codes << 0.0, 10.0;
  Codebook cb = make_codebook(codes);
  Grid z(1, 1, 1);
  z.m << 0.0;  // distances (0, 10) -> softmax(0, -10)
  Rng rng(31);
  int far = 0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    auto [zq, s] = stochastic_sample(z, cb, true, rng);
    far += s.indices(0, 0);
  }
  CHECK(static_cast<double>(draws - far) / draws > 0.999);
}

TEST_CASE("disabled stochastic sampling reduces to quantize") {
  Rng rng(37);
  Codebook cb = Codebook::init(5, 3, rng);
  const Grid z = test::random_grid(3, 2, 3, rng);
  auto [zq_a, s_a] = stochastic_sample(z, cb, false, rng);
  auto [zq_b, s_b] = quantize(z, cb);
  CHECK(s_a.indices == s_b.indices);
  CHECK(zq_a.m == zq_b.m);
}

TEST_CASE("stochastic frequencies follow the softmax distribution (chi-squared)") {
  // K=4 with distinct distances; chi-squared test at df=3, threshold for
  // p > 0.01 is 11.345.
  XMat codes(4, 1);
  codes << 0.0, 0.5, 1.0, 2.0;
  Codebook cb = make_codebook(codes);
  Grid z(1, 1, 1);
  z.m << 0.1;
  XVec expected(4);
  for (int k = 0; k < 4; ++k) expected[k] = -std::abs(0.1 - codes(k, 0));
  const double mx = expected.maxCoeff();
  expected = (expected.array() - mx).exp();
  expected /= expected.sum();

  Rng rng(41);
  const int draws = 100000;
  XVec counts = XVec::Zero(4);
  for (int i = 0; i < draws; ++i) {
    auto [zq, s] = stochastic_sample(z, cb, true, rng);
    counts[s.indices(0, 0)] += 1.0;
  }
  double chi2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double e = expected[k] * draws;
    chi2 += (counts[k] - e) * (counts[k] - e) / e;
  }
  CHECK(chi2 < 11.345);
}

TEST_CASE("token grid flattening is frequency-major") {
  TokenGrid g;
  g.indices.resize(2, 3);
  g.indices << 0, 1, 2, 3, 4, 5;
  CHECK(g.flatten() == std::vector<int>{0, 1, 2, 3, 4, 5});
  const TokenGrid back = TokenGrid::unflatten(g.flatten(), 2, 3, Band::lf);
  CHECK(back.indices == g.indices);
}
