#pragma once

#include "tvq/nn.hpp"
#include "tvq/rng.hpp"
#include "tvq/types.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace tvq::test {

inline Grid random_grid(int c, int h, int w, Rng& rng, double scale = 1.0) {
  Grid g(c, h, w);
  for (int i = 0; i < g.m.rows(); ++i)
    for (int j = 0; j < g.m.cols(); ++j) g.m(i, j) = scale * rng.normal();
  return g;
}

inline XMat random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  XMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline XVec random_vector(int n, Rng& rng, double scale = 1.0) {
  XVec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

/// Central finite differences over sampled coordinates of each parameter.
/// Call after one forward+backward pass has filled the gradients; loss_fn
/// re-runs the forward. Returns the max relative error.
inline double fd_max_rel_err(const std::vector<nn::ParamEntry>& params,
                             const std::function<double()>& loss_fn, Rng& rng,
                             int coords_per_param = 4, double eps = 1e-5) {
  double worst = 0.0;
  for (const auto& p : params) {
    const int total = static_cast<int>(p.value->size());
    for (int s = 0; s < std::min(coords_per_param, total); ++s) {
      const int idx = rng.randint(total);
      double* cell = p.value->data() + idx;
      const double saved = *cell;
      *cell = saved + eps;
      const double up = loss_fn();
      *cell = saved - eps;
      const double down = loss_fn();
      *cell = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double analytic = *(p.grad->data() + idx);
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(fd - analytic) / denom);
    }
  }
  return worst;
}

/// Scratch directory under the system temp root, fresh per call.
inline std::string scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("tvq_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace tvq::test
