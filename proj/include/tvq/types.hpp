#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace tvq {

using Scalar = double;
using XVec = Eigen::VectorXd;
using XMat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;
using IMat = Eigen::MatrixXi;

/// Dense activation grid: c channels of an h×w plane.
/// Storage is one matrix with a row per channel; plane entry (y, x) of
/// channel k lives at m(k, y * w + x).
struct Grid {
  int c = 0, h = 0, w = 0;
  XMat m;

  Grid() = default;
  Grid(int c_, int h_, int w_) : c(c_), h(h_), w(w_), m(XMat::Zero(c_, h_ * w_)) {}

  Scalar& at(int ch, int y, int x) { return m(ch, y * w + x); }
  Scalar at(int ch, int y, int x) const { return m(ch, y * w + x); }
  bool same_shape(const Grid& o) const { return c == o.c && h == o.h && w == o.w; }
};

using GridBatch = std::vector<Grid>;

struct TvqError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Configuration / compatibility problems (CLI exit code 2).
struct ConfigError : TvqError {
  using TvqError::TvqError;
};

}  // namespace tvq
