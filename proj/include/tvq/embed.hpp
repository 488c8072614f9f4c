#pragma once

#include "tvq/rng.hpp"
#include "tvq/types.hpp"

#include <string>
#include <vector>

namespace tvq {

/// First `dims` principal components of the rows of X (deterministic sign
/// convention: each axis's largest-magnitude loading is positive).
XMat pca(const XMat& x, int dims = 2);

/// Fraction of total variance captured by each principal axis.
XVec pca_explained_variance(const XMat& x);

struct TsneOptions {
  double perplexity = 30.0;  // lowered automatically for small N
  int iterations = 500;
  double learning_rate = 100.0;
  std::uint64_t seed = 0;
};

/// Exact (O(N^2)) t-SNE to 2 dimensions with early exaggeration and seeded
/// Gaussian initialization; deterministic for a fixed seed.
XMat tsne(const XMat& x, const TsneOptions& opts);

/// Static scatter plot; `groups` selects the marker color per row.
void write_svg_scatter(const std::string& path, const XMat& coords,
                       const std::vector<int>& groups, const std::string& title);

/// Coordinate table: source,label,x,y per row.
void write_coords_csv(const std::string& path, const XMat& coords,
                      const std::vector<std::string>& sources, const std::vector<int>& labels);

}  // namespace tvq
