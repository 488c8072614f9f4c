#include "tvq/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace tvq {

XMat pca(const XMat& x, int dims) {
  const int n = static_cast<int>(x.rows());
  if (n < 2) throw TvqError("pca: need >= 2 rows");
  const XVec mean = x.colwise().mean().transpose();
  const XMat centered = x.rowwise() - mean.transpose();
  const XMat cov = centered.transpose() * centered / (n - 1);
  Eigen::SelfAdjointEigenSolver<XMat> es(cov);
  if (es.info() != Eigen::Success) throw TvqError("pca: eigendecomposition failed");
  XMat proj(x.cols(), dims);
  for (int k = 0; k < dims; ++k) {
    XVec axis = es.eigenvectors().col(static_cast<int>(x.cols()) - 1 - k);
    int arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0) axis = -axis;
    proj.col(k) = axis;
  }
  return centered * proj;
}

XVec pca_explained_variance(const XMat& x) {
  const int n = static_cast<int>(x.rows());
  const XVec mean = x.colwise().mean().transpose();
  const XMat centered = x.rowwise() - mean.transpose();
  const XMat cov = centered.transpose() * centered / (n - 1);
  Eigen::SelfAdjointEigenSolver<XMat> es(cov);
  XVec lam = es.eigenvalues().cwiseMax(0.0).reverse();
  const double total = lam.sum();
  return total > 0 ? XVec(lam / total) : lam;
}

namespace {

/// Row-conditional Gaussian kernel with a binary search per row for the
/// target perplexity.
XMat tsne_affinities(const XMat& x, double perplexity) {
  const int n = static_cast<int>(x.rows());
  XMat d2(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d2(i, j) = (x.row(i) - x.row(j)).squaredNorm();

  const double target_entropy = std::log(perplexity);
  XMat p = XMat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double lo = 1e-12, hi = 1e12, beta = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
      double sum = 0.0, esum = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double e = std::exp(-beta * d2(i, j));
        sum += e;
        esum += e * d2(i, j);
      }
      if (sum <= 0) {
        beta = lo;
        break;
      }
      const double entropy = std::log(sum) + beta * esum / sum;
      if (std::abs(entropy - target_entropy) < 1e-5) break;
      if (entropy > target_entropy)
        lo = beta, beta = (hi > 1e11) ? beta * 2 : (beta + hi) / 2;
      else
        hi = beta, beta = (beta + lo) / 2;
    }
    double sum = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) sum += std::exp(-beta * d2(i, j));
    for (int j = 0; j < n; ++j)
      if (j != i && sum > 0) p(i, j) = std::exp(-beta * d2(i, j)) / sum;
  }
  // Symmetrize.
  XMat sym = (p + p.transpose()) / (2.0 * n);
  sym = sym.cwiseMax(1e-12);
  return sym;
}

}  // namespace

XMat tsne(const XMat& x, const TsneOptions& opts) {
  const int n = static_cast<int>(x.rows());
  if (n < 4) throw TvqError("tsne: need >= 4 rows");
  const double perplexity = std::min(opts.perplexity, (n - 1) / 3.0);
  XMat p = tsne_affinities(x, perplexity);

  Rng rng = Rng(opts.seed).split("tsne");
  XMat y(n, 2);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 2; ++k) y(i, k) = 1e-4 * rng.normal();

  XMat vel = XMat::Zero(n, 2);
  const int exaggerate_until = std::min(100, opts.iterations / 4);
  for (int iter = 0; iter < opts.iterations; ++iter) {
    const double exaggeration = iter < exaggerate_until ? 4.0 : 1.0;
    // Student-t low-dimensional affinities.
    XMat num(n, n);
    double qsum = 0.0;
    for (int i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double q = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = q;
        num(j, i) = q;
        qsum += 2.0 * q;
      }
    }
    XMat grad = XMat::Zero(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num(i, j) / qsum;
        const double mult = 4.0 * (exaggeration * p(i, j) - q) * num(i, j);
        grad.row(i) += mult * (y.row(i) - y.row(j));
      }
    const double momentum = iter < 250 ? 0.5 : 0.8;
    vel = momentum * vel - opts.learning_rate * grad;
    y += vel;
    y.rowwise() -= y.colwise().mean();
  }
  return y;
}

namespace {
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
}

void write_svg_scatter(const std::string& path, const XMat& coords,
                       const std::vector<int>& groups, const std::string& title) {
  if (coords.cols() != 2) throw TvqError("svg: expected 2-D coordinates");
  std::ofstream out(path);
  if (!out) throw TvqError("svg: cannot write " + path);
  const double w = 640, h = 480, margin = 40;
  double xmin = coords.col(0).minCoeff(), xmax = coords.col(0).maxCoeff();
  double ymin = coords.col(1).minCoeff(), ymax = coords.col(1).maxCoeff();
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-family='sans-serif' "
         "font-size='14'>"
      << title << "</text>\n";
  for (int i = 0; i < coords.rows(); ++i) {
    const double px = margin + (coords(i, 0) - xmin) / (xmax - xmin) * (w - 2 * margin);
    const double py = h - margin - (coords(i, 1) - ymin) / (ymax - ymin) * (h - 2 * margin);
    const int g = i < static_cast<int>(groups.size()) ? groups[i] : 0;
    out << "<circle cx='" << px << "' cy='" << py << "' r='3' fill='"
        << kPalette[((g % 10) + 10) % 10] << "' fill-opacity='0.7'/>\n";
  }
  out << "</svg>\n";
}

void write_coords_csv(const std::string& path, const XMat& coords,
                      const std::vector<std::string>& sources, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw TvqError("csv: cannot write " + path);
  out << "source,label,x,y\n";
  out.precision(8);
  for (int i = 0; i < coords.rows(); ++i)
    out << sources[i] << ',' << labels[i] << ',' << coords(i, 0) << ',' << coords(i, 1) << '\n';
}

}  // namespace tvq
