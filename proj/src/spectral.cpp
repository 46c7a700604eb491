#include "gcaps/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gcaps {

namespace {

struct Norms {
  double off = 0.0;
  double diag = 0.0;
};

Norms split_norms(const Tensor& a) {
  const std::size_t n = a.rows();
  Norms norms;
  for (std::size_t i = 0; i < n; ++i) {
    norms.diag += a(i, i) * a(i, i);
    for (std::size_t j = i + 1; j < n; ++j) norms.off += 2.0 * a(i, j) * a(i, j);
  }
  norms.off = std::sqrt(norms.off);
  norms.diag = std::sqrt(norms.diag);
  return norms;
}

// Zeroes a(p,q) with the rotation from Golub & Van Loan (sym.schur2), and
// applies the same rotation to the accumulated eigenvectors.
void rotate(Tensor& a, Tensor& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const std::size_t n = a.rows();
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;

  for (std::size_t k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

SpectralDecomposition eigendecompose_symmetric(const Tensor& m, std::size_t max_sweeps) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw ShapeError("eigendecompose_symmetric: expected a square matrix, got " +
                     shape_to_string(m.shape()));
  }
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-10) {
        throw ContractError("eigendecompose_symmetric: matrix is not symmetric at (" +
                            std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }

  Tensor a = m;
  Tensor v = Tensor::identity(n);
  std::size_t sweep = 0;
  for (;; ++sweep) {
    const Norms norms = split_norms(a);
    if (norms.off == 0.0 || norms.off < 1e-12 * norms.diag) break;
    if (sweep == max_sweeps) {
      throw ConvergenceError("eigendecompose_symmetric: no convergence after " +
                                 std::to_string(max_sweeps) + " sweeps",
                             norms.off);
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  SpectralDecomposition out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors = Tensor({n, n});
  for (std::size_t c = 0; c < n; ++c) {
    out.eigenvalues[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
  }
  return out;
}

Tensor harmonic_distance_matrix(const Tensor& laplacian, double tol) {
  const SpectralDecomposition eig = eigendecompose_symmetric(laplacian);
  const std::size_t n = laplacian.rows();
  const Tensor& phi = eig.eigenvectors;
  Tensor s({n, n});
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double lambda = eig.eigenvalues[k];
        if (lambda <= tol) continue;
        const double d = phi(x, k) - phi(y, k);
        acc += d * d / lambda;
      }
      s(x, y) = acc;
      s(y, x) = acc;
    }
  }
  return s;
}

double max_finite_distance(const Tensor& distances) {
  double best = 0.0;
  const std::size_t n = distances.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && std::isfinite(distances(i, j))) best = std::max(best, distances(i, j));
  return best;
}

Tensor fgsd_node_features(const Tensor& distances, const FgsdConfig& cfg) {
  if (cfg.num_bins == 0) throw ContractError("fgsd_node_features: num_bins must be >= 1");
  const std::size_t n = distances.rows();
  double range = cfg.range_max.value_or(max_finite_distance(distances));
  if (!(range > 0.0)) range = 1.0;
  const double width = range / static_cast<double>(cfg.num_bins);
  const long last = static_cast<long>(cfg.num_bins) - 1;

  Tensor hist({n, cfg.num_bins});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pos = distances(i, j) / width + 1e-9;
      const long bin = std::isfinite(pos) ? std::clamp(static_cast<long>(std::floor(pos)), 0L, last)
                                          : last;
      hist(i, static_cast<std::size_t>(bin)) += 1.0;
    }
    if (cfg.normalize && n > 1) {
      for (std::size_t b = 0; b < cfg.num_bins; ++b) hist(i, b) /= static_cast<double>(n - 1);
    }
  }
  return hist;
}

}  // namespace gcaps
