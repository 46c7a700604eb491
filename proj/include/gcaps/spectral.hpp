#ifndef GCAPS_SPECTRAL_HPP
#define GCAPS_SPECTRAL_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gcaps/tensor.hpp"

namespace gcaps {

/// Eigenpairs of a symmetric matrix; column n of `eigenvectors` pairs with eigenvalues[n].
struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Tensor eigenvectors;
  std::size_t sweeps = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/**
 * Cyclic Jacobi rotations on a symmetric matrix.
 *
 * Stops once the off-diagonal Frobenius norm drops below 1e-12 times the
 * diagonal norm; gives up after `max_sweeps` full sweeps.
 */
SpectralDecomposition eigendecompose_symmetric(const Tensor& m, std::size_t max_sweeps = 100);

struct FgsdConfig {
  std::size_t num_bins = 20;
  /// Upper edge of the histogram; unset means fit it from data.
  std::optional<double> range_max;
  double zero_eigen_tolerance = 1e-8;
  /// Divide each row by its count instead of emitting raw counts.
  bool normalize = false;
};

/// S(x,y) = Σ over eigenvalues above `tol` of (φ_n(x) - φ_n(y))² / λ_n.
Tensor harmonic_distance_matrix(const Tensor& laplacian, double tol = 1e-8);

/// Largest finite off-diagonal entry of a distance matrix (0 when there is none).
double max_finite_distance(const Tensor& distances);

/**
 * Per-node histogram of harmonic distances to every other node.
 *
 * Bins split [0, range_max] evenly; values past range_max land in the last
 * bin. A value within 1e-9 bin widths below an interior edge is counted in
 * the upper bin, so exact edge values are not split by rounding noise.
 */
Tensor fgsd_node_features(const Tensor& distances, const FgsdConfig& cfg);

}  // namespace gcaps

#endif  // GCAPS_SPECTRAL_HPP
