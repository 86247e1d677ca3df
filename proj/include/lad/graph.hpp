#pragma once

// Background graph models: edge weights over the spectral bands (and
// optionally over a pixel's lattice neighbors), degree matrix, Laplacians
// and their eigendecomposition.

#include "lad/core.hpp"

#include <Eigen/Eigenvalues>

namespace lad {

enum class Topology { spectral, spatial_spectral };

/// Lattice neighborhood joined to the center pixel. `none` for spectral graphs.
enum class Connectivity { none = 0, four = 4, six = 6 };

enum class LaplacianVariant { combinatorial, symmetric_normalized };

inline const char* to_string(Topology t) {
  return t == Topology::spectral ? "spectral" : "spatial_spectral";
}
inline const char* to_string(LaplacianVariant v) {
  return v == LaplacianVariant::combinatorial ? "combinatorial" : "symmetric_normalized";
}

/// Number of pixel blocks in a spatial-spectral graph: the center plus its
/// 2d lattice neighbors.
inline std::size_t block_count(Connectivity c) {
  switch (c) {
    case Connectivity::none: return 1;
    case Connectivity::four: return 5;
    case Connectivity::six: return 7;
  }
  return 1;
}

/// Symmetric, nonnegative, zero-diagonal adjacency matrix plus topology tags.
struct WeightMatrix {
  Matrix w;
  Topology topology = Topology::spectral;
  Connectivity connectivity = Connectivity::none;
  /// Bands per pixel block (equals the order for spectral graphs).
  std::size_t bands = 0;
  /// Negative raw weights mapped to zero during construction.
  std::size_t clamped = 0;

  std::size_t order() const noexcept { return static_cast<std::size_t>(w.rows()); }
};

/// Checks the structural invariants; throws model_construction on violation.
inline void validate(const WeightMatrix& weights) {
  const Matrix& w = weights.w;
  if (w.rows() != w.cols()) throw Error(ErrorCode::model_construction, "weight matrix is not square");
  for (Eigen::Index a = 0; a < w.rows(); ++a) {
    if (w(a, a) != 0.0) {
      throw Error(ErrorCode::model_construction, "weight matrix has a self loop", {{"node", std::to_string(a)}});
    }
    for (Eigen::Index b = 0; b < w.cols(); ++b) {
      if (!std::isfinite(w(a, b)) || w(a, b) < 0.0 || w(a, b) != w(b, a)) {
        throw Error(ErrorCode::model_construction, "weight must be finite, nonnegative and symmetric",
                    {{"row", std::to_string(a)}, {"col", std::to_string(b)}});
      }
    }
  }
  const std::size_t expected = weights.bands * block_count(weights.connectivity);
  if (weights.order() != expected) {
    throw Error(ErrorCode::model_construction, "weight matrix order does not match its topology",
                {{"order", std::to_string(weights.order())}, {"expected", std::to_string(expected)}});
  }
}

/// Edge weights from the partial correlations encoded in a precision matrix.
/// Negative partial correlations are clamped to zero to keep the graph
/// nonnegative; the number of clamped pairs is reported.
inline WeightMatrix partial_correlation_weights(const Matrix& precision) {
  const auto m = precision.rows();
  if (m == 0 || precision.cols() != m) {
    throw Error(ErrorCode::model_construction, "precision must be a nonempty square matrix");
  }
  for (Eigen::Index a = 0; a < m; ++a) {
    if (!(precision(a, a) > 0.0)) {
      throw Error(ErrorCode::model_construction, "precision diagonal must be strictly positive",
                  {{"band", std::to_string(a)}});
    }
  }
  WeightMatrix out;
  out.bands = static_cast<std::size_t>(m);
  out.w = Matrix::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const double q = 0.5 * (precision(a, b) + precision(b, a));
      double w = -q / std::sqrt(precision(a, a) * precision(b, b));
      if (w < 0.0) {
        w = 0.0;
        ++out.clamped;
      }
      out.w(a, b) = out.w(b, a) = w;
    }
  }
  return out;
}

inline WeightMatrix partial_correlation_weights(const BackgroundStats& stats) {
  if (!stats.precision) {
    throw Error(ErrorCode::model_construction, "partial-correlation weights need the precision matrix");
  }
  return partial_correlation_weights(*stats.precision);
}

/// The scaling used when no alpha is given: the average band mean.
inline double auto_cauchy_alpha(const Eigen::Ref<const Vector>& mean) {
  return mean.mean();
}

/// Cauchy similarity of band means: w_ab = 1 / (1 + ((mu_a - mu_b) / alpha)^2).
/// Touches neither the covariance nor any matrix inversion.
inline WeightMatrix cauchy_weights(const Eigen::Ref<const Vector>& mean, std::optional<double> alpha = {}) {
  const auto m = mean.size();
  if (m < 2) throw Error(ErrorCode::invalid_argument, "Cauchy weights need at least 2 bands");
  const double scale = alpha ? *alpha : auto_cauchy_alpha(mean);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::invalid_argument,
                alpha ? "Cauchy alpha must be positive" : "automatic Cauchy alpha (mean of band means) is not positive",
                {{"alpha", std::to_string(scale)}});
  }
  WeightMatrix out;
  out.bands = static_cast<std::size_t>(m);
  out.w = Matrix::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const double r = (mean(a) - mean(b)) / scale;
      out.w(a, b) = out.w(b, a) = 1.0 / (1.0 + r * r);
    }
  }
  return out;
}

/// Joins a pixel's bands with the same bands of its 2d lattice neighbors.
///
/// Block 0 is the center pixel; blocks 1..2d are the neighbors in the order
/// (-axis0, +axis0, -axis1, +axis1[, -axis2, +axis2]). Every block carries a
/// copy of the spectral weights; same-band nodes of the center and each
/// neighbor are linked by `spatial_weight`. Neighbor blocks are not linked to
/// each other.
inline WeightMatrix spatial_spectral_weights(const WeightMatrix& spectral, double spatial_weight,
                                             Connectivity connectivity) {
  if (spectral.topology != Topology::spectral) {
    throw Error(ErrorCode::model_construction, "spatial-spectral graphs are built from a spectral graph");
  }
  if (connectivity == Connectivity::none) {
    throw Error(ErrorCode::invalid_argument, "connectivity must be 4 (2D) or 6 (3D)");
  }
  if (!(spatial_weight >= 0.0) || !std::isfinite(spatial_weight)) {
    throw Error(ErrorCode::invalid_argument, "spatial weight must be finite and nonnegative");
  }
  const auto m = static_cast<Eigen::Index>(spectral.bands);
  const auto blocks = static_cast<Eigen::Index>(block_count(connectivity));
  WeightMatrix out;
  out.topology = Topology::spatial_spectral;
  out.connectivity = connectivity;
  out.bands = spectral.bands;
  out.clamped = spectral.clamped;
  out.w = Matrix::Zero(blocks * m, blocks * m);
  for (Eigen::Index k = 0; k < blocks; ++k) out.w.block(k * m, k * m, m, m) = spectral.w;
  for (Eigen::Index k = 1; k < blocks; ++k) {
    for (Eigen::Index b = 0; b < m; ++b) {
      out.w(b, k * m + b) = spatial_weight;
      out.w(k * m + b, b) = spatial_weight;
    }
  }
  return out;
}

/// Row sums of W (the diagonal of the degree matrix).
inline Vector degree_vector(const WeightMatrix& weights) { return weights.w.rowwise().sum(); }

inline Matrix degree_matrix(const WeightMatrix& weights) { return degree_vector(weights).asDiagonal(); }

struct Eigensystem {
  /// Ascending.
  Vector values;
  /// Orthonormal columns, matching `values`.
  Matrix vectors;
};

namespace detail {

/// Dense symmetric eigensolver, ascending eigenvalues, each eigenvector's
/// first non-negligible component made positive.
inline Eigensystem symmetric_eigen(const Matrix& a) {
  counters().eigendecompositions++;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::numeric, "symmetric eigensolver did not converge",
                {{"order", std::to_string(a.rows())}});
  }
  Eigensystem out{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
    auto col = out.vectors.col(j);
    const double tol = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > tol) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

struct GraphModel {
  WeightMatrix weights;
  Vector degree;
  LaplacianVariant variant = LaplacianVariant::symmetric_normalized;
  Matrix laplacian;
  std::optional<Eigensystem> eigen;
  /// Band mean subtracted from every pixel block before scoring.
  Vector mean;

  std::size_t order() const noexcept { return static_cast<std::size_t>(laplacian.rows()); }
  std::size_t bands() const noexcept { return weights.bands; }
  Topology topology() const noexcept { return weights.topology; }
};

/// Combinatorial L = D - W, or symmetric normalized D^-1/2 L D^-1/2 where a
/// zero-degree node gets D^-1/2 = 0.
inline GraphModel build_laplacian(WeightMatrix weights, LaplacianVariant variant, Vector mean) {
  validate(weights);
  if (static_cast<std::size_t>(mean.size()) != weights.bands) {
    throw Error(ErrorCode::dimension_mismatch, "model mean length does not match the band count",
                {{"mean", std::to_string(mean.size())}, {"bands", std::to_string(weights.bands)}});
  }
  GraphModel model;
  model.degree = degree_vector(weights);
  model.variant = variant;
  Matrix l = -weights.w;
  l.diagonal() = model.degree;
  if (variant == LaplacianVariant::symmetric_normalized) {
    const Vector inv_sqrt = model.degree.unaryExpr([](double d) { return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0; });
    l = inv_sqrt.asDiagonal() * l * inv_sqrt.asDiagonal();
    l = (0.5 * (l + l.transpose())).eval();
  }
  model.laplacian = std::move(l);
  model.weights = std::move(weights);
  model.mean = std::move(mean);
  return model;
}

/// Attaches L = U diag(lambda) U^T with ascending eigenvalues.
inline GraphModel eigendecompose(GraphModel model) {
  model.eigen = detail::symmetric_eigen(model.laplacian);
  return model;
}

}  // namespace lad
