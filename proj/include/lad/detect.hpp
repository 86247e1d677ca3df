#pragma once

// Anomaly scorers (RX detector, Laplacian detector and their truncated and
// spatially-aware variants), the KLT/GFT transforms, cumulative energy and
// thresholding.

#include "lad/graph.hpp"

namespace lad {

// ---------------------------------------------------------------------------
// Truncation
// ---------------------------------------------------------------------------

struct TruncationPolicy {
  enum class Mode { full, fixed, energy };

  Mode mode = Mode::full;
  std::size_t p = 0;
  double psi = 0.99;
  /// Component count actually kept; filled when the policy is applied.
  std::size_t retained_p = 0;

  static TruncationPolicy full() { return {}; }
  static TruncationPolicy fixed(std::size_t p) { return {Mode::fixed, p, 0.99, 0}; }
  static TruncationPolicy energy(double psi = 0.99) { return {Mode::energy, 0, psi, 0}; }
};

struct TruncatedScores {
  ScoreMap scores;
  TruncationPolicy policy;
};

/// Smallest p whose cumulative energy ratio e(p)/e(n) reaches psi.
/// `energies` holds e(1..n), nondecreasing.
inline std::size_t select_p(const std::vector<double>& energies, double psi = 0.99) {
  if (energies.empty()) throw Error(ErrorCode::invalid_argument, "energy curve is empty");
  if (!(psi > 0.0 && psi <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "psi must lie in (0, 1]", {{"psi", std::to_string(psi)}});
  }
  const double total = energies.back();
  if (!(total > 0.0)) throw Error(ErrorCode::truncation, "total energy is zero; p is undefined");
  for (std::size_t p = 1; p <= energies.size(); ++p) {
    if (energies[p - 1] / total >= psi) return p;
  }
  return energies.size();
}

// ---------------------------------------------------------------------------
// Transforms and energy
// ---------------------------------------------------------------------------

/// y = V^T x_centered, with V's columns ordered by descending covariance eigenvalue.
inline Vector klt_transform(const Eigen::Ref<const Vector>& x_centered, const Matrix& basis) {
  if (basis.rows() != x_centered.size()) {
    throw Error(ErrorCode::dimension_mismatch, "KLT basis does not match the pixel length",
                {{"basis", std::to_string(basis.rows())}, {"pixel", std::to_string(x_centered.size())}});
  }
  return basis.transpose() * x_centered;
}

inline const Eigensystem& require_eigen(const GraphModel& model) {
  if (!model.eigen) throw Error(ErrorCode::invalid_argument, "graph model has no eigensystem; eigendecompose it first");
  return *model.eigen;
}

/// s~ = U^T s.
inline Vector gft_transform(const Eigen::Ref<const Vector>& signal, const GraphModel& model) {
  const auto& eig = require_eigen(model);
  if (eig.vectors.rows() != signal.size()) {
    throw Error(ErrorCode::dimension_mismatch, "graph signal does not match the model order",
                {{"signal", std::to_string(signal.size())}, {"order", std::to_string(eig.vectors.rows())}});
  }
  return eig.vectors.transpose() * signal;
}

/// s = U s~.
inline Vector inverse_gft(const Eigen::Ref<const Vector>& coeffs, const GraphModel& model) {
  const auto& eig = require_eigen(model);
  if (eig.vectors.cols() != coeffs.size()) {
    throw Error(ErrorCode::dimension_mismatch, "coefficient vector does not match the model order",
                {{"coeffs", std::to_string(coeffs.size())}, {"order", std::to_string(eig.vectors.cols())}});
  }
  return eig.vectors * coeffs;
}

/// Per-component energy sum_i c_ij^2 over the rows of a coefficient matrix.
inline Vector component_energies(const Eigen::Ref<const RowMatrix>& coeffs) {
  const auto n = static_cast<std::size_t>(coeffs.rows());
  if (n == 0) return Vector::Zero(coeffs.cols());
  std::vector<Vector> parts;
  for (std::size_t start = 0; start < n; start += detail::kSumBlock) {
    const auto len = static_cast<Eigen::Index>(std::min(detail::kSumBlock, n - start));
    parts.push_back(coeffs.middleRows(static_cast<Eigen::Index>(start), len).array().square().colwise().sum().transpose());
  }
  return detail::pairwise_reduce(std::move(parts));
}

/// e(1..n) from per-component energies.
inline std::vector<double> energy_curve(const Eigen::Ref<const Vector>& component_energy) {
  std::vector<double> out(static_cast<std::size_t>(component_energy.size()));
  double running = 0.0;
  for (Eigen::Index j = 0; j < component_energy.size(); ++j) {
    running += component_energy(j);
    out[static_cast<std::size_t>(j)] = running;
  }
  return out;
}

/// Energy of the first p components over all pixels: sum_i sum_{j<=p} c_ij^2.
inline double cumulative_energy(const Eigen::Ref<const RowMatrix>& coeffs, std::size_t p) {
  if (p < 1 || p > static_cast<std::size_t>(coeffs.cols())) {
    throw Error(ErrorCode::invalid_argument, "p out of range",
                {{"p", std::to_string(p)}, {"order", std::to_string(coeffs.cols())}});
  }
  return energy_curve(component_energies(coeffs))[p - 1];
}

// ---------------------------------------------------------------------------
// Graph signals
// ---------------------------------------------------------------------------

/// Linear index of neighbor `k` (1..2d) of pixel `i`, clamped to the grid.
/// Neighbor order: -axis0, +axis0, -axis1, +axis1[, -axis2, +axis2].
inline std::size_t neighbor_index(const Dims& dims, std::size_t i, std::size_t k) {
  const std::size_t axis = (k - 1) / 2;
  const bool forward = (k - 1) % 2 == 1;
  std::size_t stride = 1;
  for (std::size_t a = dims.size(); a-- > axis + 1;) stride *= dims[a];
  const std::size_t coord = (i / stride) % dims[axis];
  if (forward) return coord + 1 < dims[axis] ? i + stride : i;
  return coord > 0 ? i - stride : i;
}

namespace detail {

inline void check_topology(const ImageCube& cube, const GraphModel& model) {
  if (model.bands() != cube.bands()) {
    throw Error(ErrorCode::dimension_mismatch, "model band count does not match the cube",
                {{"model", std::to_string(model.bands())}, {"cube", std::to_string(cube.bands())}});
  }
  if (model.topology() == Topology::spatial_spectral) {
    const std::size_t expected_ndim = model.weights.connectivity == Connectivity::four ? 2 : 3;
    if (cube.ndim() != expected_ndim) {
      throw Error(ErrorCode::dimension_mismatch, "model connectivity does not match the cube dimensionality",
                  {{"connectivity", std::to_string(static_cast<int>(model.weights.connectivity))},
                   {"ndim", std::to_string(cube.ndim())}});
    }
  }
}

/// Writes the centered graph signal of pixel i into `out` (length = model order).
inline void graph_signal(const ImageCube& cube, const GraphModel& model, std::size_t i, Vector& out) {
  const auto m = static_cast<Eigen::Index>(cube.bands());
  out.head(m) = cube.pixel(i) - model.mean;
  if (model.topology() == Topology::spatial_spectral) {
    const std::size_t blocks = block_count(model.weights.connectivity);
    for (std::size_t k = 1; k < blocks; ++k) {
      out.segment(static_cast<Eigen::Index>(k) * m, m) = cube.pixel(neighbor_index(cube.dims(), i, k)) - model.mean;
    }
  }
}

template <class Fn>
void for_each_signal(const ImageCube& cube, const GraphModel& model, Fn&& fn) {
  Vector s(static_cast<Eigen::Index>(model.order()));
  for (std::size_t i = 0; i < cube.pixels(); ++i) {
    graph_signal(cube, model, i, s);
    fn(i, s);
  }
}

/// Blockwise pairwise accumulation of per-pixel vectors.
class BlockAccumulator {
 public:
  explicit BlockAccumulator(Eigen::Index n) : current_(Vector::Zero(n)) {}

  void add(const Vector& v) {
    current_ += v;
    if (++in_block_ == kSumBlock) flush();
  }

  Vector total() {
    flush();
    if (parts_.empty()) return current_;
    return pairwise_reduce(parts_);
  }

 private:
  void flush() {
    if (in_block_ == 0) return;
    parts_.push_back(current_);
    current_.setZero();
    in_block_ = 0;
  }

  Vector current_;
  std::size_t in_block_ = 0;
  std::vector<Vector> parts_;
};

inline std::size_t resolve_p(TruncationPolicy& policy, std::size_t order,
                             const std::function<Vector()>& energies) {
  switch (policy.mode) {
    case TruncationPolicy::Mode::full:
      policy.retained_p = order;
      break;
    case TruncationPolicy::Mode::fixed:
      if (policy.p < 1 || policy.p > order) {
        throw Error(ErrorCode::truncation, "p out of range",
                    {{"p", std::to_string(policy.p)}, {"order", std::to_string(order)}});
      }
      policy.retained_p = policy.p;
      break;
    case TruncationPolicy::Mode::energy:
      policy.retained_p = select_p(energy_curve(energies()), policy.psi);
      break;
  }
  return policy.retained_p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RX detector
// ---------------------------------------------------------------------------

/// Squared Mahalanobis distance of every pixel from the background mean.
inline ScoreMap rxd_score(const ImageCube& cube, const BackgroundStats& stats) {
  if (!stats.precision) throw Error(ErrorCode::invalid_argument, "RX scoring needs the precision matrix");
  if (stats.bands() != cube.bands()) {
    throw Error(ErrorCode::dimension_mismatch, "statistics band count does not match the cube");
  }
  const Matrix& q = *stats.precision;
  std::vector<double> scores(cube.pixels());
  Vector centered(static_cast<Eigen::Index>(cube.bands()));
  for (std::size_t i = 0; i < cube.pixels(); ++i) {
    centered = cube.pixel(i) - stats.mean;
    scores[i] = centered.dot(q * centered);
  }
  return ScoreMap(cube.dims(), std::move(scores));
}

/// Covariance eigenbasis with eigenvalues (kappa) in descending order.
struct CovarianceBasis {
  Vector kappa;
  Matrix vectors;
};

inline CovarianceBasis covariance_basis(const BackgroundStats& stats) {
  auto eig = detail::symmetric_eigen(stats.covariance);
  return {eig.values.reverse(), eig.vectors.rowwise().reverse()};
}

/// Truncated RX score sum_{j<=p} y_j^2 / kappa_j over the p strongest KLT
/// components. Retained eigenvalues at or below 1e-12 * kappa_1 are refused.
inline TruncatedScores rxd_p_score(const ImageCube& cube, const BackgroundStats& stats,
                                   const CovarianceBasis& basis, TruncationPolicy policy) {
  if (stats.bands() != cube.bands() || static_cast<std::size_t>(basis.kappa.size()) != cube.bands()) {
    throw Error(ErrorCode::dimension_mismatch, "statistics band count does not match the cube");
  }
  const auto m = static_cast<Eigen::Index>(cube.bands());
  RowMatrix coeffs(static_cast<Eigen::Index>(cube.pixels()), m);
  Vector centered(m);
  for (std::size_t i = 0; i < cube.pixels(); ++i) {
    centered = cube.pixel(i) - stats.mean;
    coeffs.row(static_cast<Eigen::Index>(i)) = (basis.vectors.transpose() * centered).transpose();
  }
  const std::size_t p = detail::resolve_p(policy, cube.bands(), [&] { return component_energies(coeffs); });

  const double floor = 1e-12 * basis.kappa(0);
  if (!(basis.kappa(static_cast<Eigen::Index>(p) - 1) > floor) || !(basis.kappa(0) > 0.0)) {
    throw Error(ErrorCode::truncation,
                "a retained covariance eigenvalue is numerically zero; choose a smaller p",
                {{"p", std::to_string(p)}, {"kappa_p", std::to_string(basis.kappa(static_cast<Eigen::Index>(p) - 1))}});
  }
  const Vector inv_kappa = basis.kappa.head(static_cast<Eigen::Index>(p)).cwiseInverse();
  std::vector<double> scores(cube.pixels());
  for (std::size_t i = 0; i < cube.pixels(); ++i) {
    const auto y = coeffs.row(static_cast<Eigen::Index>(i)).head(static_cast<Eigen::Index>(p));
    scores[i] = (y.array().square() * inv_kappa.transpose().array()).sum();
  }
  return {ScoreMap(cube.dims(), std::move(scores)), policy};
}

inline TruncatedScores rxd_p_score(const ImageCube& cube, const BackgroundStats& stats, TruncationPolicy policy) {
  return rxd_p_score(cube, stats, covariance_basis(stats), policy);
}

// ---------------------------------------------------------------------------
// Laplacian detector
// ---------------------------------------------------------------------------

/// Direct quadratic form s^T L s of the centered pixel against a spectral
/// model. Uses only a matrix-vector product per pixel.
inline ScoreMap lad_score(const ImageCube& cube, const GraphModel& model) {
  if (model.topology() != Topology::spectral) {
    throw Error(ErrorCode::invalid_argument, "lad_score expects a spectral model; use lad_s_score for spatial models");
  }
  if (model.order() != cube.bands()) {
    throw Error(ErrorCode::dimension_mismatch, "model order does not match the cube band count",
                {{"order", std::to_string(model.order())}, {"bands", std::to_string(cube.bands())}});
  }
  std::vector<double> scores(cube.pixels());
  detail::for_each_signal(cube, model, [&](std::size_t i, const Vector& s) {
    scores[i] = s.dot(model.laplacian * s);
  });
  return ScoreMap(cube.dims(), std::move(scores));
}

/// Spatially-aware variant: the graph signal stacks the centered pixel with
/// its 2d lattice neighbors (clamped at the borders).
inline ScoreMap lad_s_score(const ImageCube& cube, const GraphModel& model) {
  if (model.topology() != Topology::spatial_spectral) {
    throw Error(ErrorCode::dimension_mismatch, "lad_s_score expects a spatial-spectral model");
  }
  detail::check_topology(cube, model);
  std::vector<double> scores(cube.pixels());
  detail::for_each_signal(cube, model, [&](std::size_t i, const Vector& s) {
    scores[i] = s.dot(model.laplacian * s);
  });
  return ScoreMap(cube.dims(), std::move(scores));
}

/// Truncated score sum_{j<=p} lambda_j s~_j^2 over the p lowest graph
/// frequencies. Works for spectral and spatial-spectral models. Eigenvalues
/// are floored at zero so that the partial sums are nondecreasing in p.
inline TruncatedScores lad_p_score(const ImageCube& cube, const GraphModel& model, TruncationPolicy policy) {
  const auto& eig = require_eigen(model);
  detail::check_topology(cube, model);
  const auto n = static_cast<Eigen::Index>(model.order());

  const std::size_t p = detail::resolve_p(policy, model.order(), [&] {
    detail::BlockAccumulator acc(n);
    detail::for_each_signal(cube, model, [&](std::size_t, const Vector& s) {
      acc.add((eig.vectors.transpose() * s).array().square().matrix());
    });
    return acc.total();
  });

  const auto kept = static_cast<Eigen::Index>(p);
  const Matrix basis = eig.vectors.leftCols(kept);
  const Vector lambda = eig.values.head(kept).cwiseMax(0.0);
  std::vector<double> scores(cube.pixels());
  detail::for_each_signal(cube, model, [&](std::size_t i, const Vector& s) {
    const Vector coeffs = basis.transpose() * s;
    scores[i] = (coeffs.array().square() * lambda.array()).sum();
  });
  return {ScoreMap(cube.dims(), std::move(scores)), policy};
}

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

/// Flags pixels with score >= t * max(score). Rounding-level negative scores
/// count as zero, so t = 0 flags every pixel.
inline Mask apply_threshold(const ScoreMap& scores, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "threshold fraction must lie in [0, 1]", {{"t", std::to_string(t)}});
  }
  const double eta = t * std::max(scores.max(), 0.0);
  Mask mask(scores.dims());
  for (std::size_t i = 0; i < scores.size(); ++i) mask.set(i, std::max(scores[i], 0.0) >= eta);
  return mask;
}

}  // namespace lad
