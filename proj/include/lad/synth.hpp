#pragma once

// Synthetic anomalies: the mirrored square-line implant mask, class-based
// target implant, and a Gaussian (GMRF) scene sampler for end-to-end tests.

#include "lad/graph.hpp"

#include <numbers>

namespace lad {

// ---------------------------------------------------------------------------
// Counter-based RNG
// ---------------------------------------------------------------------------

/// SplitMix64 in counter mode: draw k of a stream is a pure function of
/// (seed, stream, k), so per-pixel draws do not depend on evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : key_(mix(seed ^ mix(stream + 0x51ED270B27AD3A4FULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL); }

  /// Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on draws 2k and 2k+1.
  double normal(std::uint64_t counter) const {
    const double u1 = (static_cast<double>(bits(2 * counter) >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

// ---------------------------------------------------------------------------
// Square-line mask
// ---------------------------------------------------------------------------

/// Layout of the implant mask. The first line holds squares of side
/// 1..max_side left to right with bottoms aligned; the second line is its
/// point reflection through the layout center (sides in reverse order, tops
/// aligned), separated by `line_gap`. The whole layout is rotated about its
/// center by `rotation` radians (counterclockwise as displayed) and
/// rasterized by sampling pixel centers.
struct SquareLineLayout {
  std::size_t max_side = 6;
  double rotation = std::numbers::pi / 6.0;
  std::size_t square_gap = 2;
  std::size_t line_gap = 3;
  bool mirrored = true;
};

namespace detail {

struct Rect {
  double y0, x0, side;
  bool contains(double y, double x) const { return y >= y0 && y < y0 + side && x >= x0 && x < x0 + side; }
};

inline std::vector<Rect> square_line_rects(const SquareLineLayout& layout, double& height, double& width) {
  const auto n = static_cast<double>(layout.max_side);
  width = n * (n + 1.0) / 2.0 + (n - 1.0) * static_cast<double>(layout.square_gap);
  height = layout.mirrored ? 2.0 * n + static_cast<double>(layout.line_gap) : n;
  std::vector<Rect> rects;
  double x = 0.0;
  for (std::size_t s = 1; s <= layout.max_side; ++s) {
    const auto side = static_cast<double>(s);
    rects.push_back({n - side, x, side});
    if (layout.mirrored) rects.push_back({height - n, width - x - side, side});
    x += side + static_cast<double>(layout.square_gap);
  }
  return rects;
}

}  // namespace detail

inline Mask square_line_mask(const Dims& dims, const SquareLineLayout& layout = {}) {
  validate_dims(dims);
  if (dims.size() != 2) throw Error(ErrorCode::invalid_argument, "square-line masks are 2D");
  if (layout.max_side < 1) throw Error(ErrorCode::invalid_argument, "max_side must be >= 1");
  if (!std::isfinite(layout.rotation)) throw Error(ErrorCode::invalid_argument, "rotation must be finite");

  double height = 0.0, width = 0.0;
  const auto rects = detail::square_line_rects(layout, height, width);
  const auto rows = static_cast<double>(dims[0]);
  const auto cols = static_cast<double>(dims[1]);

  // Integer placement keeps the unrotated layout aligned with the pixel grid.
  const double top = std::floor((rows - height) / 2.0);
  const double left = std::floor((cols - width) / 2.0);
  const double pivot_y = top + height / 2.0;
  const double pivot_x = left + width / 2.0;
  const double c = std::cos(layout.rotation);
  const double s = std::sin(layout.rotation);

  const double half_h = height / 2.0, half_w = width / 2.0;
  const double extent_y = std::abs(c) * half_h + std::abs(s) * half_w;
  const double extent_x = std::abs(s) * half_h + std::abs(c) * half_w;
  if (pivot_y - extent_y < 0.0 || pivot_y + extent_y > rows || pivot_x - extent_x < 0.0 || pivot_x + extent_x > cols) {
    throw Error(ErrorCode::invalid_argument, "square-line layout does not fit in the mask",
                {{"dims", dims_to_string(dims)},
                 {"layout", std::to_string(height) + "x" + std::to_string(width)}});
  }

  Mask mask(dims);
  for (std::size_t r = 0; r < dims[0]; ++r) {
    for (std::size_t col = 0; col < dims[1]; ++col) {
      // Displayed coordinates (x right, y up) -> rotate back by -rotation.
      const double dx = static_cast<double>(col) + 0.5 - pivot_x;
      const double dy_up = -(static_cast<double>(r) + 0.5 - pivot_y);
      const double lx = c * dx + s * dy_up;
      const double ly_up = -s * dx + c * dy_up;
      const double y = -ly_up + half_h;
      const double x = lx + half_w;
      for (const auto& rect : rects) {
        if (rect.contains(y, x)) {
          mask.set(r * dims[1] + col, true);
          break;
        }
      }
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Target implant
// ---------------------------------------------------------------------------

struct ImplantSpec {
  Mask mask;
  /// One integer class label per source pixel.
  std::vector<int> source_labels;
  int k = 0;
  std::uint64_t seed = 0;
};

/// I'(i) = M(i) * Phi(k) + (1 - M(i)) * I(i), where Phi(k) draws a source
/// pixel of class k uniformly, with replacement, independently per masked pixel.
inline ImageCube implant(const ImageCube& target, const ImplantSpec& spec, const ImageCube& source) {
  if (target.bands() != source.bands()) {
    throw Error(ErrorCode::dimension_mismatch, "target and source band counts differ",
                {{"target", std::to_string(target.bands())}, {"source", std::to_string(source.bands())}});
  }
  if (spec.mask.dims() != target.dims()) {
    throw Error(ErrorCode::dimension_mismatch, "implant mask does not match the target",
                {{"mask", dims_to_string(spec.mask.dims())}, {"target", dims_to_string(target.dims())}});
  }
  if (spec.source_labels.size() != source.pixels()) {
    throw Error(ErrorCode::dimension_mismatch, "label map does not match the source",
                {{"labels", std::to_string(spec.source_labels.size())}, {"source", std::to_string(source.pixels())}});
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < spec.source_labels.size(); ++i) {
    if (spec.source_labels[i] == spec.k) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::invalid_argument, "implant class has no source pixels", {{"k", std::to_string(spec.k)}});
  }

  const CounterRng rng(spec.seed, 1);
  const std::size_t m = target.bands();
  std::vector<double> data = target.data();
  for (std::size_t i = 0; i < target.pixels(); ++i) {
    if (!spec.mask[i]) continue;
    auto pick = static_cast<std::size_t>(rng.uniform(i) * static_cast<double>(candidates.size()));
    pick = std::min(pick, candidates.size() - 1);
    const auto src = source.pixel(candidates[pick]);
    std::copy(src.data(), src.data() + m, data.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  return ImageCube(target.dims(), m, std::move(data), target.band_labels());
}

// ---------------------------------------------------------------------------
// GMRF scenes
// ---------------------------------------------------------------------------

/// Precision of a unit-variance AR(1) process across bands (covariance rho^|a-b|).
inline Matrix ar1_precision(std::size_t m, double rho) {
  if (m == 0 || !(std::abs(rho) < 1.0)) throw Error(ErrorCode::invalid_argument, "AR(1) needs m >= 1 and |rho| < 1");
  const auto n = static_cast<Eigen::Index>(m);
  Matrix q = Matrix::Zero(n, n);
  const double scale = 1.0 / (1.0 - rho * rho);
  for (Eigen::Index a = 0; a < n; ++a) {
    q(a, a) = (a == 0 || a == n - 1) ? scale : scale * (1.0 + rho * rho);
    if (n == 1) q(a, a) = 1.0;
    if (a + 1 < n) q(a, a + 1) = q(a + 1, a) = -rho * scale;
  }
  return q;
}

struct GmrfAnomaly {
  Mask mask;
  Vector shift;
};

struct GmrfScene {
  ImageCube cube;
  Mask truth;
};

/// Background pixels i.i.d. N(background_mean, precision^-1) drawn through
/// the symmetric square root of the covariance; anomalous pixels are
/// additionally shifted by `anomaly.shift`.
inline GmrfScene sample_gmrf_scene(const Dims& dims, std::size_t m, const Matrix& precision,
                                   const std::optional<GmrfAnomaly>& anomaly, std::uint64_t seed,
                                   std::optional<Vector> background_mean = {}) {
  validate_dims(dims);
  const auto n = static_cast<Eigen::Index>(m);
  if (m == 0 || precision.rows() != n || precision.cols() != n) {
    throw Error(ErrorCode::dimension_mismatch, "precision must be m x m", {{"m", std::to_string(m)}});
  }
  if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + precision.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::invalid_argument, "precision is not symmetric");
  }
  const auto eig = detail::symmetric_eigen(0.5 * (precision + precision.transpose()));
  if (!(eig.values(0) > 1e-12 * std::max(eig.values(n - 1), 0.0)) || !(eig.values(n - 1) > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "precision is not positive definite",
                {{"min_eigenvalue", std::to_string(eig.values(0))}});
  }
  const Matrix sqrt_cov = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.vectors.transpose();
  const Vector mu = background_mean ? *background_mean : Vector::Zero(n);
  if (mu.size() != n) throw Error(ErrorCode::dimension_mismatch, "background mean length must be m");

  Mask truth(dims);
  if (anomaly) {
    if (anomaly->mask.dims() != dims) throw Error(ErrorCode::dimension_mismatch, "anomaly mask does not match dims");
    if (anomaly->shift.size() != n) throw Error(ErrorCode::dimension_mismatch, "anomaly shift length must be m");
    truth = anomaly->mask;
  }

  const CounterRng rng(seed, 2);
  const std::size_t pixels = pixel_count(dims);
  std::vector<double> data(pixels * m);
  Vector z(n);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (Eigen::Index b = 0; b < n; ++b) z(b) = rng.normal(i * m + static_cast<std::size_t>(b));
    Vector x = mu + sqrt_cov * z;
    if (anomaly && truth[i]) x += anomaly->shift;
    std::copy(x.data(), x.data() + n, data.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  return {ImageCube(dims, m, std::move(data)), std::move(truth)};
}

}  // namespace lad
