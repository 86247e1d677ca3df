#pragma once

// Domain types shared by every detector: image cubes, masks, score maps,
// and the background statistics (mean, covariance, precision) estimated
// from a cube.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Spatial extents, slowest-varying first: {rows, cols} or {depth, rows, cols}.
using Dims = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  non_finite,
  singular_matrix,
  model_construction,
  truncation,
  numeric,
  io,
  format,
  invalid_config,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::singular_matrix: return "singular_matrix";
    case ErrorCode::model_construction: return "model_construction";
    case ErrorCode::truncation: return "truncation";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::io: return "io";
    case ErrorCode::format: return "format";
    case ErrorCode::invalid_config: return "invalid_config";
  }
  return "unknown";
}

/// Structured error: a code for scripting, a message for humans, and
/// key/value context (indices, sizes, paths).
class Error : public std::runtime_error {
 public:
  using Context = std::map<std::string, std::string>;

  Error(ErrorCode code, const std::string& message, Context context = {})
      : std::runtime_error(message), code_(code), context_(std::move(context)) {}

  ErrorCode code() const noexcept { return code_; }
  const Context& context() const noexcept { return context_; }

 private:
  ErrorCode code_;
  Context context_;
};

// ---------------------------------------------------------------------------
// Instrumentation
// ---------------------------------------------------------------------------

/// Process-wide counters of the expensive dense operations. Detectors that
/// claim to avoid inversion or eigendecomposition are checked against these.
struct Counters {
  std::atomic<std::uint64_t> covariance_inversions{0};
  std::atomic<std::uint64_t> eigendecompositions{0};

  void reset() {
    covariance_inversions = 0;
    eigendecompositions = 0;
  }
};

inline Counters& counters() {
  static Counters instance;
  return instance;
}

// ---------------------------------------------------------------------------
// Grid helpers
// ---------------------------------------------------------------------------

inline std::size_t pixel_count(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline void validate_dims(const Dims& dims) {
  if (dims.size() != 2 && dims.size() != 3) {
    throw Error(ErrorCode::invalid_argument, "spatial dimensionality must be 2 or 3",
                {{"ndim", std::to_string(dims.size())}});
  }
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (dims[k] == 0) {
      throw Error(ErrorCode::invalid_argument, "spatial extent must be >= 1",
                  {{"axis", std::to_string(k)}});
    }
  }
}

inline std::string dims_to_string(const Dims& dims) {
  std::string out;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) out += "x";
    out += std::to_string(dims[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ImageCube
// ---------------------------------------------------------------------------

/// N pixels on a 2D or 3D grid, m channels each, stored band-interleaved by
/// pixel: data[i * m + b].
class ImageCube {
 public:
  ImageCube() = default;

  ImageCube(Dims dims, std::size_t bands, std::vector<double> data,
            std::vector<std::string> band_labels = {})
      : dims_(std::move(dims)), bands_(bands), data_(std::move(data)),
        band_labels_(std::move(band_labels)) {
    validate_dims(dims_);
    if (bands_ == 0) {
      throw Error(ErrorCode::invalid_argument, "channel count must be >= 1");
    }
    const std::size_t expected = pixel_count(dims_) * bands_;
    if (data_.size() != expected) {
      throw Error(ErrorCode::dimension_mismatch, "cube data length does not match dims x bands",
                  {{"expected", std::to_string(expected)}, {"actual", std::to_string(data_.size())}});
    }
    for (std::size_t k = 0; k < data_.size(); ++k) {
      if (!std::isfinite(data_[k])) {
        throw Error(ErrorCode::non_finite, "cube contains a non-finite value",
                    {{"pixel", std::to_string(k / bands_)}, {"band", std::to_string(k % bands_)}});
      }
    }
    if (band_labels_.empty()) {
      band_labels_.reserve(bands_);
      for (std::size_t b = 0; b < bands_; ++b) band_labels_.push_back(std::to_string(b + 1));
    } else if (band_labels_.size() != bands_) {
      throw Error(ErrorCode::dimension_mismatch, "band label count does not match bands",
                  {{"labels", std::to_string(band_labels_.size())}, {"bands", std::to_string(bands_)}});
    }
  }

  /// Builds a cube from an N x m matrix (one pixel per row).
  static ImageCube from_rows(Dims dims, const Eigen::Ref<const RowMatrix>& rows,
                             std::vector<std::string> band_labels = {}) {
    std::vector<double> data(rows.data(), rows.data() + rows.size());
    return ImageCube(std::move(dims), static_cast<std::size_t>(rows.cols()), std::move(data),
                     std::move(band_labels));
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t ndim() const noexcept { return dims_.size(); }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return bands_ ? data_.size() / bands_ : 0; }
  const std::vector<double>& data() const noexcept { return data_; }
  const std::vector<std::string>& band_labels() const noexcept { return band_labels_; }

  Eigen::Map<const Vector> pixel(std::size_t i) const {
    return Eigen::Map<const Vector>(data_.data() + i * bands_, static_cast<Eigen::Index>(bands_));
  }

  /// N x m view, one pixel per row.
  Eigen::Map<const RowMatrix> rows() const {
    return Eigen::Map<const RowMatrix>(data_.data(), static_cast<Eigen::Index>(pixels()),
                                       static_cast<Eigen::Index>(bands_));
  }

 private:
  Dims dims_;
  std::size_t bands_ = 0;
  std::vector<double> data_;
  std::vector<std::string> band_labels_;
};

// ---------------------------------------------------------------------------
// Mask / ScoreMap
// ---------------------------------------------------------------------------

class Mask {
 public:
  Mask() = default;
  explicit Mask(Dims dims) : dims_(std::move(dims)) {
    validate_dims(dims_);
    values_.assign(pixel_count(dims_), 0);
  }
  Mask(Dims dims, std::vector<std::uint8_t> values) : dims_(std::move(dims)), values_(std::move(values)) {
    validate_dims(dims_);
    if (values_.size() != pixel_count(dims_)) {
      throw Error(ErrorCode::dimension_mismatch, "mask length does not match dims",
                  {{"expected", std::to_string(pixel_count(dims_))},
                   {"actual", std::to_string(values_.size())}});
    }
    for (auto& v : values_) {
      if (v > 1) throw Error(ErrorCode::invalid_argument, "mask values must be 0 or 1");
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<std::uint8_t>& values() const noexcept { return values_; }
  std::uint8_t operator[](std::size_t i) const { return values_[i]; }
  void set(std::size_t i, bool on) { values_[i] = on ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Dims dims_;
  std::vector<std::uint8_t> values_;
};

/// One anomaly score per pixel, aligned with the source cube's grid.
class ScoreMap {
 public:
  ScoreMap() = default;
  ScoreMap(Dims dims, std::vector<double> scores) : dims_(std::move(dims)), scores_(std::move(scores)) {
    validate_dims(dims_);
    if (scores_.size() != pixel_count(dims_)) {
      throw Error(ErrorCode::dimension_mismatch, "score count does not match dims",
                  {{"expected", std::to_string(pixel_count(dims_))},
                   {"actual", std::to_string(scores_.size())}});
    }
    for (std::size_t i = 0; i < scores_.size(); ++i) {
      if (!std::isfinite(scores_[i])) {
        throw Error(ErrorCode::non_finite, "score is not finite", {{"pixel", std::to_string(i)}});
      }
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return scores_.size(); }
  const std::vector<double>& scores() const noexcept { return scores_; }
  double operator[](std::size_t i) const { return scores_[i]; }

  double max() const {
    if (scores_.empty()) throw Error(ErrorCode::invalid_argument, "empty score map");
    return *std::max_element(scores_.begin(), scores_.end());
  }

 private:
  Dims dims_;
  std::vector<double> scores_;
};

// ---------------------------------------------------------------------------
// Summation
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::size_t kSumBlock = 128;

/// Pairwise tree reduction over a list of partial sums. The tree shape only
/// depends on the number of partials, so results are reproducible.
template <class T>
T pairwise_reduce(std::vector<T> parts) {
  while (parts.size() > 1) {
    std::vector<T> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t k = 0; k + 1 < parts.size(); k += 2) next.push_back(parts[k] + parts[k + 1]);
    if (parts.size() % 2) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

}  // namespace detail

/// Per-band mean with blockwise pairwise summation over pixels.
inline Vector band_mean(const ImageCube& cube) {
  const auto rows = cube.rows();
  const auto n = static_cast<std::size_t>(rows.rows());
  if (n == 0) throw Error(ErrorCode::invalid_argument, "cube has no pixels");
  std::vector<Vector> parts;
  for (std::size_t start = 0; start < n; start += detail::kSumBlock) {
    const auto len = static_cast<Eigen::Index>(std::min(detail::kSumBlock, n - start));
    parts.push_back(rows.middleRows(static_cast<Eigen::Index>(start), len).colwise().sum().transpose());
  }
  return detail::pairwise_reduce(std::move(parts)) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// BackgroundStats
// ---------------------------------------------------------------------------

struct BackgroundStats {
  Vector mean;
  Matrix covariance;
  std::optional<Matrix> precision;
  /// Reciprocal condition estimate of (covariance + ridge * I), when inverted.
  std::optional<double> rcond;
  double ridge = 0.0;

  std::size_t bands() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Inverts (covariance + ridge * I) through a Cholesky factorization.
/// Throws singular_matrix with the numerical rank when the matrix is not
/// positive definite.
inline std::pair<Matrix, double> spd_inverse(const Matrix& covariance, double ridge) {
  const auto m = covariance.rows();
  Matrix regularized = covariance;
  regularized.diagonal().array() += ridge;
  counters().covariance_inversions++;

  Eigen::LLT<Matrix> llt(regularized);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  // Below this the factorization is numerically meaningless.
  const double rcond_floor = static_cast<double>(m) * std::numeric_limits<double>::epsilon();
  if (llt.info() != Eigen::Success || !(rcond > rcond_floor)) {
    Eigen::ColPivHouseholderQR<Matrix> qr(regularized);
    qr.setThreshold(rcond_floor);
    throw Error(ErrorCode::singular_matrix,
                "covariance is singular; retry with a positive ridge or fewer bands",
                {{"order", std::to_string(m)},
                 {"rank", std::to_string(qr.rank())},
                 {"rcond", std::to_string(rcond)}});
  }
  Matrix inverse = llt.solve(Matrix::Identity(m, m));
  inverse = (0.5 * (inverse + inverse.transpose())).eval();
  return {std::move(inverse), rcond};
}

/// Mean and biased (divisor N) covariance of all pixels of the cube.
/// The precision is filled only when requested.
inline BackgroundStats estimate_background_stats(const ImageCube& cube, bool compute_precision,
                                                 double ridge = 0.0) {
  if (cube.pixels() < 2) {
    throw Error(ErrorCode::invalid_argument, "background statistics need at least 2 pixels",
                {{"pixels", std::to_string(cube.pixels())}});
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw Error(ErrorCode::invalid_argument, "ridge must be a finite nonnegative value");
  }

  BackgroundStats stats;
  stats.ridge = ridge;
  stats.mean = band_mean(cube);

  const auto rows = cube.rows();
  const auto n = static_cast<std::size_t>(rows.rows());
  const auto m = static_cast<Eigen::Index>(cube.bands());
  std::vector<Matrix> parts;
  for (std::size_t start = 0; start < n; start += detail::kSumBlock) {
    const auto len = static_cast<Eigen::Index>(std::min(detail::kSumBlock, n - start));
    RowMatrix centered = rows.middleRows(static_cast<Eigen::Index>(start), len);
    centered.rowwise() -= stats.mean.transpose();
    Matrix block = Matrix::Zero(m, m);
    block.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    parts.push_back(std::move(block));
  }
  Matrix lower = detail::pairwise_reduce(std::move(parts)) / static_cast<double>(n);
  stats.covariance = lower.selfadjointView<Eigen::Lower>();

  if (compute_precision) {
    auto [precision, rcond] = spd_inverse(stats.covariance, ridge);
    stats.precision = std::move(precision);
    stats.rcond = rcond;
  }
  return stats;
}

/// x - mean.
inline Vector center_pixel(const Eigen::Ref<const Vector>& x, const BackgroundStats& stats) {
  if (x.size() != stats.mean.size()) {
    throw Error(ErrorCode::dimension_mismatch, "pixel length does not match the background mean",
                {{"pixel", std::to_string(x.size())}, {"mean", std::to_string(stats.mean.size())}});
  }
  return x - stats.mean;
}

}  // namespace lad
