#pragma once

// Ground-truth comparison: confusion counts, SOI (Dice) / F1, ROC sweeps and
// best-threshold search over a grid of threshold fractions.

#include "lad/detect.hpp"

namespace lad {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double t = 0.0;
};

struct BestThreshold {
  double t = 0.0;
  double soi = 0.0;
};

struct EvalReport {
  double t = 0.0;
  Confusion confusion;
  double soi = 0.0;
  std::vector<RocPoint> roc;
  BestThreshold best;
};

namespace detail {

inline void check_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::dimension_mismatch, what, {{"left", dims_to_string(a)}, {"right", dims_to_string(b)}});
  }
}

}  // namespace detail

inline Confusion confusion(const Mask& pred, const Mask& truth) {
  detail::check_same_dims(pred.dims(), truth.dims(), "prediction and truth masks differ in size");
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// F1 = 2 TP / (2 TP + FP + FN).
inline double f1_score(const Confusion& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) throw Error(ErrorCode::invalid_argument, "F1 is undefined when both masks are empty");
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

/// SOI = 2 |A and B| / (|A| + |B|), computed from the masks directly.
inline double soi(const Mask& pred, const Mask& truth) {
  detail::check_same_dims(pred.dims(), truth.dims(), "prediction and truth masks differ in size");
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    a += pred[i];
    b += truth[i];
    both += static_cast<std::size_t>(pred[i] & truth[i]);
  }
  if (a + b == 0) throw Error(ErrorCode::invalid_argument, "SOI is undefined when both masks are empty");
#ifdef LAD_INVARIANT_CHECKS
  const Confusion c = confusion(pred, truth);
  if (2 * both != 2 * c.tp || a + b != 2 * c.tp + c.fp + c.fn) {
    throw Error(ErrorCode::numeric, "SOI/F1 identity violated");
  }
#endif
  return static_cast<double>(2 * both) / static_cast<double>(a + b);
}

/// 51 fractions 0, 0.02, ..., 1.
inline std::vector<double> default_grid(std::size_t steps = 50) {
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) grid[k] = static_cast<double>(k) / static_cast<double>(steps);
  return grid;
}

namespace detail {

inline void check_eval_inputs(const ScoreMap& scores, const Mask& truth, const std::vector<double>& grid) {
  check_same_dims(scores.dims(), truth.dims(), "score map and truth mask differ in size");
  const std::size_t positives = truth.count();
  if (positives == 0 || positives == truth.size()) {
    throw Error(ErrorCode::invalid_argument, "truth mask needs at least one positive and one negative pixel",
                {{"positives", std::to_string(positives)}, {"pixels", std::to_string(truth.size())}});
  }
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "threshold grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= 0.0 && grid[k] <= 1.0) || (k > 0 && grid[k] < grid[k - 1])) {
      throw Error(ErrorCode::invalid_argument, "threshold grid must be sorted ascending within [0, 1]",
                  {{"index", std::to_string(k)}});
    }
  }
}

}  // namespace detail

/// (FPR, TPR, t) for each grid fraction.
inline std::vector<RocPoint> roc_curve(const ScoreMap& scores, const Mask& truth,
                                       const std::vector<double>& grid = default_grid()) {
  detail::check_eval_inputs(scores, truth, grid);
  std::vector<RocPoint> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const Confusion c = confusion(apply_threshold(scores, t), truth);
    out.push_back({static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn),
                   static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn), t});
  }
  return out;
}

/// Grid fraction with the highest SOI; ties go to the smaller t.
inline BestThreshold best_threshold(const ScoreMap& scores, const Mask& truth,
                                    const std::vector<double>& grid = default_grid()) {
  detail::check_eval_inputs(scores, truth, grid);
  BestThreshold best{grid.front(), -1.0};
  for (double t : grid) {
    const double value = soi(apply_threshold(scores, t), truth);
    if (value > best.soi) best = {t, value};
  }
  return best;
}

/// Confusion and SOI at fraction t, plus the ROC sweep and best threshold.
inline EvalReport evaluate(const ScoreMap& scores, const Mask& truth, double t,
                           const std::vector<double>& grid = default_grid()) {
  EvalReport report;
  report.t = t;
  const Mask pred = apply_threshold(scores, t);
  report.confusion = confusion(pred, truth);
  report.soi = soi(pred, truth);
  report.roc = roc_curve(scores, truth, grid);
  report.best = best_threshold(scores, truth, grid);
  return report;
}

}  // namespace lad
