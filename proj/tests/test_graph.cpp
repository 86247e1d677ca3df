#include "test_support.hpp"

#include <gtest/gtest.h>

namespace lad {
namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

WeightMatrix spectral_weights(Matrix w) {
  WeightMatrix out;
  out.bands = static_cast<std::size_t>(w.rows());
  out.w = std::move(w);
  return out;
}

// --- partial correlation -----------------------------------------------------

TEST(PartialCorrelation, IdentityPrecisionHasNoEdges) {
  const auto w = partial_correlation_weights(Matrix::Identity(4, 4));
  EXPECT_EQ(w.w, Matrix::Zero(4, 4));
  EXPECT_EQ(w.topology, Topology::spectral);
}

TEST(PartialCorrelation, HandEvaluated) {
  const auto w = partial_correlation_weights(mat2(2, -1, -1, 2));
  EXPECT_DOUBLE_EQ(w.w(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(w.w(1, 0), 0.5);
  EXPECT_EQ(w.w(0, 0), 0.0);
  EXPECT_EQ(w.clamped, 0u);
}

TEST(PartialCorrelation, NegativeWeightsAreClamped) {
  const auto w = partial_correlation_weights(mat2(1, 0.5, 0.5, 1));
  EXPECT_EQ(w.w(0, 1), 0.0);
  EXPECT_EQ(w.clamped, 1u);
}

TEST(PartialCorrelation, Errors) {
  EXPECT_THROW(partial_correlation_weights(mat2(0, 0, 0, 1)), Error);
  EXPECT_THROW(partial_correlation_weights(mat2(1, 0, 0, -2)), Error);
  BackgroundStats no_precision;
  no_precision.mean = Vector::Zero(2);
  no_precision.covariance = Matrix::Identity(2, 2);
  EXPECT_THROW(partial_correlation_weights(no_precision), Error);
}

// --- Cauchy ------------------------------------------------------------------

TEST(Cauchy, Examples) {
  Vector mu(3);
  mu << 1, 2, 3;
  const auto w = cauchy_weights(mu);  // alpha = 2
  EXPECT_DOUBLE_EQ(w.w(0, 1), 0.8);
  EXPECT_DOUBLE_EQ(w.w(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(w.w(1, 2), 0.8);
  EXPECT_EQ(w.w(1, 1), 0.0);

  Vector same = Vector::Constant(3, 7.0);
  EXPECT_EQ(cauchy_weights(same, 1.0).w(0, 2), 1.0);

  Vector unit(2);
  unit << 0.0, 3.0;
  EXPECT_DOUBLE_EQ(cauchy_weights(unit, 3.0).w(0, 1), 0.5);
}

TEST(Cauchy, Errors) {
  Vector mu(2);
  mu << -1, 1;
  EXPECT_THROW(cauchy_weights(mu), Error);  // auto alpha = 0
  EXPECT_THROW(cauchy_weights(mu, 0.0), Error);
  EXPECT_THROW(cauchy_weights(mu, -2.0), Error);
  EXPECT_THROW(cauchy_weights(Vector::Ones(1)), Error);
}

TEST(Cauchy, ScaleCovariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(10, 100);
  for (int trial = 0; trial < 20; ++trial) {
    Vector mu(12);
    for (auto& v : mu) v = u(rng);
    const double c = u(rng) / 7.0;
    const auto a = cauchy_weights(mu);
    const auto b = cauchy_weights(mu * c);
    EXPECT_LE((a.w - b.w).cwiseAbs().maxCoeff(), 1e-12);
    const auto d = cauchy_weights(mu, 3.0);
    const auto e = cauchy_weights(mu * c, 3.0 * c);
    EXPECT_LE((d.w - e.w).cwiseAbs().maxCoeff(), 1e-12);
  }
}

// --- spatial-spectral --------------------------------------------------------

TEST(SpatialSpectral, SingleBandStar) {
  const auto w = spatial_spectral_weights(spectral_weights(Matrix::Zero(1, 1)), 1.0, Connectivity::four);
  ASSERT_EQ(w.order(), 5u);
  Matrix expected = Matrix::Zero(5, 5);
  expected.row(0).tail(4).setOnes();
  expected.col(0).tail(4).setOnes();
  EXPECT_EQ(w.w, expected);
  EXPECT_EQ(w.topology, Topology::spatial_spectral);
}

TEST(SpatialSpectral, ZeroSpatialWeightIsBlockDiagonal) {
  std::mt19937_64 rng(2);
  const auto spectral = test::random_weights(3, rng);
  for (auto c : {Connectivity::four, Connectivity::six}) {
    const auto w = spatial_spectral_weights(spectral, 0.0, c);
    const auto blocks = static_cast<Eigen::Index>(block_count(c));
    ASSERT_EQ(w.w.rows(), 3 * blocks);
    Matrix expected = Matrix::Zero(3 * blocks, 3 * blocks);
    for (Eigen::Index k = 0; k < blocks; ++k) expected.block(3 * k, 3 * k, 3, 3) = spectral.w;
    EXPECT_EQ(w.w, expected);
  }
}

TEST(SpatialSpectral, TwoBandLinks) {
  const auto w = spatial_spectral_weights(spectral_weights(mat2(0, 0.3, 0.3, 0)), 1.0, Connectivity::four);
  ASSERT_EQ(w.order(), 10u);
  // Block 1 is the first neighbor along axis 0 (north).
  EXPECT_EQ(w.w(0, 2), 1.0);
  EXPECT_EQ(w.w(0, 3), 0.0);
  EXPECT_EQ(w.w(1, 3), 1.0);
  EXPECT_EQ(w.w(2, 3), 0.3);
  // Neighbor blocks are not linked to each other.
  EXPECT_EQ(w.w(2, 4), 0.0);
  EXPECT_EQ(w.w(3, 9), 0.0);
  EXPECT_NO_THROW(validate(w));
}

TEST(SpatialSpectral, Errors) {
  const auto spectral = spectral_weights(Matrix::Zero(2, 2));
  EXPECT_THROW(spatial_spectral_weights(spectral, 1.0, Connectivity::none), Error);
  EXPECT_THROW(spatial_spectral_weights(spectral, -1.0, Connectivity::four), Error);
  const auto spatial = spatial_spectral_weights(spectral, 1.0, Connectivity::four);
  EXPECT_THROW(spatial_spectral_weights(spatial, 1.0, Connectivity::four), Error);
}

// --- degree / Laplacian -------------------------------------------------------

TEST(Degree, Examples) {
  EXPECT_EQ(degree_matrix(spectral_weights(Matrix::Zero(3, 3))), Matrix::Zero(3, 3));
  EXPECT_EQ(degree_matrix(spectral_weights(mat2(0, 1, 1, 0))), Matrix::Identity(2, 2));
  Matrix tri(3, 3);
  tri << 0, 1, 2, 1, 0, 3, 2, 3, 0;
  Matrix expected = Vector::LinSpaced(3, 3, 5).asDiagonal();
  EXPECT_EQ(degree_matrix(spectral_weights(tri)), expected);
}

TEST(Laplacian, TwoNode) {
  const Matrix expected = mat2(1, -1, -1, 1);
  const auto comb = build_laplacian(spectral_weights(mat2(0, 1, 1, 0)), LaplacianVariant::combinatorial, Vector::Zero(2));
  EXPECT_EQ(comb.laplacian, expected);
  const auto sym = build_laplacian(spectral_weights(mat2(0, 1, 1, 0)), LaplacianVariant::symmetric_normalized, Vector::Zero(2));
  EXPECT_TRUE(sym.laplacian.isApprox(expected, 1e-15));
  const auto eig = eigendecompose(sym);
  EXPECT_NEAR(eig.eigen->values(0), 0.0, 1e-14);
  EXPECT_NEAR(eig.eigen->values(1), 2.0, 1e-14);
}

TEST(Laplacian, EmptyGraph) {
  for (auto v : {LaplacianVariant::combinatorial, LaplacianVariant::symmetric_normalized}) {
    EXPECT_EQ(build_laplacian(spectral_weights(Matrix::Zero(3, 3)), v, Vector::Zero(3)).laplacian, Matrix::Zero(3, 3));
  }
}

TEST(Laplacian, IsolatedNodeUsesZeroConvention) {
  Matrix w = Matrix::Zero(3, 3);
  w(0, 1) = w(1, 0) = 2.0;
  const auto model = build_laplacian(spectral_weights(w), LaplacianVariant::symmetric_normalized, Vector::Zero(3));
  EXPECT_EQ(model.laplacian.row(2), Vector::Zero(3).transpose());
  EXPECT_EQ(model.laplacian.col(2), Vector::Zero(3));
  EXPECT_TRUE(model.laplacian.allFinite());
}

TEST(Laplacian, RejectsBadWeightsAndMean) {
  EXPECT_THROW(build_laplacian(spectral_weights(mat2(0, 1, 0.5, 0)), LaplacianVariant::combinatorial, Vector::Zero(2)), Error);
  EXPECT_THROW(build_laplacian(spectral_weights(mat2(1, 0, 0, 0)), LaplacianVariant::combinatorial, Vector::Zero(2)), Error);
  EXPECT_THROW(build_laplacian(spectral_weights(mat2(0, -1, -1, 0)), LaplacianVariant::combinatorial, Vector::Zero(2)), Error);
  EXPECT_THROW(build_laplacian(spectral_weights(mat2(0, 1, 1, 0)), LaplacianVariant::combinatorial, Vector::Zero(3)), Error);
}

TEST(Laplacian, CombinatorialProperties) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  for (Eigen::Index n : {2, 5, 16, 33, 64}) {
    const auto w = test::random_weights(n, rng);
    const auto model = build_laplacian(w, LaplacianVariant::combinatorial, Vector::Zero(n));
    EXPECT_EQ(model.laplacian, model.laplacian.transpose());
    EXPECT_LE((model.laplacian * Vector::Ones(n)).cwiseAbs().maxCoeff(), 1e-10);
    for (int trial = 0; trial < 5; ++trial) {
      Vector s(n);
      for (auto& v : s) v = normal(rng);
      const double direct = s.dot(model.laplacian * s);
      const double brute = test::brute_force_quadratic(w.w, s);
      EXPECT_LE(std::abs(direct - brute), 1e-9 * std::max(1.0, std::abs(brute)));
    }
  }
}

TEST(Laplacian, NormalizedSpectrumWithinZeroTwo) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + trial % 20;
    const auto model = eigendecompose(
        build_laplacian(test::random_weights(n, rng, 0.4), LaplacianVariant::symmetric_normalized, Vector::Zero(n)));
    EXPECT_EQ(model.laplacian, model.laplacian.transpose());
    EXPECT_GE(model.eigen->values.minCoeff(), -1e-9);
    EXPECT_LE(model.eigen->values.maxCoeff(), 2.0 + 1e-9);
  }
}

// --- eigendecomposition -------------------------------------------------------

TEST(Eigendecompose, TwoNodeAnalytic) {
  const auto model = eigendecompose(build_laplacian(spectral_weights(mat2(0, 1, 1, 0)), LaplacianVariant::combinatorial, Vector::Zero(2)));
  const auto& eig = *model.eigen;
  EXPECT_NEAR(eig.values(0), 0.0, 1e-15);
  EXPECT_NEAR(eig.values(1), 2.0, 1e-15);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(eig.vectors(0, 0), r, 1e-15);
  EXPECT_NEAR(eig.vectors(1, 0), r, 1e-15);
  EXPECT_NEAR(eig.vectors(0, 1), r, 1e-15);
  EXPECT_NEAR(eig.vectors(1, 1), -r, 1e-15);
}

TEST(Eigendecompose, ZeroLaplacian) {
  const auto model = eigendecompose(build_laplacian(spectral_weights(Matrix::Zero(4, 4)), LaplacianVariant::combinatorial, Vector::Zero(4)));
  EXPECT_EQ(model.eigen->values, Vector::Zero(4));
  EXPECT_EQ(model.eigen->vectors, Matrix::Identity(4, 4));
}

TEST(Eigendecompose, ReconstructsAndIsOrthonormal) {
  std::mt19937_64 rng(4);
  for (auto variant : {LaplacianVariant::combinatorial, LaplacianVariant::symmetric_normalized}) {
    for (Eigen::Index n : {3, 12, 40}) {
      counters().reset();
      const auto model = eigendecompose(build_laplacian(test::random_weights(n, rng), variant, Vector::Zero(n)));
      EXPECT_EQ(counters().eigendecompositions.load(), 1u);
      const auto& eig = *model.eigen;
      for (Eigen::Index j = 1; j < n; ++j) EXPECT_LE(eig.values(j - 1), eig.values(j));
      const Matrix rebuilt = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
      EXPECT_LE((rebuilt - model.laplacian).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + model.laplacian.cwiseAbs().maxCoeff()));
      EXPECT_LE((eig.vectors.transpose() * eig.vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-8);
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (std::abs(eig.vectors(i, j)) > 1e-12) {
            EXPECT_GT(eig.vectors(i, j), 0.0);
            break;
          }
        }
      }
      if (variant == LaplacianVariant::combinatorial) EXPECT_LE(std::abs(eig.values(0)), 1e-8);
    }
  }
}

}  // namespace
}  // namespace lad
