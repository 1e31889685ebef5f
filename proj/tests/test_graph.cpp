#include <gtest/gtest.h>

#include <random>

#include "dkf/graph.hpp"

using namespace dkf;

namespace {

Topology random_graph(std::mt19937_64& rng, int n, double p) {
  std::bernoulli_distribution coin(p);
  Matrix adj = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng)) adj(i, j) = adj(j, i) = 1.0;
  return Topology(adj);
}

}  // namespace

TEST(Laplacian, SingleEdge) {
  Matrix expect(2, 2);
  expect << 1, -1, -1, 1;
  EXPECT_EQ(laplacian(Topology::ring(2)), expect);
}

TEST(Laplacian, CompleteThree) {
  Matrix expect(3, 3);
  expect << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  EXPECT_EQ(laplacian(Topology::complete(3)), expect);
}

TEST(Laplacian, RingSixSpectrum) {
  const auto sp = laplacian_spectrum(Topology::ring(6));
  Vector expect(6);
  expect << 4, 3, 3, 1, 1, 0;
  EXPECT_LE((sp.eigenvalues - expect).norm(), 1e-12);
  EXPECT_NEAR(sp.algebraic_connectivity(), 1.0, 1e-12);
}

TEST(Laplacian, CompleteConnectivity) {
  EXPECT_NEAR(laplacian_spectrum(Topology::complete(3)).algebraic_connectivity(),
              3.0, 1e-12);
}

TEST(Laplacian, RowSumsZeroAndPsd) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 30; ++rep) {
    const auto t = random_graph(rng, 7, 0.4);
    const Matrix l = laplacian(t);
    EXPECT_LE((l * Vector::Ones(7)).norm(), 1e-14);
    EXPECT_GE(min_sym_eigenvalue(l), -1e-12);
  }
}

TEST(Connectivity, Examples) {
  EXPECT_TRUE(is_connected(Topology::ring(6)));
  const auto split = Topology::from_edges(4, {{0, 1}, {2, 3}});
  EXPECT_FALSE(is_connected(split));
  EXPECT_THROW(laplacian_spectrum(split), HypothesisError);
}

TEST(Connectivity, TraversalMatchesSpectrum) {
  std::mt19937_64 rng(2024);
  int connected = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 3 + rep % 6;
    const auto t = random_graph(rng, n, 0.35);
    Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian(t));
    const Vector ev = es.eigenvalues();  // ascending
    const bool spectral = ev(1) > 1e-9 * std::max(1.0, ev(n - 1));
    EXPECT_EQ(is_connected(t), spectral) << "graph " << rep;
    connected += spectral ? 1 : 0;
  }
  // Both outcomes exercised.
  EXPECT_GT(connected, 5);
  EXPECT_LT(connected, 95);
}

TEST(Spectrum, TransformDiagonalizesAndIsOrthonormal) {
  std::mt19937_64 rng(77);
  int checked = 0;
  while (checked < 30) {
    const auto t = random_graph(rng, 8, 0.5);
    if (!is_connected(t)) continue;
    ++checked;
    const auto sp = laplacian_spectrum(t);
    const Matrix& tr = sp.transform;
    EXPECT_LE((tr * tr.transpose() - Matrix::Identity(8, 8)).norm(), 1e-12);
    Matrix d = tr * laplacian(t) * tr.transpose();
    d.diagonal().setZero();
    EXPECT_LE(d.norm(), 1e-10);
    EXPECT_LE((tr.row(0).transpose() - Vector::Constant(8, 1 / std::sqrt(8.0)))
                  .norm(),
              1e-12);
    for (int i = 0; i + 1 < 8; ++i)
      EXPECT_GE(sp.eigenvalues(i), sp.eigenvalues(i + 1));
  }
}

TEST(Topology, RejectsBadAdjacency) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 1;
  EXPECT_THROW(Topology{a}, std::invalid_argument);
  a(1, 0) = 1;
  a(0, 0) = 1;
  EXPECT_THROW(Topology{a}, std::invalid_argument);
  EXPECT_THROW(Topology::from_edges(3, {{0, 3}}), std::invalid_argument);
}

TEST(Topology, Neighbors) {
  const auto t = Topology::ring(5);
  EXPECT_EQ(t.neighbors(0), (std::vector<int>{1, 4}));
}
