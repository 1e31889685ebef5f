#pragma once

// Undirected, unweighted sensor-network topology and its Laplacian.

#include <cmath>
#include <queue>
#include <utility>
#include <vector>

#include "dkf/matkit.hpp"

namespace dkf {

class Topology {
 public:
  /// Adjacency must be square, symmetric, 0/1 valued with zero diagonal.
  explicit Topology(Matrix adjacency) : adjacency_(std::move(adjacency)) {
    require_square(adjacency_, "Topology");
    const auto n = adjacency_.rows();
    if (n < 1) throw DimensionError("Topology: at least one node required");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (adjacency_(i, i) != 0.0) {
        throw std::invalid_argument("Topology: self loop at node " +
                                    std::to_string(i));
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = adjacency_(i, j);
        if (v != 0.0 && v != 1.0) {
          throw std::invalid_argument("Topology: adjacency entries must be 0/1");
        }
        if (v != adjacency_(j, i)) {
          throw std::invalid_argument("Topology: adjacency must be symmetric");
        }
      }
    }
  }

  static Topology from_edges(Eigen::Index nodes,
                             const std::vector<std::pair<int, int>>& edges) {
    Matrix adj = Matrix::Zero(nodes, nodes);
    for (const auto& [a, b] : edges) {
      if (a < 0 || b < 0 || a >= nodes || b >= nodes) {
        throw std::invalid_argument("Topology: edge endpoint out of range");
      }
      if (a == b) throw std::invalid_argument("Topology: self loop in edge list");
      adj(a, b) = 1.0;
      adj(b, a) = 1.0;
    }
    return Topology(std::move(adj));
  }

  static Topology ring(Eigen::Index nodes) {
    std::vector<std::pair<int, int>> edges;
    if (nodes == 2) {
      edges.emplace_back(0, 1);
    } else if (nodes > 2) {
      for (int i = 0; i < nodes; ++i) {
        edges.emplace_back(i, static_cast<int>((i + 1) % nodes));
      }
    }
    return from_edges(nodes, edges);
  }

  static Topology complete(Eigen::Index nodes) {
    Matrix adj = Matrix::Ones(nodes, nodes);
    adj.diagonal().setZero();
    return Topology(std::move(adj));
  }

  Eigen::Index node_count() const { return adjacency_.rows(); }
  const Matrix& adjacency() const { return adjacency_; }

  std::vector<int> neighbors(Eigen::Index i) const {
    std::vector<int> out;
    for (Eigen::Index j = 0; j < node_count(); ++j) {
      if (adjacency_(i, j) != 0.0) out.push_back(static_cast<int>(j));
    }
    return out;
  }

 private:
  Matrix adjacency_;
};

struct LaplacianSpectrum {
  /// lambda_1 >= ... >= lambda_N (the last one is zero for connected graphs).
  Vector eigenvalues;
  /// Orthonormal T with T L T^T = diag(0, lambda_{N-1}, ..., lambda_1); the
  /// first row is 1^T / sqrt(N).
  Matrix transform;

  double algebraic_connectivity() const {
    const auto n = eigenvalues.size();
    return n >= 2 ? eigenvalues(n - 2) : 0.0;
  }
};

/// L = D - S.
inline Matrix laplacian(const Topology& t) {
  const Matrix& s = t.adjacency();
  Matrix l = -s;
  l.diagonal() = s.rowwise().sum();
  return l;
}

/// Breadth-first search from node 0.
inline bool is_connected(const Topology& t) {
  const auto n = t.node_count();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = true;
  Eigen::Index visited = 1;
  while (!frontier.empty()) {
    const auto i = frontier.front();
    frontier.pop();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (t.adjacency()(i, j) != 0.0 && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = true;
        ++visited;
        frontier.push(j);
      }
    }
  }
  return visited == n;
}

inline LaplacianSpectrum laplacian_spectrum(const Topology& t) {
  if (!is_connected(t)) {
    throw HypothesisError("laplacian_spectrum: graph is not connected");
  }
  const auto n = t.node_count();
  Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian(t));
  if (es.info() != Eigen::Success) {
    throw NumericalError("laplacian_spectrum: eigen-solver failed");
  }
  // Ascending from the solver; column 0 spans the consensus direction.
  LaplacianSpectrum out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvalues(n - 1) = 0.0;
  out.transform = es.eigenvectors().transpose();
  out.transform.row(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  return out;
}

}  // namespace dkf
