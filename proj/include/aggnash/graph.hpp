#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aggnash/error.hpp"
#include "aggnash/linalg.hpp"
#include "aggnash/rng.hpp"

namespace aggnash {

/// Undirected edge between players `i` and `j` (0-based).
struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Matrices that `GraphTopology::kron_apply` can apply blockwise.
enum class GraphOperator { laplacian, pseudo_inverse, centering };

/// Connected, unweighted, undirected communication graph together with its
/// Laplacian L, the Moore-Penrose inverse L⁺ and the extreme nonzero
/// eigenvalues of L. Immutable after construction.
class GraphTopology {
 public:
  /// Eigenvalues of L below this threshold are treated as zero.
  static constexpr double kZeroEigenvalueTol = 1e-9;

  static GraphTopology build(std::size_t players, std::span<const Edge> edges) {
    if (players == 0) {
      throw Error(Errc::invalid_argument, "graph needs at least one node");
    }
    GraphTopology g;
    g.n_ = players;
    g.neighbors_.resize(players);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const Edge& e : edges) {
      if (e.i >= players || e.j >= players) {
        throw Error(Errc::invalid_edge, "edge {" + std::to_string(e.i + 1) + "," +
                                            std::to_string(e.j + 1) +
                                            "} references a node outside 1.." +
                                            std::to_string(players));
      }
      if (e.i == e.j) {
        throw Error(Errc::invalid_edge,
                    "self-loop at node " + std::to_string(e.i + 1));
      }
      const auto key = std::minmax(e.i, e.j);
      if (!seen.insert(key).second) {
        throw Error(Errc::invalid_edge, "duplicate edge {" +
                                            std::to_string(key.first + 1) + "," +
                                            std::to_string(key.second + 1) + "}");
      }
      g.edges_.push_back({key.first, key.second});
      g.neighbors_[e.i].push_back(e.j);
      g.neighbors_[e.j].push_back(e.i);
    }

    g.laplacian_ = Mat::Zero(players, players);
    for (const Edge& e : g.edges_) {
      g.laplacian_(e.i, e.j) -= 1.0;
      g.laplacian_(e.j, e.i) -= 1.0;
      g.laplacian_(e.i, e.i) += 1.0;
      g.laplacian_(e.j, e.j) += 1.0;
    }

    Eigen::SelfAdjointEigenSolver<Mat> eig(g.laplacian_);
    const Vec& values = eig.eigenvalues();
    const Mat& vectors = eig.eigenvectors();
    std::size_t zeros = 0;
    g.pinv_ = Mat::Zero(players, players);
    g.lambda_min_nz_ = std::numeric_limits<double>::infinity();
    g.lambda_max_ = 0.0;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      if (values(k) < kZeroEigenvalueTol) {
        ++zeros;
        continue;
      }
      g.pinv_ += (1.0 / values(k)) * vectors.col(k) * vectors.col(k).transpose();
      g.lambda_min_nz_ = std::min(g.lambda_min_nz_, values(k));
      g.lambda_max_ = std::max(g.lambda_max_, values(k));
    }
    if (zeros != 1) {
      throw Error(Errc::disconnected_graph,
                  "Laplacian has " + std::to_string(zeros) +
                      " zero eigenvalues; the graph has that many components");
    }
    if (players == 1) g.lambda_min_nz_ = 0.0;  // no nonzero spectrum
    return g;
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const {
    return neighbors_.at(i);
  }
  std::size_t degree(std::size_t i) const { return neighbors_.at(i).size(); }

  const Mat& laplacian() const noexcept { return laplacian_; }
  const Mat& pseudo_inverse() const noexcept { return pinv_; }
  Mat centering() const {
    return Mat::Identity(n_, n_) -
           Mat::Constant(n_, n_, 1.0 / static_cast<double>(n_));
  }

  /// Smallest nonzero eigenvalue of L (0 for the single-node graph).
  double lambda_min_nonzero() const noexcept { return lambda_min_nz_; }
  double lambda_max() const noexcept { return lambda_max_; }

  /// out = (M ⊗ Iₙ) v without forming the Kronecker product. `v` holds N
  /// consecutive blocks of length `block`.
  void kron_apply_into(GraphOperator op, const Eigen::Ref<const Vec>& v,
                       std::size_t block, Eigen::Ref<Vec> out) const {
    check_dims(v.size(), block);
    if (out.size() != v.size()) {
      throw Error(Errc::dimension_mismatch, "output size differs from input");
    }
    const auto n = static_cast<Eigen::Index>(block);
    switch (op) {
      case GraphOperator::laplacian:
        for (std::size_t i = 0; i < n_; ++i) {
          auto oi = out.segment(static_cast<Eigen::Index>(i) * n, n);
          oi = static_cast<double>(neighbors_[i].size()) *
               v.segment(static_cast<Eigen::Index>(i) * n, n);
          for (std::size_t j : neighbors_[i]) {
            oi -= v.segment(static_cast<Eigen::Index>(j) * n, n);
          }
        }
        break;
      case GraphOperator::pseudo_inverse:
        for (std::size_t i = 0; i < n_; ++i) {
          auto oi = out.segment(static_cast<Eigen::Index>(i) * n, n);
          oi.setZero();
          for (std::size_t j = 0; j < n_; ++j) {
            oi += pinv_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                  v.segment(static_cast<Eigen::Index>(j) * n, n);
          }
        }
        break;
      case GraphOperator::centering: {
        Vec mean = Vec::Zero(n);
        for (std::size_t j = 0; j < n_; ++j) {
          mean += v.segment(static_cast<Eigen::Index>(j) * n, n);
        }
        mean /= static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i) {
          out.segment(static_cast<Eigen::Index>(i) * n, n) =
              v.segment(static_cast<Eigen::Index>(i) * n, n) - mean;
        }
        break;
      }
    }
  }

  Vec kron_apply(GraphOperator op, const Eigen::Ref<const Vec>& v,
                 std::size_t block) const {
    Vec out(v.size());
    kron_apply_into(op, v, block, out);
    return out;
  }

 private:
  GraphTopology() = default;

  void check_dims(Eigen::Index len, std::size_t block) const {
    if (block == 0 || static_cast<std::size_t>(len) != n_ * block) {
      throw Error(Errc::dimension_mismatch,
                  "stacked vector of length " + std::to_string(len) +
                      " is not N*n = " + std::to_string(n_) + "*" +
                      std::to_string(block));
    }
  }

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
  Mat laplacian_;
  Mat pinv_;
  double lambda_min_nz_ = 0.0;
  double lambda_max_ = 0.0;
};

/// Converts 1-based index pairs (as written in configs) to edges.
inline std::vector<Edge> edges_from_one_based(
    std::span<const std::pair<long long, long long>> pairs) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a < 1 || b < 1) {
      throw Error(Errc::invalid_edge, "player indices in configs start at 1");
    }
    edges.push_back({static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1)});
  }
  return edges;
}

/// Erdős–Rényi G(N, p) conditioned on connectivity by rejection.
inline GraphTopology random_connected_graph(std::size_t players, double edge_probability,
                                            RandomStream& rng, int max_attempts = 1000) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < players; ++i) {
      for (std::size_t j = i + 1; j < players; ++j) {
        if (rng.bernoulli(edge_probability)) edges.push_back({i, j});
      }
    }
    try {
      return GraphTopology::build(players, edges);
    } catch (const Error& e) {
      if (e.code() != Errc::disconnected_graph) throw;
    }
  }
  throw Error(Errc::disconnected_graph,
              "no connected sample after " + std::to_string(max_attempts) + " attempts");
}

}  // namespace aggnash
