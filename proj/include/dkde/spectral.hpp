#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dkde/graph.hpp"

namespace dkde {

constexpr std::size_t kSpectralCap = 4096;

// I - D^{-1/2} A D^{-1/2} over g.vertices in sorted order. A self-loop of
// weight w sets A_vv = w. An isolated vertex gets a row of the identity.
Eigen::MatrixXd normalized_laplacian(const WeightedGraph& g, std::size_t cap = kSpectralCap);

struct EigenPairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

// The `count` smallest eigenpairs of a symmetric matrix (LAPACK dsyevr).
EigenPairs smallest_eigenpairs(const Eigen::MatrixXd& M, int count);

// k-th smallest eigenvalue of the normalized Laplacian, k from 1.
double lambda_k(const WeightedGraph& g, int k, std::size_t cap = kSpectralCap);

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;  // k x d
  double inertia = 0.0;
};

// k-means++ seeding and Lloyd iterations, best inertia over the restarts.
KMeansResult kmeans(const Eigen::MatrixXd& rows, int k, std::uint64_t seed, int restarts = 20,
                    int max_iter = 100);

struct SpectralPartition {
  int k = 0;
  std::vector<PointId> vertices;  // sorted
  std::vector<int> labels;        // aligned with vertices
  std::vector<double> eigenvalues;  // smallest k+1 (fewer if n <= k)
};

// Bottom-k eigenvectors of the normalized Laplacian of the non-isolated
// part, rows scaled to unit length, then k-means. Isolated vertices get
// labels k, k+1, ... one each.
SpectralPartition spectral_clustering(const WeightedGraph& g, int k, std::uint64_t seed = 1,
                                      std::size_t cap = kSpectralCap);

}  // namespace dkde
