#include "dkde/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <lapacke.h>

#include "dkde/metrics.hpp"
#include "dkde/rng.hpp"

namespace dkde {

Eigen::MatrixXd normalized_laplacian(const WeightedGraph& g, std::size_t cap) {
  const std::size_t n = g.vertices.size();
  if (n > cap) throw std::invalid_argument("graph exceeds the dense solver cap");
  std::vector<PointId> vs = g.vertices;
  std::sort(vs.begin(), vs.end());
  absl::flat_hash_map<PointId, Eigen::Index> idx;
  for (std::size_t i = 0; i < n; ++i) idx[vs[i]] = static_cast<Eigen::Index>(i);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [k, w] : g.edges) {
    auto a = idx.at(edge_lo(k)), b = idx.at(edge_hi(k));
    A(a, b) = w;
    A(b, a) = w;
  }
  Eigen::VectorXd d = A.rowwise().sum();
  Eigen::VectorXd s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = d[i] > 0 ? 1.0 / std::sqrt(d[i]) : 0.0;
  Eigen::MatrixXd Lm = -(s.asDiagonal() * A * s.asDiagonal());
  Lm.diagonal().array() += 1.0;
  return Lm;
}

EigenPairs smallest_eigenpairs(const Eigen::MatrixXd& M, int count) {
  const lapack_int n = static_cast<lapack_int>(M.rows());
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix is not square");
  if (count < 1 || count > n) throw std::invalid_argument("eigenpair count out of range");
  Eigen::MatrixXd a = M;  // column-major copy, overwritten
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, count);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(count));
  lapack_int m = 0;
  lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, a.data(), n, 0.0, 0.0, 1, count, 0.0, &m,
                                   w.data(), z.data(), n, isuppz.data());
  if (info != 0 || m != count) throw std::runtime_error("dsyevr failed, info " + std::to_string(info));
  return {w.head(count), z};
}

double lambda_k(const WeightedGraph& g, int k, std::size_t cap) {
  auto Lm = normalized_laplacian(g, cap);
  if (k < 1 || k > Lm.rows()) throw std::invalid_argument("lambda_k: k out of range");
  return smallest_eigenpairs(Lm, k).values[k - 1];
}

KMeansResult kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed, int restarts, int max_iter) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= n");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  Stream rs(seed, 0x4b4d);
  std::vector<double> dist(n);
  for (int rep = 0; rep < restarts; ++rep) {
    Eigen::MatrixXd C(k, d);
    // k-means++: first center uniform, then proportional to squared distance.
    C.row(0) = X.row(static_cast<Eigen::Index>(rs.below(n)));
    for (Eigen::Index i = 0; i < n; ++i) dist[i] = (X.row(i) - C.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      double tot = 0.0;
      for (double v : dist) tot += v;
      Eigen::Index pick = n - 1;
      if (tot > 0) {
        double u = rs.uniform() * tot, acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += dist[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<Eigen::Index>(rs.below(n));
      }
      C.row(c) = X.row(pick);
      for (Eigen::Index i = 0; i < n; ++i) dist[i] = std::min(dist[i], (X.row(i) - C.row(c)).squaredNorm());
    }
    std::vector<int> lab(n, -1);
    double inertia = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      bool moved = false;
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        int bc = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          double v = (X.row(i) - C.row(c)).squaredNorm();
          if (v < bd) {
            bd = v;
            bc = c;
          }
        }
        if (lab[i] != bc) moved = true;
        lab[i] = bc;
        inertia += bd;
      }
      if (!moved) break;
      Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k, d);
      std::vector<double> cnt(k, 0.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        S.row(lab[i]) += X.row(i);
        cnt[lab[i]] += 1;
      }
      for (int c = 0; c < k; ++c)
        if (cnt[c] > 0) C.row(c) = S.row(c) / cnt[c];  // an empty cluster keeps its center
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = lab;
      best.centers = C;
    }
  }
  return best;
}

SpectralPartition spectral_clustering(const WeightedGraph& g, int k, std::uint64_t seed, std::size_t cap) {
  if (k < 1) throw std::invalid_argument("spectral_clustering: k < 1");
  if (g.vertices.size() > cap) throw std::invalid_argument("graph exceeds the dense solver cap");
  SpectralPartition out;
  out.k = k;
  out.vertices = g.vertices;
  std::sort(out.vertices.begin(), out.vertices.end());
  out.labels.assign(out.vertices.size(), -1);
  auto deg = degrees(g);
  WeightedGraph core;
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < out.vertices.size(); ++i)
    if (deg[out.vertices[i]] > 0) {
      core.vertices.push_back(out.vertices[i]);
      pos.push_back(i);
    }
  int next = k;
  for (std::size_t i = 0; i < out.vertices.size(); ++i)
    if (deg[out.vertices[i]] <= 0) out.labels[i] = next++;
  const auto m = static_cast<Eigen::Index>(core.vertices.size());
  if (m == 0) return out;
  for (const auto& [key, w] : g.edges)
    if (w > 0) core.edges[key] = w;  // zero-weight edges may touch isolated vertices
  auto Lm = normalized_laplacian(core, cap);
  int want = static_cast<int>(std::min<Eigen::Index>(k + 1, m));
  auto ep = smallest_eigenpairs(Lm, want);
  out.eigenvalues.assign(ep.values.data(), ep.values.data() + want);
  int kk = static_cast<int>(std::min<Eigen::Index>(k, m));
  Eigen::MatrixXd U = ep.vectors.leftCols(kk);
  for (Eigen::Index i = 0; i < m; ++i) {
    double nr = U.row(i).norm();
    if (nr > 0) U.row(i) /= nr;
  }
  auto km = kmeans(U, kk, seed);
  for (Eigen::Index i = 0; i < m; ++i) out.labels[pos[i]] = km.labels[i];
  return out;
}

}  // namespace dkde
