#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include "dkde/dynamic_kde.hpp"
#include "dkde/graph.hpp"
#include "dkde/points.hpp"

namespace dkde {

using NodeId = std::uint32_t;
using PathId = std::uint32_t;
constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct GraphParams {
  int L = 0;  // 0: 3 * ceil(log2 n) at construction
  // Parameters of every per-node structure. The tree epsilon of 1/log^3 n
  // would need m_bar = log^6 n estimators per block, so it is a parameter.
  KdeParams kde;
  // Structures over at most this many points sum the kernel exactly; they
  // switch to a sampled structure once they outgrow it. 0: always sampled.
  std::size_t exact_cutoff = 64;
  bool self_check = false;  // full invariant scan after every update
};

// Split point of the initial tree: the right child gets the largest power of
// two <= n/2, the left child the rest.
std::size_t split_right_size(std::size_t n);

// The density structure of one tree node: exact sums while small, a
// DynamicKde after that. Same query-maintenance interface as DynamicKde.
class NodeKde {
 public:
  NodeKde(const KernelConfig& kernel, const KdeParams& params, std::uint64_t seed, int dim,
          std::size_t exact_cutoff);

  void initialise(const PointSet& X, const PointSet& Q);
  double add_query_point(PointId id, std::span<const double> q);
  // Ids of queries whose estimate changed; every query when the structure
  // switches to sampling.
  std::vector<PointId> add_data_point(PointId id, std::span<const double> z);
  bool delete_query_point(PointId id);

  bool has_query(PointId id) const;
  double estimate(PointId id) const;
  std::vector<PointId> query_ids() const;
  std::vector<PointId> data_ids() const;
  std::int64_t n() const;
  bool exact() const { return !sampled_; }
  const DynamicKde* sampled() const { return sampled_.get(); }
  void check_invariants(bool deep = false) const;

 private:
  void promote();

  KernelConfig kernel_;
  KdeParams params_;
  std::uint64_t seed_;
  std::size_t cutoff_;
  PointSet X_;
  absl::flat_hash_map<PointId, std::pair<std::vector<double>, double>> Q_;  // coords, sum
  std::unique_ptr<DynamicKde> sampled_;
};

struct TreeNode {
  NodeId id = kNoNode;
  NodeId parent = kNoNode, left = kNoNode, right = kNoNode;
  int depth = 0;
  std::size_t size = 0;
  bool leaf = true;
  PointId point = 0;  // leaves only
  // Every node has one. The root's holds all vertices as queries.
  std::unique_ptr<NodeKde> kde;
  absl::flat_hash_set<PathId> paths;
  // Owner -> number of its paths registered here. An owner with a positive
  // count is a query point of both children's structures.
  absl::flat_hash_map<PointId, std::uint32_t> owners;
};

struct SamplePath {
  PointId owner = 0;
  int index = 0;  // l
  std::vector<NodeId> nodes;  // root to leaf
  PointId endpoint = 0;
  double scale_min = 0.0;     // min of the two root estimates when last scaled
  double contribution = 0.0;  // scale_min / L
  std::uint32_t counter = 0;  // resample count, keys the routing coins
  bool live = false;
};

struct UpdateReport {
  std::size_t resampled = 0;      // |A|
  std::size_t root_changed = 0;   // vertices whose root estimate changed
  std::size_t rescaled = 0;       // paths whose contribution was recomputed
  std::size_t new_edges = 0;      // distinct edges of z after sampling
};

class SimilarityGraphBuilder {
 public:
  SimilarityGraphBuilder(const KernelConfig& kernel, const GraphParams& params,
                         std::uint64_t seed);
  ~SimilarityGraphBuilder();
  SimilarityGraphBuilder(SimilarityGraphBuilder&&) noexcept;
  SimilarityGraphBuilder& operator=(SimilarityGraphBuilder&&) noexcept;

  // The tree alone: per-node structures with empty query sets, no paths.
  void initialise_tree(const PointSet& X);
  // Tree, root structure with Q = X, and L sampled paths per vertex.
  void construct(const PointSet& X);
  // Inserts z into the tree and repairs the graph.
  UpdateReport update(PointId id, std::span<const double> z);

  // Current graph (all vertices, every backed edge).
  WeightedGraph graph() const;
  // `id_i id_j weight` lines sorted by (id_i, id_j), after a one-line header.
  void write_edge_list(std::ostream& out) const;

  int L() const;
  std::size_t vertex_count() const;
  std::size_t edge_count() const;
  double edge_weight(PointId a, PointId b) const;
  double total_weight() const;
  double root_estimate(PointId x) const;
  const SamplePath& path(PointId owner, int l) const;
  std::vector<PointId> higher_deg(PointId x) const;  // owners of paths in B_x

  NodeId root() const;
  const TreeNode& node(NodeId id) const;
  std::size_t node_count() const;
  std::span<const double> point(PointId x) const;
  const KernelConfig& kernel() const;

  // Endpoint of a route for `owner` from `from` (default: the root) with the
  // current estimates and a caller-chosen coin counter. Nothing changes
  // except queries added to node structures on the way, so query provenance
  // no longer holds afterwards.
  PointId trial_route(PointId owner, int l, std::uint32_t counter, NodeId from = kNoNode);

  // Throws std::logic_error on the first broken invariant.
  void check_invariants(bool deep_kde = false) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dkde
