#include "dkde/similarity_graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dkde/rng.hpp"

namespace dkde {

std::size_t split_right_size(std::size_t n) {
  if (n < 2) throw std::invalid_argument("split_right_size: n < 2");
  return std::bit_floor(n / 2);
}

NodeKde::NodeKde(const KernelConfig& kernel, const KdeParams& params, std::uint64_t seed, int dim,
                 std::size_t exact_cutoff)
    : kernel_(kernel), params_(params), seed_(seed), cutoff_(exact_cutoff), X_(dim) {}

void NodeKde::initialise(const PointSet& X, const PointSet& Q) {
  X_ = X;
  Q_.clear();
  sampled_.reset();
  if (X.size() > cutoff_) {
    promote();
    for (std::size_t r = 0; r < Q.size(); ++r) sampled_->add_query_point(Q.ids[r], Q.point(r));
  } else {
    for (std::size_t r = 0; r < Q.size(); ++r) add_query_point(Q.ids[r], Q.point(r));
  }
}

void NodeKde::promote() {
  PointSet Q(X_.dim);
  std::vector<PointId> qs = query_ids();
  for (PointId id : qs) Q.push(id, Q_.at(id).first);
  sampled_ = std::make_unique<DynamicKde>(kernel_, params_, seed_, X_.dim);
  sampled_->initialise(X_, Q);
  X_ = PointSet(X_.dim);
  Q_.clear();
}

double NodeKde::add_query_point(PointId id, std::span<const double> q) {
  if (sampled_) return sampled_->add_query_point(id, q);
  if (static_cast<int>(q.size()) != X_.dim) throw std::invalid_argument("dimension mismatch");
  double s = 0.0;
  for (std::size_t r = 0; r < X_.size(); ++r) s += eval_kernel(kernel_, q, X_.point(r));
  Q_[id] = {std::vector<double>(q.begin(), q.end()), s};
  return s;
}

std::vector<PointId> NodeKde::add_data_point(PointId id, std::span<const double> z) {
  if (sampled_) return sampled_->add_data_point(id, z);
  if (static_cast<int>(z.size()) != X_.dim) throw std::invalid_argument("dimension mismatch");
  X_.push(id, z);
  if (X_.size() > cutoff_) {
    auto all = query_ids();
    promote();
    return all;
  }
  std::vector<PointId> changed;
  for (auto& [q, e] : Q_) {
    double k = eval_kernel(kernel_, e.first, z);
    if (k == 0.0) continue;
    e.second += k;
    changed.push_back(q);
  }
  std::sort(changed.begin(), changed.end());
  return changed;
}

bool NodeKde::delete_query_point(PointId id) {
  if (sampled_) return sampled_->delete_query_point(id);
  return Q_.erase(id) > 0;
}

bool NodeKde::has_query(PointId id) const { return sampled_ ? sampled_->has_query(id) : Q_.contains(id); }

double NodeKde::estimate(PointId id) const {
  if (sampled_) return sampled_->estimate(id);
  auto it = Q_.find(id);
  if (it == Q_.end()) throw std::out_of_range("unknown query");
  return it->second.second;
}

std::vector<PointId> NodeKde::query_ids() const {
  if (sampled_) return sampled_->query_ids();
  std::vector<PointId> v;
  for (const auto& [q, e] : Q_) v.push_back(q);
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<PointId> NodeKde::data_ids() const { return sampled_ ? sampled_->data_ids() : X_.ids; }

std::int64_t NodeKde::n() const {
  return sampled_ ? sampled_->n() : static_cast<std::int64_t>(X_.size());
}

void NodeKde::check_invariants(bool deep) const {
  if (sampled_) {
    sampled_->check_invariants(deep);
    return;
  }
  if (X_.size() > cutoff_) throw std::logic_error("exact structure over its cutoff");
  // Sums were accumulated in data order, so a rescan reproduces them bit for bit.
  for (const auto& [q, e] : Q_) {
    double s = 0.0;
    for (std::size_t r = 0; r < X_.size(); ++r) s += eval_kernel(kernel_, e.first, X_.point(r));
    if (s != e.second) throw std::logic_error("exact sum drifted");
  }
}

namespace {

struct EdgeRec {
  std::vector<PathId> paths;
  double w = 0.0;
};

[[noreturn]] void fail(const std::string& what) { throw std::logic_error("graph invariant: " + what); }

}  // namespace

struct SimilarityGraphBuilder::Impl {
  KernelConfig kernel;
  GraphParams params;
  std::uint64_t seed;
  int dim = 0;
  int L = 0;
  std::uint32_t generation = 0;  // kde seeds
  bool sampled = false;          // construct() ran, paths exist

  // Vertices by dense slot.
  absl::flat_hash_map<PointId, std::uint32_t> slot;
  std::vector<PointId> vid;
  std::vector<double> coords;

  std::vector<TreeNode> nodes;
  NodeId root = kNoNode;
  absl::flat_hash_map<PointId, NodeId> leaf_of;

  std::vector<SamplePath> paths;  // slot * L + l
  std::vector<absl::flat_hash_set<PathId>> ends;  // by endpoint slot
  std::vector<absl::flat_hash_set<PathId>> B;     // by endpoint slot
  absl::flat_hash_map<std::uint64_t, EdgeRec> edges;

  std::vector<std::pair<NodeId, PointId>> pending;  // owner counts that hit 0

  std::span<const double> pt(PointId x) const {
    auto it = slot.find(x);
    if (it == slot.end()) throw std::out_of_range("unknown vertex");
    return {coords.data() + static_cast<std::size_t>(it->second) * dim, static_cast<std::size_t>(dim)};
  }

  std::uint32_t add_vertex(PointId id, std::span<const double> z) {
    if (static_cast<int>(z.size()) != dim) throw std::invalid_argument("dimension mismatch");
    if (slot.contains(id)) throw std::invalid_argument("duplicate vertex id");
    auto s = static_cast<std::uint32_t>(vid.size());
    slot[id] = s;
    vid.push_back(id);
    coords.insert(coords.end(), z.begin(), z.end());
    paths.resize(vid.size() * static_cast<std::size_t>(L));
    ends.resize(vid.size());
    B.resize(vid.size());
    return s;
  }

  std::unique_ptr<NodeKde> make_kde(const PointSet& X, const PointSet& Q) {
    auto k = std::make_unique<NodeKde>(
        kernel, params.kde, derive_key(seed, SeedLabel{Purpose::user, generation++, 0, 0, 0x7e, 0}), dim,
        params.exact_cutoff);
    k->initialise(X, Q);
    return k;
  }

  NodeId new_node(NodeId parent, int depth) {
    TreeNode t;
    t.id = static_cast<NodeId>(nodes.size());
    t.parent = parent;
    t.depth = depth;
    nodes.push_back(std::move(t));
    return nodes.back().id;
  }

  NodeId build(const PointSet& X, NodeId parent, int depth) {
    NodeId id = new_node(parent, depth);
    nodes[id].size = X.size();
    if (parent != kNoNode) nodes[id].kde = make_kde(X, PointSet(dim));
    if (X.size() == 1) {
      nodes[id].point = X.ids[0];
      leaf_of[X.ids[0]] = id;
      return id;
    }
    nodes[id].leaf = false;
    std::size_t m = split_right_size(X.size());
    std::vector<std::size_t> lr, rr;
    for (std::size_t r = 0; r < X.size() - m; ++r) lr.push_back(r);
    for (std::size_t r = X.size() - m; r < X.size(); ++r) rr.push_back(r);
    NodeId l = build(X.subset(lr), id, depth + 1);
    NodeId r = build(X.subset(rr), id, depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }

  void init_tree(const PointSet& X, bool root_queries) {
    if (X.empty()) throw std::invalid_argument("empty point set");
    if (X.dim < 1) throw std::invalid_argument("dimension must be positive");
    dim = X.dim;
    L = params.L > 0 ? params.L
                     : 3 * static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(X.size(), 2)))));
    slot.clear();
    vid.clear();
    coords.clear();
    nodes.clear();
    leaf_of.clear();
    edges.clear();
    paths.clear();
    ends.clear();
    B.clear();
    generation = 0;
    sampled = false;
    for (std::size_t r = 0; r < X.size(); ++r) add_vertex(X.ids[r], X.point(r));
    root = build(X, kNoNode, 0);
    // The root structure answers the degree estimates of every vertex.
    nodes[root].kde = make_kde(X, root_queries ? X : PointSet(dim));
  }

  double mu(PointId x) const { return nodes[root].kde->estimate(x); }

  PathId pid_of(PointId owner, int l) const { return slot.at(owner) * static_cast<PathId>(L) + l; }

  void enter(PathId pid, NodeId t) {
    auto& p = paths[pid];
    auto& T = nodes[t];
    p.nodes.push_back(t);
    T.paths.insert(pid);
    ++T.owners[p.owner];
  }

  void leave(PathId pid, NodeId t) {
    auto& T = nodes[t];
    T.paths.erase(pid);
    auto it = T.owners.find(paths[pid].owner);
    if (--it->second == 0) {
      T.owners.erase(it);
      if (!T.leaf) pending.emplace_back(t, paths[pid].owner);
    }
  }

  double child_estimate(NodeId c, PointId x, std::span<const double> q) {
    auto& k = *nodes[c].kde;
    if (!k.has_query(x)) return k.add_query_point(x, q);
    return k.estimate(x);
  }

  // One routing step at internal node t for owner x.
  NodeId step(NodeId t, PointId x, int l, std::uint32_t counter) {
    auto q = pt(x);
    NodeId lc = nodes[t].left, rc = nodes[t].right;
    double ml = child_estimate(lc, x, q);
    double mr = child_estimate(rc, x, q);
    double pl = ml + mr > 0.0 ? ml / (ml + mr)
                              : static_cast<double>(nodes[lc].size) /
                                    static_cast<double>(nodes[lc].size + nodes[rc].size);
    double u = uniform_at(derive_key(seed, SeedLabel{Purpose::route, x, static_cast<std::uint32_t>(l), t, counter, 0}), 0);
    return u < pl ? lc : rc;
  }

  // Continue a path that is registered down to its last node.
  void route(PathId pid) {
    auto& p = paths[pid];
    NodeId t = p.nodes.back();
    while (!nodes[t].leaf) {
      t = step(t, p.owner, p.index, p.counter);
      enter(pid, t);
    }
    paths[pid].endpoint = nodes[t].point;
  }

  void recompute(EdgeRec& e) {
    std::sort(e.paths.begin(), e.paths.end());
    double s = 0.0;
    for (auto pid : e.paths) s += paths[pid].contribution;
    e.w = s;
  }

  void attach(PathId pid) {
    auto& p = paths[pid];
    double mo = mu(p.owner), me = mu(p.endpoint);
    p.scale_min = std::min(mo, me);
    p.contribution = p.scale_min / L;
    auto& e = edges[edge_key(p.owner, p.endpoint)];
    e.paths.push_back(pid);
    recompute(e);
    auto es = slot.at(p.endpoint);
    ends[es].insert(pid);
    if (p.endpoint != p.owner && me <= mo) B[es].insert(pid);
  }

  void detach(PathId pid) {
    auto& p = paths[pid];
    auto it = edges.find(edge_key(p.owner, p.endpoint));
    auto& v = it->second.paths;
    v.erase(std::find(v.begin(), v.end(), pid));
    if (v.empty())
      edges.erase(it);
    else
      recompute(it->second);
    auto es = slot.at(p.endpoint);
    ends[es].erase(pid);
    B[es].erase(pid);
  }

  void sample_new(PointId x, int l) {
    PathId pid = pid_of(x, l);
    auto& p = paths[pid];
    p = SamplePath{};
    p.owner = x;
    p.index = l;
    p.live = true;
    enter(pid, root);
    route(pid);
  }

  void flush_pending() {
    std::sort(pending.begin(), pending.end());
    pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
    for (auto [t, x] : pending) {
      const auto& T = nodes[t];
      if (T.leaf || T.owners.contains(x)) continue;
      for (NodeId c : {T.left, T.right})
        if (nodes[c].kde->has_query(x)) nodes[c].kde->delete_query_point(x);
    }
    pending.clear();
  }

  void convert_leaf(NodeId t, PointId z, std::span<const double> zc) {
    PointId x = nodes[t].point;
    int depth = nodes[t].depth;
    if (t != root) {
      PointSet X(dim);
      X.push(x, pt(x));
      X.push(z, zc);
      nodes[t].kde = make_kde(X, PointSet(dim));
    }
    NodeId l = new_node(t, depth + 1);
    NodeId r = new_node(t, depth + 1);
    for (auto [c, id] : {std::pair{l, x}, std::pair{r, z}}) {
      PointSet X(dim);
      X.push(id, pt(id));
      nodes[c].kde = make_kde(X, PointSet(dim));
      nodes[c].size = 1;
      nodes[c].point = id;
      leaf_of[id] = c;
    }
    auto& T = nodes[t];
    T.leaf = false;
    T.left = l;
    T.right = r;
    T.size = 2;
  }

  // Inserts z (already a vertex) into every structure on its descent.
  // Returns the root-changed vertices; `A` maps each affected path to the
  // node it is resampled from.
  std::vector<PointId> descend(PointId z, std::span<const double> zc,
                               absl::flat_hash_map<PathId, NodeId>& A) {
    auto mark = [&](PathId pid, NodeId from) {
      auto [it, fresh] = A.try_emplace(pid, from);
      if (!fresh && nodes[from].depth < nodes[it->second].depth) it->second = from;
    };
    std::vector<PointId> changed_root = nodes[root].kde->add_data_point(z, zc);
    if (nodes[root].leaf) {
      for (auto pid : nodes[root].paths) mark(pid, root);
      convert_leaf(root, z, zc);
      return changed_root;
    }
    ++nodes[root].size;
    NodeId cur = root;
    for (;;) {
      const auto& T = nodes[cur];
      NodeId c = nodes[T.left].size <= nodes[T.right].size ? T.left : T.right;
      if (nodes[c].leaf) {
        for (auto pid : nodes[cur].paths) mark(pid, cur);
        convert_leaf(c, z, zc);
        return changed_root;
      }
      auto changed = nodes[c].kde->add_data_point(z, zc);
      ++nodes[c].size;
      std::size_t d = static_cast<std::size_t>(nodes[cur].depth);
      for (PointId x : changed)
        for (int l = 0; l < L; ++l) {
          PathId pid = pid_of(x, l);
          const auto& p = paths[pid];
          if (p.live && p.nodes.size() > d && p.nodes[d] == cur) mark(pid, cur);
        }
      cur = c;
    }
  }

  UpdateReport update(PointId z, std::span<const double> zc) {
    if (root == kNoNode) throw std::logic_error("update before construct");
    UpdateReport rep;
    add_vertex(z, zc);
    absl::flat_hash_map<PathId, NodeId> A;
    auto changed_root = descend(z, pt(z), A);
    nodes[root].kde->add_query_point(z, pt(z));
    rep.root_changed = changed_root.size();

    for (int l = 0; l < L; ++l) {
      sample_new(z, l);
      attach(pid_of(z, l));
    }

    // Vertices whose degree estimate moved: rescale every incident path.
    std::vector<PathId> touched;
    for (PointId x : changed_root) {
      for (int l = 0; l < L; ++l) touched.push_back(pid_of(x, l));
      for (auto pid : ends[slot.at(x)]) touched.push_back(pid);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (auto pid : touched) {
      if (paths[pid].owner == z) continue;
      detach(pid);
      attach(pid);
    }
    rep.rescaled = touched.size();

    std::vector<std::pair<PathId, NodeId>> order(A.begin(), A.end());
    std::sort(order.begin(), order.end());
    for (auto [pid, from] : order) {
      auto& p = paths[pid];
      if (p.owner == z) continue;  // sampled on the final tree already
      detach(pid);
      auto pos = static_cast<std::size_t>(nodes[from].depth);
      for (std::size_t t = pos + 1; t < p.nodes.size(); ++t) leave(pid, p.nodes[t]);
      p.nodes.resize(pos + 1);
      ++p.counter;
      route(pid);
      attach(pid);
      ++rep.resampled;
    }
    flush_pending();

    absl::flat_hash_set<std::uint64_t> zs;
    for (int l = 0; l < L; ++l) zs.insert(edge_key(z, paths[pid_of(z, l)].endpoint));
    rep.new_edges = zs.size();
    if (params.self_check) check(false);
    return rep;
  }

  void construct(const PointSet& X) {
    init_tree(X, true);
    sampled = true;
    for (PointId x : vid)
      for (int l = 0; l < L; ++l) sample_new(x, l);
    for (PointId x : vid)
      for (int l = 0; l < L; ++l) attach(pid_of(x, l));
    if (params.self_check) check(false);
  }

  void check(bool deep) const {
    const std::size_t n = vid.size();
    const auto& R = nodes[root];
    if (R.parent != kNoNode || R.depth != 0) fail("root links");
    if (R.size != n) fail("root size");
    if (!R.kde || static_cast<std::size_t>(R.kde->n()) != n) fail("root structure size");
    {
      auto q = R.kde->query_ids();
      auto v = vid;
      std::sort(v.begin(), v.end());
      if (sampled && q != v) fail("root queries are not the vertex set");
    }
    // Tree shape.
    std::size_t leaves = 0;
    for (const auto& T : nodes) {
      if (T.id != root && !T.kde) fail("node without structure");
      if (T.kde && static_cast<std::size_t>(T.kde->n()) != T.size) fail("structure size at node " + std::to_string(T.id));
      if (T.leaf) {
        if (T.size != 1) fail("leaf size");
        if (leaf_of.at(T.point) != T.id) fail("leaf index");
        ++leaves;
      } else {
        const auto& a = nodes[T.left];
        const auto& b = nodes[T.right];
        if (a.parent != T.id || b.parent != T.id) fail("child links");
        if (a.depth != T.depth + 1 || b.depth != T.depth + 1) fail("depths");
        if (a.size + b.size != T.size) fail("size sum at node " + std::to_string(T.id));
      }
      if (deep && T.kde) T.kde->check_invariants(false);
    }
    if (leaves != n) fail("leaf count");
    if (!sampled) return;

    // Path registry closure and owner counts.
    std::vector<absl::flat_hash_map<PointId, std::uint32_t>> owners(nodes.size());
    std::vector<std::size_t> at(nodes.size(), 0);
    for (PathId pid = 0; pid < paths.size(); ++pid) {
      const auto& p = paths[pid];
      if (!p.live) fail("dead path slot");
      if (p.owner != vid[pid / L] || p.index != static_cast<int>(pid % L)) fail("path identity");
      if (p.nodes.empty() || p.nodes.front() != root) fail("path does not start at the root");
      for (std::size_t t = 0; t < p.nodes.size(); ++t) {
        const auto& T = nodes[p.nodes[t]];
        if (t + 1 < p.nodes.size() && T.left != p.nodes[t + 1] && T.right != p.nodes[t + 1]) fail("path skips a level");
        if (!T.paths.contains(pid)) fail("path missing from node registry");
        ++owners[T.id][p.owner];
        ++at[T.id];
      }
      const auto& last = nodes[p.nodes.back()];
      if (!last.leaf || last.point != p.endpoint) fail("path does not end at its endpoint leaf");
      double mo = mu(p.owner), me = mu(p.endpoint);
      if (p.scale_min != std::min(mo, me) || p.contribution != p.scale_min / L) fail("stale path scale");
      bool inB = B[slot.at(p.endpoint)].contains(pid);
      if (inB != (p.endpoint != p.owner && me <= mo)) fail("B membership");
      if (!ends[slot.at(p.endpoint)].contains(pid)) fail("endpoint index");
      auto e = edges.find(edge_key(p.owner, p.endpoint));
      if (e == edges.end() || std::find(e->second.paths.begin(), e->second.paths.end(), pid) == e->second.paths.end())
        fail("path without edge");
    }
    for (const auto& T : nodes) {
      if (T.paths.size() != at[T.id]) fail("node registry holds foreign paths");
      if (T.owners != owners[T.id]) fail("owner counts at node " + std::to_string(T.id));
      if (!T.leaf) {
        std::vector<PointId> want;
        for (const auto& [x, c] : T.owners) want.push_back(x);
        std::sort(want.begin(), want.end());
        for (NodeId c : {T.left, T.right})
          if (nodes[c].kde->query_ids() != want) fail("query provenance below node " + std::to_string(T.id));
      }
    }
    std::size_t backed = 0;
    for (const auto& [k, e] : edges) {
      if (e.paths.empty()) fail("edge without paths");
      double s = 0.0;
      auto v = e.paths;
      std::sort(v.begin(), v.end());
      for (auto pid : v) {
        if (edge_key(paths[pid].owner, paths[pid].endpoint) != k) fail("edge backed by a foreign path");
        s += paths[pid].contribution;
      }
      if (s != e.w) fail("edge weight differs from its paths");
      backed += e.paths.size();
    }
    if (backed != paths.size()) fail("path count");
    for (std::size_t s = 0; s < n; ++s) {
      for (auto pid : ends[s])
        if (paths[pid].endpoint != vid[s]) fail("endpoint index holds a foreign path");
      for (auto pid : B[s])
        if (paths[pid].endpoint != vid[s]) fail("B holds a foreign path");
    }
  }
};

SimilarityGraphBuilder::SimilarityGraphBuilder(const KernelConfig& kernel, const GraphParams& params,
                                               std::uint64_t seed)
    : impl_(std::make_unique<Impl>()) {
  params.kde.validate();
  if (params.L < 0) throw std::invalid_argument("L must be >= 0");
  impl_->kernel = kernel;
  impl_->params = params;
  impl_->seed = seed;
}
SimilarityGraphBuilder::~SimilarityGraphBuilder() = default;
SimilarityGraphBuilder::SimilarityGraphBuilder(SimilarityGraphBuilder&&) noexcept = default;
SimilarityGraphBuilder& SimilarityGraphBuilder::operator=(SimilarityGraphBuilder&&) noexcept = default;

void SimilarityGraphBuilder::initialise_tree(const PointSet& X) { impl_->init_tree(X, false); }
void SimilarityGraphBuilder::construct(const PointSet& X) { impl_->construct(X); }
UpdateReport SimilarityGraphBuilder::update(PointId id, std::span<const double> z) { return impl_->update(id, z); }

WeightedGraph SimilarityGraphBuilder::graph() const {
  WeightedGraph g;
  g.vertices = impl_->vid;
  std::sort(g.vertices.begin(), g.vertices.end());
  g.edges.reserve(impl_->edges.size());
  for (const auto& [k, e] : impl_->edges) g.edges[k] = e.w;
  return g;
}

void SimilarityGraphBuilder::write_edge_list(std::ostream& out) const {
  auto g = graph();
  auto es = g.sorted_edges();
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g", g.total_weight());
  out << "# {\"n\": " << g.vertices.size() << ", \"edges\": " << es.size() << ", \"L\": " << impl_->L
      << ", \"epsilon\": " << impl_->params.kde.epsilon << ", \"seed\": " << impl_->seed
      << ", \"total_weight\": " << buf << "}\n";
  for (const auto& e : es) {
    std::snprintf(buf, sizeof buf, "%.17g", e.w);
    out << e.a << ' ' << e.b << ' ' << buf << '\n';
  }
}

int SimilarityGraphBuilder::L() const { return impl_->L; }
std::size_t SimilarityGraphBuilder::vertex_count() const { return impl_->vid.size(); }
std::size_t SimilarityGraphBuilder::edge_count() const { return impl_->edges.size(); }
double SimilarityGraphBuilder::edge_weight(PointId a, PointId b) const {
  auto it = impl_->edges.find(edge_key(a, b));
  return it == impl_->edges.end() ? 0.0 : it->second.w;
}
double SimilarityGraphBuilder::total_weight() const { return graph().total_weight(); }
double SimilarityGraphBuilder::root_estimate(PointId x) const { return impl_->mu(x); }
const SamplePath& SimilarityGraphBuilder::path(PointId owner, int l) const {
  if (l < 0 || l >= impl_->L) throw std::out_of_range("path index");
  return impl_->paths.at(impl_->pid_of(owner, l));
}
std::vector<PointId> SimilarityGraphBuilder::higher_deg(PointId x) const {
  std::vector<PointId> out;
  for (auto pid : impl_->B.at(impl_->slot.at(x))) out.push_back(impl_->paths[pid].owner);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}
NodeId SimilarityGraphBuilder::root() const { return impl_->root; }
const TreeNode& SimilarityGraphBuilder::node(NodeId id) const { return impl_->nodes.at(id); }
std::size_t SimilarityGraphBuilder::node_count() const { return impl_->nodes.size(); }
std::span<const double> SimilarityGraphBuilder::point(PointId x) const { return impl_->pt(x); }
const KernelConfig& SimilarityGraphBuilder::kernel() const { return impl_->kernel; }

PointId SimilarityGraphBuilder::trial_route(PointId owner, int l, std::uint32_t counter, NodeId from) {
  auto& I = *impl_;
  I.pt(owner);
  NodeId t = from == kNoNode ? I.root : from;
  while (!I.nodes[t].leaf) t = I.step(t, owner, l, counter);
  return I.nodes[t].point;
}

void SimilarityGraphBuilder::check_invariants(bool deep_kde) const { impl_->check(deep_kde); }

}  // namespace dkde
