#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "dkde/baselines.hpp"
#include "dkde/datasets.hpp"
#include "dkde/rng.hpp"
#include "dkde/similarity_graph.hpp"

using namespace dkde;

namespace {

KernelConfig gauss(double s) { return KernelConfig{KernelKind::gaussian, s, 1}; }

// Sampled structures everywhere unless a cutoff is given, so the routing
// tests exercise the estimators rather than exact sums.
GraphParams params(double C = 4.0, int L = 0, bool check = true, std::size_t exact_cutoff = 0) {
  GraphParams g;
  g.L = L;
  g.kde.C = C;
  g.exact_cutoff = exact_cutoff;
  g.self_check = check;
  return g;
}

PointSet random_points(std::size_t n, int d, std::uint64_t seed, PointId first = 0, double scale = 1.0) {
  Stream rs(seed);
  PointSet P(d);
  std::vector<double> p(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& v : p) v = scale * rs.normal();
    P.push(first + static_cast<PointId>(r), p);
  }
  return P;
}

PointSet rows(const PointSet& P, std::size_t from, std::size_t to) {
  std::vector<std::size_t> r(to - from);
  std::iota(r.begin(), r.end(), from);
  return P.subset(r);
}

// Sum of k(x, y) over the points stored below node t.
double kernel_mass(const SimilarityGraphBuilder& g, NodeId t, PointId x) {
  double s = 0.0;
  for (PointId y : g.node(t).kde->data_ids())
    s += kernel_from_sq(g.kernel(), squared_distance(g.point(x), g.point(y)));
  return s;
}

std::set<PointId> leaves_below(const SimilarityGraphBuilder& g, NodeId t) {
  auto ids = g.node(t).kde->data_ids();
  return {ids.begin(), ids.end()};
}

double sum_of_contributions(const SimilarityGraphBuilder& g, const std::vector<PointId>& vs) {
  double s = 0.0;
  for (PointId x : vs)
    for (int l = 0; l < g.L(); ++l) s += g.path(x, l).contribution;
  return s;
}

int leaf_depth_spread(const SimilarityGraphBuilder& g) {
  int lo = 1 << 30, hi = -1;
  for (NodeId t = 0; t < g.node_count(); ++t)
    if (g.node(t).leaf) {
      lo = std::min(lo, g.node(t).depth);
      hi = std::max(hi, g.node(t).depth);
    }
  return hi - lo;
}

}  // namespace

TEST(TreeSplit, RightSizeIsLargestPowerOfTwoAtMostHalf) {
  for (std::size_t n = 2; n <= 3000; ++n) {
    std::size_t m = 1;
    while (2 * m <= n / 2) m *= 2;  // oracle by doubling
    ASSERT_EQ(split_right_size(n), m) << n;
  }
  EXPECT_THROW(split_right_size(1), std::invalid_argument);
}

TEST(TreeSplit, FivePointsSplitThreeTwo) {
  SimilarityGraphBuilder g(gauss(1.0), params(), 1);
  g.initialise_tree(random_points(5, 2, 3));
  const auto& R = g.node(g.root());
  ASSERT_FALSE(R.leaf);
  EXPECT_EQ(g.node(R.left).size, 3u);
  EXPECT_EQ(g.node(R.right).size, 2u);
  EXPECT_EQ(leaves_below(g, R.left), (std::set<PointId>{0, 1, 2}));
  EXPECT_EQ(leaves_below(g, R.right), (std::set<PointId>{3, 4}));
  // Child structures start with empty query sets.
  EXPECT_TRUE(g.node(R.left).kde->query_ids().empty());
  g.check_invariants(true);
}

TEST(TreeSplit, EightPointsArePerfect) {
  SimilarityGraphBuilder g(gauss(1.0), params(), 1);
  g.initialise_tree(random_points(8, 2, 3));
  const auto& R = g.node(g.root());
  EXPECT_EQ(g.node(R.left).size, 4u);
  EXPECT_EQ(g.node(R.right).size, 4u);
  EXPECT_EQ(g.node_count(), 15u);
  for (NodeId t = 0; t < g.node_count(); ++t) {
    if (g.node(t).leaf) {
      EXPECT_EQ(g.node(t).depth, 3);
    }
  }
}

TEST(TreeSplit, SinglePointIsALeaf) {
  SimilarityGraphBuilder g(gauss(1.0), params(), 1);
  g.initialise_tree(random_points(1, 2, 3));
  EXPECT_TRUE(g.node(g.root()).leaf);
  EXPECT_EQ(g.node_count(), 1u);
  EXPECT_THROW(g.initialise_tree(PointSet(2)), std::invalid_argument);
}

// The split rule keeps the left part below 3n/4, so depth stays within
// log_{4/3} n. Leaf depths can differ by 2: 7 points split (5,2) and the
// 5-side goes (3,2), then (2,1).
TEST(TreeSplit, FreshTreesFollowTheSplitRuleEverywhere) {
  for (std::size_t n : {3u, 6u, 7u, 13u, 100u, 777u}) {
    SimilarityGraphBuilder g(gauss(1.0), params(), 1);
    g.initialise_tree(random_points(n, 2, n));
    int deepest = 0;
    for (NodeId t = 0; t < g.node_count(); ++t) {
      const auto& T = g.node(t);
      deepest = std::max(deepest, T.depth);
      if (T.leaf) continue;
      EXPECT_EQ(g.node(T.right).size, split_right_size(T.size));
      EXPECT_LT(4 * g.node(T.left).size, 3 * T.size + 4);
    }
    EXPECT_LE(deepest, std::ceil(std::log(static_cast<double>(n)) / std::log(4.0 / 3.0)));
  }
  SimilarityGraphBuilder g(gauss(1.0), params(), 1);
  g.initialise_tree(random_points(7, 2, 7));
  EXPECT_EQ(leaf_depth_spread(g), 2);
}

TEST(SimilarityGraph, ConstructionAccounting) {
  auto X = random_points(64, 2, 5);
  SimilarityGraphBuilder g(gauss(0.7), params(), 9);
  g.construct(X);
  const int L = g.L();
  EXPECT_EQ(L, 3 * 6);
  EXPECT_LE(g.edge_count(), static_cast<std::size_t>(L) * 64);
  // One path per (vertex, l), each a root-to-leaf chain ending at its endpoint.
  std::size_t paths = 0;
  for (PointId x = 0; x < 64; ++x)
    for (int l = 0; l < L; ++l) {
      const auto& p = g.path(x, l);
      ++paths;
      EXPECT_EQ(p.nodes.front(), g.root());
      EXPECT_EQ(g.node(p.nodes.back()).point, p.endpoint);
      EXPECT_EQ(p.contribution, std::min(g.root_estimate(x), g.root_estimate(p.endpoint)) / L);
    }
  EXPECT_EQ(paths, 64u * L);
  std::vector<PointId> vs(64);
  std::iota(vs.begin(), vs.end(), 0);
  EXPECT_NEAR(g.total_weight(), sum_of_contributions(g, vs), 1e-12 * g.total_weight());
  g.check_invariants(true);
}

TEST(SimilarityGraph, TwoPointInstance) {
  auto X = random_points(2, 2, 7);
  SimilarityGraphBuilder g(gauss(1.0), params(16.0, 4), 3);
  g.construct(X);
  double s = 0.0;
  for (PointId x = 0; x < 2; ++x)
    for (int l = 0; l < 4; ++l) {
      const auto& p = g.path(x, l);
      EXPECT_TRUE(p.endpoint == 0 || p.endpoint == 1);
      EXPECT_EQ(p.nodes.size(), 2u);
      s += p.contribution;
    }
  // Three possible edges: two self-loops and the pair.
  double w = g.edge_weight(0, 0) + g.edge_weight(1, 1) + g.edge_weight(0, 1);
  EXPECT_NEAR(w, s, 1e-15);
  EXPECT_EQ(g.graph().total_weight(), w);
}

TEST(SimilarityGraph, RejectsBadInput) {
  GraphParams bad;
  bad.L = -1;
  EXPECT_THROW(SimilarityGraphBuilder(gauss(1.0), bad, 1), std::invalid_argument);
  SimilarityGraphBuilder g(gauss(1.0), params(), 1);
  std::vector<double> z{0.0, 0.0};
  EXPECT_THROW(g.update(0, z), std::logic_error);
  g.construct(random_points(8, 2, 1));
  EXPECT_THROW(g.update(3, z), std::invalid_argument);  // duplicate id
  std::vector<double> z3{0.0, 0.0, 0.0};
  EXPECT_THROW(g.update(99, z3), std::invalid_argument);
}

// Two blobs far enough apart that every cross kernel value underflows to 0.
// The right child's estimate for a left point is then exactly 0, and the
// route goes left with probability 1 whenever the left estimate is positive.
TEST(SimilarityGraph, DegenerateSplitRoutesToThePositiveChild) {
  auto A = random_points(32, 2, 1, 0, 0.3);
  auto Bp = random_points(32, 2, 2, 32, 0.3);
  for (std::size_t r = 0; r < Bp.size(); ++r) Bp.coords[2 * r] += 1000.0;
  PointSet X = A;
  for (std::size_t r = 0; r < Bp.size(); ++r) X.push(Bp.ids[r], Bp.point(r));
  SimilarityGraphBuilder g(gauss(1.0), params(16.0), 4);
  g.construct(X);
  const auto& R = g.node(g.root());
  int checked = 0;
  for (PointId x = 0; x < 64; ++x) {
    double ml = g.node(R.left).kde->estimate(x);
    double mr = g.node(R.right).kde->estimate(x);
    NodeId own = x < 32 ? R.left : R.right;
    if ((own == R.left ? mr : ml) != 0.0) continue;
    if ((own == R.left ? ml : mr) == 0.0) continue;
    ++checked;
    for (int l = 0; l < g.L(); ++l) EXPECT_EQ(g.path(x, l).nodes[1], own);
  }
  EXPECT_GT(checked, 50);
}

// Left-routing frequency at the root over 500 coin counters: within 0.05 of
// the probability the structures imply, and that probability within the
// distortion the per-child (1 +- eps) guarantees allow around the exact
// kernel-mass ratio.
TEST(SimilarityGraph, RoutingFrequencyMatchesExactMass) {
  auto X = random_points(64, 2, 8);
  const double eps = 0.5;
  SimilarityGraphBuilder g(gauss(1.0), params(16.0, 0, false), 12);
  g.construct(X);
  const auto& R = g.node(g.root());
  auto left = leaves_below(g, R.left);
  for (PointId x : {0u, 17u, 40u, 63u}) {
    int went_left = 0;
    for (std::uint32_t c = 1000; c < 1500; ++c) went_left += left.count(g.trial_route(x, 0, c));
    double freq = went_left / 500.0;
    double ml = g.node(R.left).kde->estimate(x), mr = g.node(R.right).kde->estimate(x);
    ASSERT_GT(ml + mr, 0.0);
    EXPECT_NEAR(freq, ml / (ml + mr), 0.05) << x;
    double a = kernel_mass(g, R.left, x), b = kernel_mass(g, R.right, x);
    double lo = a * (1 - eps) / (a * (1 - eps) + b * (1 + eps));
    double hi = a * (1 + eps) / (a * (1 + eps) + b * (1 - eps));
    EXPECT_GE(freq, lo - 0.05) << x;
    EXPECT_LE(freq, hi + 0.05) << x;
  }
}

// Traversal frequency through each depth-2 node against the bracket
// [m/(2M) - delta, 2m/M + delta], m and M exact kernel masses. The bracket
// presumes every child estimate is accurate; a node whose mass is below 1
// estimates 0 (no level exceeds mu_0 = 1), so the bandwidth is wide enough
// that every 4-point node carries mass above 1.
TEST(SimilarityGraph, RoutingFidelityBracket) {
  auto X = random_points(16, 2, 21);
  SimilarityGraphBuilder g(gauss(0.1), params(16.0, 0, false), 5);
  g.construct(X);
  const double delta = 0.06;
  std::vector<NodeId> depth2;
  for (NodeId t = 0; t < g.node_count(); ++t)
    if (g.node(t).depth == 2) depth2.push_back(t);
  ASSERT_EQ(depth2.size(), 4u);
  for (PointId x : {0u, 5u, 11u}) {
    std::map<PointId, int> hits;
    const int trials = 1000;
    for (std::uint32_t c = 0; c < trials; ++c) ++hits[g.trial_route(x, 1, 5000 + c)];
    double M = kernel_mass(g, g.root(), x);
    for (NodeId t : depth2) ASSERT_GT(kernel_mass(g, t, x), 1.0);
    for (NodeId t : depth2) {
      int through = 0;
      for (PointId y : leaves_below(g, t)) through += hits[y];
      double f = static_cast<double>(through) / trials;
      double m = kernel_mass(g, t, x);
      EXPECT_GE(f, m / (2 * M) - delta) << x << " node " << t;
      EXPECT_LE(f, 2 * m / M + delta) << x << " node " << t;
    }
  }
}

TEST(SimilarityGraph, ReplayingCoinsReproducesEveryPath) {
  auto X = random_points(40, 3, 13);
  SimilarityGraphBuilder g(gauss(1.2), params(4.0, 0, false), 77);
  g.construct(X);
  for (PointId x = 0; x < 40; ++x)
    for (int l = 0; l < g.L(); ++l) EXPECT_EQ(g.trial_route(x, l, 0), g.path(x, l).endpoint);
}

TEST(SimilarityGraph, DeterministicInSeed) {
  auto X = random_points(50, 2, 2);
  auto P = random_points(20, 2, 3, 50);
  std::string a, b;
  for (std::string* out : {&a, &b}) {
    SimilarityGraphBuilder g(gauss(1.0), params(2.0, 0, false), 31);
    g.construct(X);
    for (std::size_t r = 0; r < P.size(); ++r) g.update(P.ids[r], P.point(r));
    std::ostringstream os;
    g.write_edge_list(os);
    *out = os.str();
  }
  EXPECT_EQ(a, b);
}

// Resampling from a mid-tree node has the endpoint law of a fresh sample
// conditioned on passing that node. Two-sample chi-square on 2000 + 2000
// draws, cells with small expected counts pooled.
TEST(SimilarityGraph, ResampleMatchesConditionedFreshSample) {
  auto X = random_points(256, 2, 40);
  SimilarityGraphBuilder g(gauss(0.5), params(4.0, 6, false), 3);
  g.construct(X);
  const auto& R = g.node(g.root());
  const PointId x = 10;
  // The child of the root that x reaches most often, one level further down.
  std::map<PointId, int> fresh, mid;
  NodeId from = g.path(x, 0).nodes[2];
  auto below = leaves_below(g, from);
  int nfresh = 0;
  for (std::uint32_t c = 0; nfresh < 2000 && c < 200000; ++c) {
    PointId e = g.trial_route(x, 0, 100000 + c);
    if (!below.count(e)) continue;
    ++fresh[e];
    ++nfresh;
  }
  ASSERT_EQ(nfresh, 2000);
  for (std::uint32_t c = 0; c < 2000; ++c) ++mid[g.trial_route(x, 0, 900000 + c, from)];
  (void)R;
  // Pool cells so every pooled cell holds at least 10 draws in total.
  std::vector<std::pair<double, double>> cells;
  double a = 0, b = 0;
  for (PointId y : below) {
    a += fresh[y];
    b += mid[y];
    if (a + b >= 10) {
      cells.push_back({a, b});
      a = b = 0;
    }
  }
  if (a + b > 0) {
    if (cells.empty()) cells.push_back({0, 0});
    cells.back().first += a;
    cells.back().second += b;
  }
  double chi2 = 0.0;
  for (auto [u, v] : cells) chi2 += (u - v) * (u - v) / (u + v);
  int dof = static_cast<int>(cells.size()) - 1;
  ASSERT_GE(dof, 1);
  // Wilson-Hilferty upper 1% point of chi-square.
  double z = 2.326, k = dof;
  double crit = k * std::pow(1 - 2 / (9 * k) + z * std::sqrt(2 / (9 * k)), 3);
  EXPECT_LT(chi2, crit) << "dof " << dof;
}

TEST(SimilarityGraph, InsertingIntoTwoPointsGivesFreshThreePointShape) {
  auto X = random_points(3, 2, 4);
  SimilarityGraphBuilder g(gauss(1.0), params(4.0, 3), 6);
  g.construct(rows(X, 0, 2));
  g.update(2, X.point(2));
  SimilarityGraphBuilder f(gauss(1.0), params(4.0, 3), 6);
  f.initialise_tree(X);
  const auto& R = g.node(g.root());
  const auto& F = f.node(f.root());
  EXPECT_EQ(g.node(R.left).size, f.node(F.left).size);
  EXPECT_EQ(g.node(R.right).size, f.node(F.right).size);
  EXPECT_EQ(g.node(R.left).size, 2u);
  // The old point stays on the left of the new node.
  const auto& N = g.node(R.left);
  EXPECT_EQ(g.node(N.left).point, 0u);
  EXPECT_EQ(g.node(N.right).point, 2u);
  EXPECT_EQ(leaves_below(g, R.right), (std::set<PointId>{1}));
}

TEST(SimilarityGraph, InsertionIntoLoneLeaf) {
  auto X = random_points(2, 2, 4);
  SimilarityGraphBuilder g(gauss(1.0), params(4.0, 3), 6);
  g.construct(rows(X, 0, 1));
  for (int l = 0; l < 3; ++l) EXPECT_EQ(g.path(0, l).endpoint, 0u);
  g.update(1, X.point(1));
  EXPECT_EQ(g.node(g.root()).size, 2u);
  EXPECT_FALSE(g.node(g.root()).leaf);
}

// A point whose kernel value to everything underflows changes no estimate;
// only the paths at the parent of the split leaf are resampled and every
// other path keeps its route and contribution.
TEST(SimilarityGraph, SilentInsertionOnlyResamplesTheSplitParent) {
  auto X = random_points(40, 2, 9);
  SimilarityGraphBuilder g(gauss(1.0), params(4.0), 2);
  g.construct(X);
  // Predict the leaf z lands on with the size rule.
  NodeId t = g.root();
  while (!g.node(t).leaf) {
    const auto& T = g.node(t);
    t = g.node(T.left).size <= g.node(T.right).size ? T.left : T.right;
  }
  NodeId parent = g.node(t).parent;
  auto marked = g.node(parent).paths;
  std::vector<SamplePath> before;
  for (PointId x = 0; x < 40; ++x)
    for (int l = 0; l < g.L(); ++l) before.push_back(g.path(x, l));
  std::vector<double> z{5000.0, 5000.0};
  auto rep = g.update(40, z);
  EXPECT_EQ(rep.root_changed, 0u);
  EXPECT_EQ(rep.resampled, marked.size());
  std::size_t k = 0;
  for (PointId x = 0; x < 40; ++x)
    for (int l = 0; l < g.L(); ++l, ++k) {
      const auto& p = g.path(x, l);
      PathId pid = static_cast<PathId>(k);
      if (marked.contains(pid)) {
        EXPECT_EQ(p.counter, before[k].counter + 1);
        continue;
      }
      EXPECT_EQ(p.nodes, before[k].nodes);
      EXPECT_EQ(p.endpoint, before[k].endpoint);
      EXPECT_EQ(p.contribution, before[k].contribution);
    }
  // z's own paths: nothing else is within reach, so all are self-loops or
  // go to the one neighbour it shares a node with.
  EXPECT_GE(rep.new_edges, 1u);
  EXPECT_LE(rep.new_edges, static_cast<std::size_t>(g.L()));
}

TEST(SimilarityGraph, InvariantsHoldThroughInsertions) {
  auto P = random_points(160, 2, 44);
  SimilarityGraphBuilder g(gauss(0.8), params(2.0), 8);
  g.construct(rows(P, 0, 40));
  std::vector<PointId> vs(40);
  std::iota(vs.begin(), vs.end(), 0);
  for (std::size_t r = 40; r < P.size(); ++r) {
    g.update(P.ids[r], P.point(r));  // self_check runs the full scan
    vs.push_back(P.ids[r]);
    EXPECT_LE(g.edge_count(), static_cast<std::size_t>(g.L()) * vs.size());
    if (r % 40 == 0) g.check_invariants(true);
    ASSERT_NEAR(g.total_weight(), sum_of_contributions(g, vs), 1e-12 * g.total_weight());
  }
  EXPECT_LE(leaf_depth_spread(g), 1);
}

TEST(SimilarityGraph, InvariantsHoldAcrossExactAndSampledNodes) {
  // Cutoff 6: nodes start exact, and some outgrow it during the insertions.
  auto P = random_points(120, 2, 45);
  SimilarityGraphBuilder g(gauss(0.8), params(2.0, 0, true, 6), 8);
  g.construct(rows(P, 0, 20));
  std::size_t exact0 = 0;
  for (NodeId t = 0; t < g.node_count(); ++t) exact0 += g.node(t).kde->exact();
  EXPECT_GT(exact0, 0u);
  std::vector<PointId> vs(20);
  std::iota(vs.begin(), vs.end(), 0);
  for (std::size_t r = 20; r < P.size(); ++r) {
    g.update(P.ids[r], P.point(r));
    vs.push_back(P.ids[r]);
    ASSERT_NEAR(g.total_weight(), sum_of_contributions(g, vs), 1e-12 * g.total_weight());
  }
  g.check_invariants(true);
  for (NodeId t = 0; t < g.node_count(); ++t) {
    const auto& T = g.node(t);
    EXPECT_EQ(T.kde->exact(), T.size <= 6) << t;
  }
}

TEST(NodeKde, ExactSumsMatchTheKernel) {
  auto P = random_points(5, 3, 61);
  NodeKde k(gauss(0.6), KdeParams{}, 1, 3, 10);
  k.initialise(rows(P, 0, 3), rows(P, 3, 5));
  ASSERT_TRUE(k.exact());
  auto mass = [&](std::size_t q, std::size_t upto) {
    double s = 0.0;
    for (std::size_t r = 0; r < upto; ++r) s += eval_kernel(gauss(0.6), P.point(q), P.point(r));
    return s;
  };
  EXPECT_EQ(k.estimate(3), mass(3, 3));
  EXPECT_EQ(k.add_query_point(0, P.point(0)), mass(0, 3));
  EXPECT_EQ(k.query_ids(), (std::vector<PointId>{0, 3, 4}));
  PointSet Z = random_points(1, 3, 62, 100);
  auto changed = k.add_data_point(100, Z.point(0));
  EXPECT_EQ(changed, (std::vector<PointId>{0, 3, 4}));
  EXPECT_DOUBLE_EQ(k.estimate(4), mass(4, 3) + eval_kernel(gauss(0.6), P.point(4), Z.point(0)));
  EXPECT_EQ(k.n(), 4);
  EXPECT_TRUE(k.delete_query_point(3));
  EXPECT_FALSE(k.has_query(3));
  EXPECT_THROW(k.estimate(3), std::out_of_range);
  k.check_invariants();

  // A far point leaves every sum alone.
  PointSet far(3);
  far.push(101, std::vector<double>{1e3, 1e3, 1e3});
  EXPECT_TRUE(k.add_data_point(101, far.point(0)).empty());
}

TEST(NodeKde, OutgrowingTheCutoffSwitchesToSampling) {
  auto P = random_points(9, 2, 63);
  NodeKde k(gauss(1.0), KdeParams{}, 77, 2, 8);
  k.initialise(rows(P, 0, 8), rows(P, 0, 3));
  ASSERT_TRUE(k.exact());
  auto changed = k.add_data_point(8, P.point(8));
  EXPECT_EQ(changed, (std::vector<PointId>{0, 1, 2}));
  ASSERT_FALSE(k.exact());
  // Same seed and sets as a sampled structure built directly.
  DynamicKde d(gauss(1.0), KdeParams{}, 77, 2);
  d.initialise(P, rows(P, 0, 3));
  for (PointId q : {0u, 1u, 2u}) EXPECT_EQ(k.estimate(q), d.estimate(q)) << q;
  EXPECT_EQ(k.n(), 9);
  EXPECT_EQ(k.data_ids(), d.data_ids());
  k.check_invariants(true);
}

TEST(SimilarityGraph, InsertionsUpToAPowerOfTwoGiveAPerfectTree) {
  auto P = random_points(64, 2, 15);
  SimilarityGraphBuilder g(gauss(1.0), params(2.0, 3), 8);
  g.construct(rows(P, 0, 5));
  for (std::size_t r = 5; r < 64; ++r) {
    g.update(P.ids[r], P.point(r));
    EXPECT_LE(leaf_depth_spread(g), 1) << r;
    if (std::has_single_bit(r + 1)) {
      EXPECT_EQ(leaf_depth_spread(g), 0) << r;
    }
  }
}

// The descent into the smaller child does not keep the power-of-two split
// sizes of a fresh tree: from a perfect 4-point tree, two insertions give a
// (3,3) root split where a fresh 6-point tree has (4,2).
TEST(SimilarityGraph, InsertionSplitsDifferFromFreshSplits) {
  auto P = random_points(6, 2, 15);
  SimilarityGraphBuilder g(gauss(1.0), params(2.0, 3), 8);
  g.construct(rows(P, 0, 4));
  g.update(4, P.point(4));
  g.update(5, P.point(5));
  const auto& R = g.node(g.root());
  EXPECT_EQ(g.node(R.left).size, 3u);
  EXPECT_EQ(g.node(R.right).size, 3u);
  EXPECT_EQ(split_right_size(6), 2u);
}

TEST(SimilarityGraph, ResampledSetStaysSmall) {
  auto ds = generate_blobs(712, 2, 4, 1.0, 3);
  double s = calibrate_sigma(rows(ds.points, 0, 512), KernelKind::gaussian, 1);
  SimilarityGraphBuilder g(gauss(s), params(2.0, 0, false), 4);
  g.construct(rows(ds.points, 0, 512));
  const double L = g.L();
  double total = 0.0;
  for (std::size_t r = 512; r < 712; ++r) total += static_cast<double>(g.update(ds.points.ids[r], ds.points.point(r)).resampled);
  double mean = total / 200.0;
  EXPECT_LE(mean, 10.0 * L * std::pow(std::log2(512.0), 2));
  RecordProperty("mean_resampled", std::to_string(mean));
  g.check_invariants(false);
}

TEST(SimilarityGraph, EdgeListExport) {
  auto X = random_points(30, 2, 6);
  SimilarityGraphBuilder g(gauss(1.0), params(4.0, 0, false), 19);
  g.construct(X);
  std::ostringstream os;
  g.write_edge_list(os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("# {\"n\": 30, ", 0), 0u) << header;
  EXPECT_NE(header.find("\"L\": 15"), std::string::npos);
  EXPECT_NE(header.find("\"seed\": 19"), std::string::npos);
  std::vector<std::pair<PointId, PointId>> keys;
  PointId a, b;
  double w;
  while (in >> a >> b >> w) {
    EXPECT_LE(a, b);
    EXPECT_EQ(w, g.edge_weight(a, b));  // 17 significant digits round-trip
    keys.emplace_back(a, b);
  }
  EXPECT_EQ(keys.size(), g.edge_count());
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(SimilarityGraph, HigherDegreeSetsFollowTheMinimum) {
  auto X = random_points(48, 2, 27);
  SimilarityGraphBuilder g(gauss(0.8), params(4.0, 0, false), 2);
  g.construct(X);
  for (PointId y = 0; y < 48; ++y) {
    std::set<PointId> want;
    for (PointId x = 0; x < 48; ++x)
      for (int l = 0; l < g.L(); ++l) {
        const auto& p = g.path(x, l);
        if (p.endpoint == y && x != y && g.root_estimate(y) <= g.root_estimate(x)) want.insert(x);
      }
    auto got = g.higher_deg(y);
    EXPECT_EQ(std::set<PointId>(got.begin(), got.end()), want);
  }
}
