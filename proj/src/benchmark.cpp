#include "dkde/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dkde/baselines.hpp"
#include "dkde/metrics.hpp"
#include "dkde/similarity_graph.hpp"
#include "dkde/spectral.hpp"

namespace dkde {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const double kNaN = std::nan("");

bool graph_algorithm(const std::string& a) { return a == "dynamic" || a == "knn" || a == "fully-connected"; }
bool kde_algorithm(const std::string& a) {
  return a == "dynamic" || a == "exact" || a == "rs" || a == "ckns-static";
}

}  // namespace

Dataset prepare_dataset(BenchConfig& cfg) {
  Dataset ds;
  if (cfg.dataset == "blobs") {
    ds = generate_blobs(cfg.blobs_n, cfg.blobs_d, cfg.blobs_k, cfg.blobs_spread, cfg.seed);
  } else {
    ds = load_dataset(cfg.dataset, guess_format(cfg.dataset), cfg.label_column);
  }
  if (cfg.order_by_label) {
    if (ds.labels.empty()) throw std::invalid_argument("ordering by label needs labels");
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), 0);
    std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) { return ds.labels[a] < ds.labels[b]; });
    Dataset o;
    o.name = ds.name;
    o.points = PointSet(ds.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      o.points.push(static_cast<PointId>(i), ds.points.point(rows[i]));
      o.labels.push_back(ds.labels[rows[i]]);
    }
    ds = std::move(o);
  }
  if (!(cfg.sigma > 0.0)) cfg.sigma = calibrate_sigma(ds.points, cfg.kernel, 1, 0.01, 200, cfg.seed);
  ds.sigma = cfg.sigma;
  return ds;
}

RunReport run_benchmark(BenchConfig cfg) {
  Dataset ds = prepare_dataset(cfg);
  return run_benchmark(cfg, ds);
}

RunReport run_benchmark(const BenchConfig& cfg, const Dataset& ds) {
  if (cfg.chunk_size < 1) throw std::invalid_argument("chunk size must be positive");
  if (cfg.mode == BenchMode::kde && !kde_algorithm(cfg.algorithm))
    throw std::invalid_argument("algorithm '" + cfg.algorithm + "' is not a kde algorithm");
  if (cfg.mode == BenchMode::graph && !graph_algorithm(cfg.algorithm))
    throw std::invalid_argument("algorithm '" + cfg.algorithm + "' is not a graph algorithm");
  const KernelConfig kc{cfg.kernel, ds.sigma > 0 ? ds.sigma : cfg.sigma, 1};
  kc.validate();
  KdeParams kp;
  kp.epsilon = cfg.epsilon;
  kp.C = cfg.C;
  kp.validate();

  RunReport rep;
  rep.algorithm = cfg.algorithm;
  rep.seed = cfg.seed;
  const std::size_t n = ds.size();
  const int dim = ds.dim();

  int k_clusters = cfg.k_clusters;
  if (k_clusters <= 0 && !ds.labels.empty())
    k_clusters = static_cast<int>(std::set<int>(ds.labels.begin(), ds.labels.end()).size());

  // kde mode state
  ExactKde exact(kc, dim);
  std::unique_ptr<DynamicKde> dyn;
  std::unique_ptr<RandomSamplingKde> rs;
  std::unique_ptr<ExactKde> exact_alg;
  // graph mode state
  std::unique_ptr<SimilarityGraphBuilder> gb;

  PointSet cur(dim);
  int it = 0;
  for (std::size_t lo = 0; lo < n; lo += cfg.chunk_size, ++it) {
    const std::size_t hi = std::min(n, lo + cfg.chunk_size);
    std::vector<std::size_t> rows(hi - lo);
    std::iota(rows.begin(), rows.end(), lo);
    PointSet chunk = ds.points.subset(rows);
    IterationRecord rec;
    rec.iteration = it;
    rec.relative_error = rec.nmi = rec.ari = kNaN;

    if (cfg.mode == BenchMode::kde) {
      std::vector<double> est;
      auto t0 = Clock::now();
      if (cfg.algorithm == "dynamic") {
        if (!dyn) {
          dyn = std::make_unique<DynamicKde>(kc, kp, cfg.seed, dim);
          dyn->initialise(chunk, chunk);
        } else {
          for (std::size_t r = 0; r < chunk.size(); ++r) {
            dyn->add_data_point(chunk.ids[r], chunk.point(r));
            dyn->add_query_point(chunk.ids[r], chunk.point(r));
          }
        }
      } else if (cfg.algorithm == "exact") {
        if (!exact_alg) exact_alg = std::make_unique<ExactKde>(kc, dim);
        for (std::size_t r = 0; r < chunk.size(); ++r) {
          exact_alg->add_data_point(chunk.ids[r], chunk.point(r));
          exact_alg->add_query_point(chunk.ids[r], chunk.point(r));
        }
      } else if (cfg.algorithm == "rs") {
        if (!rs) rs = std::make_unique<RandomSamplingKde>(kc, dim, cfg.rate, cfg.seed);
        for (std::size_t r = 0; r < chunk.size(); ++r) {
          rs->add_data_point(chunk.ids[r], chunk.point(r));
          rs->add_query_point(chunk.ids[r], chunk.point(r));
        }
      }
      for (std::size_t r = 0; r < chunk.size(); ++r) cur.push(chunk.ids[r], chunk.point(r));
      if (cfg.algorithm == "ckns-static") est = static_kde_estimates(cur, cur, kc, kp, cfg.seed + static_cast<std::uint64_t>(it));
      rec.wall_time_update = seconds_since(t0);

      for (std::size_t r = 0; r < chunk.size(); ++r) {
        exact.add_data_point(chunk.ids[r], chunk.point(r));
        exact.add_query_point(chunk.ids[r], chunk.point(r));
      }
      std::vector<double> truth(cur.size());
      if (est.empty()) est.resize(cur.size());
      for (std::size_t r = 0; r < cur.size(); ++r) {
        truth[r] = exact.estimate(cur.ids[r]);
        if (cfg.algorithm == "dynamic") est[r] = dyn->estimate(cur.ids[r]);
        if (cfg.algorithm == "exact") est[r] = exact_alg->estimate(cur.ids[r]);
        if (cfg.algorithm == "rs") est[r] = rs->estimate(cur.ids[r]);
      }
      rec.relative_error = relative_error(est, truth).value;
    } else {
      WeightedGraph g;
      auto t0 = Clock::now();
      for (std::size_t r = 0; r < chunk.size(); ++r) cur.push(chunk.ids[r], chunk.point(r));
      if (cfg.algorithm == "dynamic") {
        if (!gb) {
          GraphParams gp;
          gp.L = cfg.L;
          gp.kde = kp;
          gb = std::make_unique<SimilarityGraphBuilder>(kc, gp, cfg.seed);
          gb->construct(chunk);
        } else {
          for (std::size_t r = 0; r < chunk.size(); ++r) gb->update(chunk.ids[r], chunk.point(r));
        }
        rec.wall_time_update = seconds_since(t0);
        g = gb->graph();
      } else if (cfg.algorithm == "knn") {
        if (cur.size() >= 2) g = knn_graph(cur, std::min<int>(cfg.knn_k, static_cast<int>(cur.size()) - 1), kc);
        rec.wall_time_update = seconds_since(t0);
      } else {
        g = fully_connected_graph(cur, kc);
        rec.wall_time_update = seconds_since(t0);
      }
      if (g.vertices.empty()) {
        g.vertices = cur.ids;
      }
      rec.edge_count = static_cast<std::int64_t>(g.edge_count());
      if (cfg.cluster && !ds.labels.empty() && k_clusters > 0 && cur.size() <= kSpectralCap) {
        auto part = spectral_clustering(g, k_clusters, cfg.seed);
        std::vector<int> truth(part.vertices.size());
        for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = ds.labels[part.vertices[i]];
        rec.nmi = nmi(part.labels, truth);
        rec.ari = ari(part.labels, truth);
      }
    }
    rec.n_current = cur.size();
    rep.records.push_back(rec);
  }
  rep.validate();
  return rep;
}

}  // namespace dkde
