#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "dkde/benchmark.hpp"

using namespace dkde;

int main(int argc, char** argv) {
  CLI::App app{"Chunked insertion benchmark for dynamic KDE and similarity graphs"};
  app.require_subcommand(1, 1);
  auto* kde = app.add_subcommand("kde", "kernel density estimates, relative error per chunk");
  auto* graph = app.add_subcommand("graph", "similarity graphs, spectral clustering scores per chunk");

  BenchConfig cfg;
  std::string sigma = "auto", out, kernel = "gaussian";
  int label_column = -2;  // -2: none
  for (auto* sc : {kde, graph}) {
    sc->add_option("--dataset", cfg.dataset, "CSV / whitespace file, or 'blobs'");
    sc->add_option("--label-column", label_column, "label column index, -1 for the last");
    sc->add_option("--blobs-n", cfg.blobs_n, "blobs: number of points");
    sc->add_option("--blobs-d", cfg.blobs_d, "blobs: dimension");
    sc->add_option("--blobs-k", cfg.blobs_k, "blobs: clusters");
    sc->add_option("--kernel", kernel, "gaussian|exponential|t-student")
        ->check(CLI::IsMember({"gaussian", "exponential", "t-student"}));
    sc->add_option("--sigma", sigma, "bandwidth, or 'auto' for mean density 0.01 n");
    sc->add_option("--epsilon", cfg.epsilon, "accuracy parameter")->check(CLI::Range(0.0, 1.0));
    sc->add_option("--C", cfg.C, "estimator count multiplier");
    sc->add_option("--chunk-size", cfg.chunk_size, "points per iteration")->check(CLI::PositiveNumber);
    sc->add_option("--seed", cfg.seed, "master seed");
    sc->add_option("--algorithm", cfg.algorithm, "dynamic|exact|rs|ckns-static|knn|fully-connected")
        ->check(CLI::IsMember({"dynamic", "exact", "rs", "ckns-static", "knn", "fully-connected"}));
    sc->add_option("--rate", cfg.rate, "random sampling rate")->check(CLI::Range(0.0, 1.0));
    sc->add_option("--k-clusters", cfg.k_clusters, "clusters for spectral clustering (0: label count)");
    sc->add_option("--L", cfg.L, "sampled neighbours per vertex (0: 3 ceil(log2 n))");
    sc->add_option("--knn-k", cfg.knn_k, "k of the kNN baseline");
    sc->add_flag("--order-by-label", cfg.order_by_label, "insert one ground-truth cluster after another");
    sc->add_option("--out", out, "CSV report path");
  }
  CLI11_PARSE(app, argc, argv);
  cfg.mode = graph->parsed() ? BenchMode::graph : BenchMode::kde;
  if (label_column != -2) cfg.label_column = label_column;
  static const std::map<std::string, KernelKind> kinds{
      {"gaussian", KernelKind::gaussian}, {"exponential", KernelKind::exponential}, {"t-student", KernelKind::t_student}};
  cfg.kernel = kinds.at(kernel);

  try {
    if (sigma != "auto") {
      std::size_t used = 0;
      cfg.sigma = std::stod(sigma, &used);
      if (used != sigma.size() || !(cfg.sigma > 0)) throw std::invalid_argument("--sigma must be positive or 'auto'");
    }
    Dataset ds = prepare_dataset(cfg);
    RunReport rep = run_benchmark(cfg, ds);
    if (!out.empty()) {
      std::ofstream f(out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + out);
      write_report_csv(f, rep);
    }
    const auto& last = rep.records.back();
    auto val = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    nlohmann::json s{{"mode", cfg.mode == BenchMode::kde ? "kde" : "graph"},
                     {"algorithm", rep.algorithm},
                     {"dataset", ds.name},
                     {"n", ds.size()},
                     {"sigma", ds.sigma},
                     {"seed", rep.seed},
                     {"iterations", rep.records.size()},
                     {"total_update_time", rep.total_update_time()},
                     {"final_relative_error", val(last.relative_error)},
                     {"final_nmi", val(last.nmi)},
                     {"final_ari", val(last.ari)},
                     {"final_edge_count", last.edge_count < 0 ? nlohmann::json(nullptr) : nlohmann::json(last.edge_count)}};
    std::cout << s.dump() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
