#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dkde/datasets.hpp"
#include "dkde/dynamic_kde.hpp"
#include "dkde/report.hpp"

namespace dkde {

enum class BenchMode { kde, graph };

struct BenchConfig {
  BenchMode mode = BenchMode::kde;
  std::string algorithm = "dynamic";  // dynamic|exact|rs|ckns-static|knn|fully-connected
  std::string dataset = "blobs";      // path, or "blobs"
  std::optional<int> label_column;    // for files; -1 = last
  std::size_t blobs_n = 2000;
  int blobs_d = 10;
  int blobs_k = 4;
  double blobs_spread = 1.0;
  KernelKind kernel = KernelKind::gaussian;
  double sigma = 0.0;                 // 0: calibrate to mean density 0.01
  double epsilon = 0.5;
  double C = 1.0;
  std::size_t chunk_size = 500;
  std::uint64_t seed = 1;
  double rate = 0.1;
  int k_clusters = 0;                 // 0: number of label classes
  int L = 0;                          // graph paths per vertex; 0: default
  int knn_k = 20;
  bool order_by_label = false;        // insert one ground-truth cluster after another
  bool cluster = true;                // graph mode: run spectral clustering per chunk
};

// Loads or generates the dataset and fixes sigma (as `run_benchmark` does).
Dataset prepare_dataset(BenchConfig& cfg);

// Drives the chosen algorithm through chunked insertion. Only the update
// itself is timed; the exact reference and the clustering are not.
RunReport run_benchmark(BenchConfig cfg);
RunReport run_benchmark(const BenchConfig& cfg, const Dataset& ds);

}  // namespace dkde
