#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "dkde/kernel_levels.hpp"
#include "dkde/points.hpp"

namespace dkde {

struct Dataset {
  std::string name;
  PointSet points;     // ids 0..n-1 in file order
  std::vector<int> labels;  // empty when unlabelled
  double sigma = 0.0;

  std::size_t size() const { return points.size(); }
  int dim() const { return points.dim; }
};

enum class TextFormat { csv, whitespace };

// label_column: column index, or -1 for the last column.
Dataset parse_dataset(std::istream& in, TextFormat fmt, std::optional<int> label_column,
                      const std::string& name = "stream");
Dataset load_dataset(const std::string& path, TextFormat fmt, std::optional<int> label_column);
// csv for *.csv, whitespace otherwise.
TextFormat guess_format(const std::string& path);

// k isotropic Gaussian clusters with standard deviation `spread`; means are
// pairwise at least 10*spread apart. Point r belongs to cluster r % k.
Dataset generate_blobs(std::size_t n, int d, int k, double spread, std::uint64_t seed);

// Mean over a subsample of queries of mu_q / n, mu_q over the full data.
double mean_density(const PointSet& X, const KernelConfig& cfg, std::size_t subsample,
                    std::uint64_t seed);

// Bisection on log sigma for mean_density == target.
double calibrate_sigma(const PointSet& X, KernelKind kind, int degree, double target = 0.01,
                       std::size_t subsample = 200, std::uint64_t seed = 1);

}  // namespace dkde
