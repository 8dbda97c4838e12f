#include "dkde/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dkde/baselines.hpp"
#include "dkde/rng.hpp"

namespace dkde {

namespace {

std::vector<std::string> split_fields(const std::string& line, TextFormat fmt) {
  std::vector<std::string> out;
  if (fmt == TextFormat::whitespace) {
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) out.push_back(t);
    return out;
  }
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_number(std::string s, double& v) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return false;
  s = s.substr(b, e - b + 1);
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(v);
}

}  // namespace

Dataset parse_dataset(std::istream& in, TextFormat fmt, std::optional<int> label_column,
                      const std::string& name) {
  Dataset ds;
  ds.name = name;
  std::string line;
  std::size_t row = 0;
  int width = -1;
  bool header_checked = false;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') continue;
    auto f = split_fields(line, fmt);
    vals.assign(f.size(), 0.0);
    bool ok = true;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < f.size() && ok; ++c)
      if (!parse_number(f[c], vals[c])) {
        ok = false;
        bad = c;
      }
    if (!ok) {
      // A non-numeric first line is taken as a header.
      if (!header_checked && row == 0) {
        header_checked = true;
        continue;
      }
      throw std::runtime_error("parse error at row " + std::to_string(row) + ", column " +
                               std::to_string(bad) + ": '" + f[bad] + "'");
    }
    header_checked = true;
    if (width < 0) {
      width = static_cast<int>(f.size());
      int lc = label_column ? (*label_column < 0 ? width - 1 : *label_column) : -1;
      if (label_column && (lc < 0 || lc >= width))
        throw std::runtime_error("label column out of range");
      ds.points = PointSet(label_column ? width - 1 : width);
      if (ds.points.dim < 1) throw std::runtime_error("no feature columns");
    } else if (static_cast<int>(f.size()) != width) {
      throw std::runtime_error("ragged row " + std::to_string(row) + ": expected " +
                               std::to_string(width) + " fields, found " +
                               std::to_string(f.size()));
    }
    int lc = label_column ? (*label_column < 0 ? width - 1 : *label_column) : -1;
    std::vector<double> p;
    p.reserve(width);
    for (int c = 0; c < width; ++c) {
      if (c == lc) {
        double l = vals[c];
        if (l != std::floor(l))
          throw std::runtime_error("non-integer label at row " + std::to_string(row));
        ds.labels.push_back(static_cast<int>(l));
      } else {
        p.push_back(vals[c]);
      }
    }
    ds.points.push(static_cast<PointId>(row), p);
    ++row;
  }
  if (row == 0) throw std::runtime_error("dataset has no rows");
  return ds;
}

TextFormat guess_format(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".csv") return TextFormat::csv;
  return TextFormat::whitespace;
}

Dataset load_dataset(const std::string& path, TextFormat fmt, std::optional<int> label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return parse_dataset(in, fmt, label_column, path);
}

Dataset generate_blobs(std::size_t n, int d, int k, double spread, std::uint64_t seed) {
  if (n < 1 || d < 1 || k < 1 || !(spread > 0.0))
    throw std::invalid_argument("generate_blobs: bad arguments");
  Stream rs(seed, 0xb10b);
  std::vector<double> means(static_cast<std::size_t>(k) * d);
  const double gap = 10.0 * spread;
  // Rejection sampling in a box sized so k balls of radius gap/2 fit easily.
  double side = 2.0 * gap * std::ceil(std::pow(static_cast<double>(k), 1.0 / d) + 1.0);
  for (int c = 0; c < k; ++c) {
    for (int tries = 0;; ++tries) {
      if (tries > 0 && tries % 1000 == 0) side *= 1.5;
      double* m = means.data() + static_cast<std::size_t>(c) * d;
      for (int t = 0; t < d; ++t) m[t] = side * rs.uniform();
      bool ok = true;
      for (int o = 0; o < c && ok; ++o) {
        double s = 0.0;
        for (int t = 0; t < d; ++t) {
          double u = m[t] - means[static_cast<std::size_t>(o) * d + t];
          s += u * u;
        }
        ok = std::sqrt(s) >= gap;
      }
      if (ok) break;
    }
  }
  Dataset ds;
  ds.name = "blobs";
  ds.points = PointSet(d);
  std::vector<double> p(d);
  for (std::size_t r = 0; r < n; ++r) {
    int c = static_cast<int>(r % k);
    for (int t = 0; t < d; ++t) p[t] = means[static_cast<std::size_t>(c) * d + t] + spread * rs.normal();
    ds.points.push(static_cast<PointId>(r), p);
    ds.labels.push_back(c);
  }
  return ds;
}

double mean_density(const PointSet& X, const KernelConfig& cfg, std::size_t subsample,
                    std::uint64_t seed) {
  std::vector<std::size_t> rows;
  if (subsample >= X.size()) {
    for (std::size_t r = 0; r < X.size(); ++r) rows.push_back(r);
  } else {
    Stream rs(seed, 0x5167);
    for (std::size_t t = 0; t < subsample; ++t) rows.push_back(rs.below(X.size()));
  }
  double s = 0.0;
  for (auto r : rows) s += exact_kde_one(X, X.point(r), cfg);
  return s / static_cast<double>(rows.size()) / static_cast<double>(X.size());
}

double calibrate_sigma(const PointSet& X, KernelKind kind, int degree, double target,
                       std::size_t subsample, std::uint64_t seed) {
  if (X.empty()) throw std::invalid_argument("calibrate_sigma: empty data");
  if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("target density in (0,1)");
  // Draw the subsample once so every bisection step sees the same queries.
  PointSet Q(X.dim);
  if (subsample >= X.size()) {
    Q = X;
  } else {
    Stream rs(seed, 0x5167);
    for (std::size_t t = 0; t < subsample; ++t) {
      auto r = rs.below(X.size());
      Q.push(X.ids[r], X.point(r));
    }
  }
  auto density = [&](double sigma) {
    auto mu = exact_kde(X, Q, KernelConfig{kind, sigma, degree});
    double s = 0.0;
    for (double v : mu) s += v;
    return s / static_cast<double>(mu.size()) / static_cast<double>(X.size());
  };
  double lo = -40.0, hi = 40.0;  // log sigma; density decreases in sigma
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (density(std::exp(mid)) > target)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace dkde
