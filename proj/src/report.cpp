#include "dkde/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dkde {

const char* const kReportHeader =
    "algorithm,seed,iteration,n_current,wall_time_update,relative_error,nmi,ari,edge_count";

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nan("");
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("report line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

template <class T>
T to_int(const std::string& s, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("report line " + std::to_string(line) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

bool IterationRecord::operator==(const IterationRecord& o) const {
  return iteration == o.iteration && n_current == o.n_current && same(wall_time_update, o.wall_time_update) &&
         same(relative_error, o.relative_error) && same(nmi, o.nmi) && same(ari, o.ari) &&
         edge_count == o.edge_count;
}

double RunReport::total_update_time() const {
  double s = 0.0;
  for (const auto& r : records) s += r.wall_time_update;
  return s;
}

void RunReport::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].wall_time_update < 0) throw std::logic_error("negative update time");
    if (i && records[i].n_current < records[i - 1].n_current) throw std::logic_error("n_current decreased");
  }
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  std::string cur;
  bool quoted = false;
  for (; c != EOF; c = in.get()) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          cur += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        cur += static_cast<char>(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      cur += static_cast<char>(c);
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted field");
  fields.push_back(std::move(cur));
  return true;
}

void write_report_csv(std::ostream& out, const RunReport& r) {
  out << kReportHeader << "\r\n";
  for (const auto& x : r.records) {
    out << csv_quote(r.algorithm) << ',' << r.seed << ',' << x.iteration << ',' << x.n_current << ','
        << num(x.wall_time_update) << ',' << num(x.relative_error) << ',' << num(x.nmi) << ',' << num(x.ari) << ','
        << (x.edge_count < 0 ? std::string() : std::to_string(x.edge_count)) << "\r\n";
  }
}

RunReport read_report_csv(std::istream& in) {
  std::vector<std::string> f;
  if (!read_csv_record(in, f)) throw std::runtime_error("empty report");
  std::string header;
  for (std::size_t i = 0; i < f.size(); ++i) header += (i ? "," : "") + f[i];
  if (header != kReportHeader) throw std::runtime_error("unexpected report header");
  RunReport r;
  std::size_t line = 1;
  bool first = true;
  while (read_csv_record(in, f)) {
    ++line;
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 9) throw std::runtime_error("report line " + std::to_string(line) + ": expected 9 fields");
    auto seed = to_int<std::uint64_t>(f[1], line);
    if (first) {
      r.algorithm = f[0];
      r.seed = seed;
      first = false;
    } else if (f[0] != r.algorithm || seed != r.seed) {
      throw std::runtime_error("report line " + std::to_string(line) + ": mixed runs");
    }
    IterationRecord x;
    x.iteration = to_int<int>(f[2], line);
    x.n_current = to_int<std::size_t>(f[3], line);
    x.wall_time_update = to_double(f[4], line);
    x.relative_error = to_double(f[5], line);
    x.nmi = to_double(f[6], line);
    x.ari = to_double(f[7], line);
    x.edge_count = f[8].empty() ? -1 : to_int<std::int64_t>(f[8], line);
    r.records.push_back(x);
  }
  return r;
}

}  // namespace dkde
