#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace dkde {

// Fields that do not apply to a run (error in graph mode, scores in kde
// mode) are NaN and written as empty CSV fields.
struct IterationRecord {
  int iteration = 0;
  std::size_t n_current = 0;
  double wall_time_update = 0.0;  // seconds
  double relative_error = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  std::int64_t edge_count = -1;  // -1: not applicable

  bool operator==(const IterationRecord& o) const;
};

struct RunReport {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;

  bool operator==(const RunReport& o) const = default;
  double total_update_time() const;
  // Throws when n_current decreases or a time is negative.
  void validate() const;
};

extern const char* const kReportHeader;

void write_report_csv(std::ostream& out, const RunReport& r);
RunReport read_report_csv(std::istream& in);

// RFC 4180 record reader: quoted fields may hold commas, quotes ("") and
// line breaks. Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);
std::string csv_quote(const std::string& s);

}  // namespace dkde
