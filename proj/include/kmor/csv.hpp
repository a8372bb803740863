#pragma once

#include <string>
#include <vector>

namespace kmor {

// Full-precision decimal formatting (17 significant digits); values
// round-trip through text exactly.
std::string format_double(double v);

// Minimal CSV writer/reader for the toolkit's artifacts: comma
// separated, one header row, no quoting (fields never contain commas).
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void header(const std::vector<std::string>& names);
  void begin_row();
  void field(const std::string& s);
  void field(double v);
  void field(long v);
  void end_row();

 private:
  struct Impl;
  Impl* impl_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

double parse_double(const std::string& s);
long parse_long(const std::string& s);

}  // namespace kmor
