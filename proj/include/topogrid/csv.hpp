#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace topogrid {

// Shortest round-trip decimal form; keeps seeded runs byte-identical.
std::string format_double(double v);

double parse_double(std::string_view text, std::string_view where);
long long parse_int(std::string_view text, std::string_view where);

// Line-oriented CSV writer. Comment lines (leading '#') go before the header
// and carry run metadata (seed, config hash) so outputs are self-describing.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);

  void comment(std::string_view text);
  void header(const std::vector<std::string>& names);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::string path_;
  bool header_written_ = false;
};

struct CsvTable {
  std::vector<std::string> comments;  // '#' lines, in order, marker stripped
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // key=value pairs collected from all comment lines.
  std::map<std::string, std::string> comment_fields() const;

  int column(std::string_view name) const;  // -1 when absent
};

// Strict reader: every row must match the header width; no quoting (the
// formats written here never emit commas inside cells).
CsvTable read_csv(const std::string& path);

}  // namespace topogrid
