#include "topogrid/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "topogrid/errors.hpp"

namespace topogrid {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view where) {
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ParseError("expected a number at " + std::string(where) + ", got '" +
                     std::string(text) + "'");
  }
  return v;
}

long long parse_int(std::string_view text, std::string_view where) {
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ParseError("expected an integer at " + std::string(where) +
                     ", got '" + std::string(text) + "'");
  }
  return v;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path), path_(path) {
  if (!out_) throw DomainError("cannot open " + path + " for writing");
}

void CsvWriter::comment(std::string_view text) {
  if (header_written_)
    throw ContractViolation("comments must precede the header in " + path_);
  out_ << "# " << text << "\n";
}

void CsvWriter::header(const std::vector<std::string>& names) {
  row(names);
  header_written_ = true;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  if (!out_) throw DomainError("write failure on " + path_);
}

static std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);

  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::size_t start = line.find_first_not_of("# ");
      table.comments.push_back(start == std::string::npos ? ""
                                                          : line.substr(start));
      continue;
    }
    auto cells = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(table.header.size()) + " columns, got " +
                       std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw ParseError(path + ": missing header row");
  return table;
}

std::map<std::string, std::string> CsvTable::comment_fields() const {
  std::map<std::string, std::string> fields;
  for (const auto& c : comments) {
    std::istringstream ss(c);
    std::string tok;
    while (ss >> tok) {
      auto eq = tok.find('=');
      if (eq != std::string::npos && eq > 0)
        fields[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return fields;
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace topogrid
