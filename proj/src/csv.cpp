#include "kickoff/csv.hpp"

#include <charconv>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "kickoff/error.hpp"

namespace kickoff::csv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_row(const std::string& line, std::size_t columns, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const std::string f = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) return false;
    out.push_back(v);
  }
  return out.size() == columns;
}

}  // namespace

std::vector<std::vector<double>> read_numeric(std::istream& in, std::size_t columns, const std::string& header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (parse_row(t, columns, row)) {
      rows.push_back(row);
    } else if (first) {
      std::string compact;
      for (char c : t) {
        if (c != ' ' && c != '\t') compact.push_back(c);
      }
      if (!header.empty() && compact != header) {
        throw Error(Errc::io, "line " + std::to_string(line_no) + ": expected header '" + header + "'");
      }
    } else {
      throw Error(Errc::io, "line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                                " numeric fields");
    }
    first = false;
  }
  return rows;
}

void write_numeric(std::ostream& out, const std::string& header, const std::vector<std::vector<double>>& rows) {
  out << header << '\n';
  out << std::setprecision(17);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      out << r[i];
    }
    out << '\n';
  }
}

}  // namespace kickoff::csv
