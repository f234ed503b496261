#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kickoff::csv {

// Reads rows of exactly `columns` numeric fields. A first line that does not
// parse as numbers is treated as a header and must equal `header` when given.
// Blank lines and lines starting with '#' are skipped.
// Throws Errc::io with the offending line number on malformed input.
std::vector<std::vector<double>> read_numeric(std::istream& in, std::size_t columns,
                                              const std::string& header = {});

void write_numeric(std::ostream& out, const std::string& header,
                   const std::vector<std::vector<double>>& rows);

}  // namespace kickoff::csv
