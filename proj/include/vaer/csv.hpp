#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vaer::csv {

using Row = std::vector<std::string>;

/// RFC-4180 reader. Accepts LF or CRLF line endings, quoted fields with
/// embedded delimiters, doubled quotes and line breaks.
/// Throws FormatError on an unterminated quoted field.
std::vector<Row> parse(std::string_view text, char delimiter = ',');

std::vector<Row> read_file(const std::string& path, char delimiter = ',');

/// Quotes a field only when it contains the delimiter, a quote or a line break.
std::string escape_field(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const Row& row, char delimiter = ',');

}  // namespace vaer::csv
