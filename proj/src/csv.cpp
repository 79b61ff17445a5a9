#include "vaer/csv.hpp"

#include <fstream>
#include <sstream>

#include "vaer/error.hpp"

namespace vaer::csv {

std::vector<Row> parse(std::string_view text, char delimiter) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_open = false;     // a field exists on this row even if it is empty
  bool field_touched = false;  // the current field already consumed characters or quotes
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_open = false;
    field_touched = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_touched) {
      in_quotes = true;
      field_open = field_touched = true;
    } else if (c == delimiter) {
      end_field();
      field_open = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF; the LF closes the row on the next iteration
    } else if (c == '\n') {
      // blank lines carry no row, matching common CSV readers
      if (!row.empty() || field_open) end_row();
      ++line;
    } else {
      field.push_back(c);
      field_open = field_touched = true;
    }
  }
  if (in_quotes) {
    throw FormatError("unterminated quoted field starting before line " + std::to_string(line));
  }
  if (field_open || !row.empty()) end_row();
  return rows;
}

std::vector<Row> read_file(const std::string& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("no such file or unreadable: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), delimiter);
}

std::string escape_field(std::string_view field, char delimiter) {
  const bool needs_quotes = field.find_first_of(std::string{delimiter, '"', '\r', '\n'}) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << delimiter;
    out << escape_field(row[i], delimiter);
  }
  out << '\n';
}

}  // namespace vaer::csv
