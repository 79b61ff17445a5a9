#include "vaer/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "vaer/csv.hpp"
#include "vaer/error.hpp"

namespace vaer {

Table::Table(std::string name, std::vector<std::string> attributes, std::vector<Record> records)
    : name_(std::move(name)), attributes_(std::move(attributes)), records_(std::move(records)) {
  if (attributes_.empty()) throw FormatError("table '" + name_ + "' has no attributes");
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const Record& r = records_[i];
    if (r.values.size() != attributes_.size()) {
      throw FormatError("record '" + r.id + "' has " + std::to_string(r.values.size()) +
                        " values, table arity is " + std::to_string(attributes_.size()));
    }
    if (!index_.emplace(r.id, i).second) {
      throw FormatError("duplicate record id '" + r.id + "' in table '" + name_ + "'");
    }
  }
}

const Record* Table::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

const Record& Table::get(std::string_view id) const {
  if (const Record* r = find(id)) return *r;
  throw FormatError("unknown record id '" + std::string(id) + "' in table '" + name_ + "'");
}

Table parse_table(std::string_view text, const std::string& name, const LoadOptions& options) {
  auto rows = csv::parse(text, options.delimiter);
  if (rows.empty()) throw FormatError("table '" + name + "' has no header row");
  csv::Row header = std::move(rows.front());
  const std::size_t width = header.size();

  std::optional<std::size_t> id_col;
  if (options.id_column) {
    auto it = std::find(header.begin(), header.end(), *options.id_column);
    if (it == header.end()) throw FormatError("id column '" + *options.id_column + "' not in header");
    id_col = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::string> attributes;
  for (std::size_t c = 0; c < width; ++c) {
    if (c != id_col) attributes.push_back(header[c]);
  }

  std::vector<Record> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    csv::Row& row = rows[r];
    if (row.size() != width) {
      throw FormatError("row " + std::to_string(r) + ": expected " + std::to_string(width) + " fields, got " +
                        std::to_string(row.size()));
    }
    Record rec;
    rec.id = id_col ? row[*id_col] : std::to_string(r - 1);
    rec.values.reserve(attributes.size());
    for (std::size_t c = 0; c < width; ++c) {
      if (c != id_col) rec.values.push_back(std::move(row[c]));
    }
    records.push_back(std::move(rec));
  }
  return Table(name, std::move(attributes), std::move(records));
}

Table load_table(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("no such file or unreadable: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = options.name.value_or(std::filesystem::path(path).stem().string());
  return parse_table(text, name, options);
}

void save_table(const Table& table, const std::string& path, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  csv::Row header{"id"};
  header.insert(header.end(), table.attributes().begin(), table.attributes().end());
  csv::write_row(out, header, delimiter);
  for (const Record& r : table.records()) {
    csv::Row row{r.id};
    row.insert(row.end(), r.values.begin(), r.values.end());
    csv::write_row(out, row, delimiter);
  }
}

namespace {

// Decodes one UTF-8 code point starting at text[i]; advances i. Invalid
// bytes decode as themselves so they survive as token characters.
char32_t next_code_point(std::string_view text, std::size_t& i, std::size_t& length) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t n = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0 && b0 < 0xF8) {
    n = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    n = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    n = 2;
    cp = b0 & 0x1F;
  }
  if (n > 1) {
    if (i + n > text.size()) {
      n = 1;
      cp = b0;
    } else {
      for (std::size_t k = 1; k < n; ++k) {
        const auto b = static_cast<unsigned char>(text[i + k]);
        if ((b & 0xC0) != 0x80) {
          n = 1;
          cp = b0;
          break;
        }
        cp = (cp << 6) | (b & 0x3F);
      }
    }
  }
  length = n;
  i += n;
  return cp;
}

bool is_separator(char32_t cp) {
  if (cp < 0x80) {
    const bool alnum = (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    return !alnum;
  }
  // Latin-1 punctuation and symbols, except the letters ª µ º.
  if (cp >= 0x80 && cp <= 0xBF) return cp != 0xAA && cp != 0xB5 && cp != 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return true;  // × ÷
  if (cp >= 0x2000 && cp <= 0x206F) return true;  // general punctuation and spaces
  if (cp >= 0x3000 && cp <= 0x303F) return true;  // CJK punctuation
  if (cp == 0xFEFF || cp == 0x1680) return true;
  return false;
}

}  // namespace

std::vector<std::string> tokenize_value(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    std::size_t len = 0;
    const char32_t cp = next_code_point(text, i, len);
    if (is_separator(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (cp >= 'A' && cp <= 'Z') {
      current.push_back(static_cast<char>(cp - 'A' + 'a'));
    } else if (cp >= 0xC0 && cp <= 0xDE && len == 2) {
      // Latin-1 uppercase letters map to lowercase by +0x20.
      const char32_t lower = cp + 0x20;
      current.push_back(static_cast<char>(0xC0 | (lower >> 6)));
      current.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
    } else {
      current.append(text.substr(start, len));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Table align_arity(const Table& table, std::size_t target_arity) {
  if (target_arity == 0) throw FormatError("target arity must be at least 1");
  std::vector<std::string> attributes = table.attributes();
  for (std::size_t c = attributes.size(); c < target_arity; ++c) attributes.push_back("pad_" + std::to_string(c));
  attributes.resize(target_arity);

  std::vector<Record> records = table.records();
  for (Record& r : records) r.values.resize(target_arity);
  return Table(table.name(), std::move(attributes), std::move(records));
}

std::size_t PairKeyHash::operator()(const PairKey& key) const noexcept {
  const std::size_t h1 = std::hash<std::string>{}(key.left);
  const std::size_t h2 = std::hash<std::string>{}(key.right);
  return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
}

PairSet::PairSet(std::vector<LabeledKey> pairs) : pairs_(std::move(pairs)) {
  std::set<PairKey> seen;
  for (const LabeledKey& p : pairs_) {
    if (p.label != 0 && p.label != 1) {
      throw FormatError("pair (" + p.pair.left + ", " + p.pair.right + ") has label " + std::to_string(p.label));
    }
    if (!seen.insert(p.pair).second) {
      throw FormatError("duplicate pair (" + p.pair.left + ", " + p.pair.right + ")");
    }
  }
}

std::size_t PairSet::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(pairs_.begin(), pairs_.end(), [label](const LabeledKey& p) { return p.label == label; }));
}

void PairSet::validate(const Table& left, const Table& right) const {
  for (const LabeledKey& p : pairs_) {
    if (!left.contains(p.pair.left)) throw FormatError("left id '" + p.pair.left + "' not in " + left.name());
    if (!right.contains(p.pair.right)) throw FormatError("right id '" + p.pair.right + "' not in " + right.name());
  }
}

PairSet load_pairs(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw FormatError(path + ": missing header left_id,right_id,label");
  const csv::Row& header = rows.front();
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError(path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t l = column("left_id"), r = column("right_id"), y = column("label");
  std::vector<LabeledKey> pairs;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const csv::Row& row = rows[i];
    if (row.size() != header.size()) {
      throw FormatError(path + ": row " + std::to_string(i) + ": expected " + std::to_string(header.size()) + " fields");
    }
    int label = 0;
    if (row[y] == "1") {
      label = 1;
    } else if (row[y] != "0") {
      throw FormatError(path + ": row " + std::to_string(i) + ": label must be 0 or 1");
    }
    pairs.push_back({{row[l], row[r]}, label});
  }
  return PairSet(std::move(pairs));
}

void save_pairs(const PairSet& pairs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  csv::write_row(out, {"left_id", "right_id", "label"});
  for (const LabeledKey& p : pairs.pairs()) {
    csv::write_row(out, {p.pair.left, p.pair.right, std::to_string(p.label)});
  }
}

}  // namespace vaer
