#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vaer {

/// One tuple. `values` holds exactly one string per attribute; missing
/// values are empty strings.
struct Record {
  std::string id;
  std::vector<std::string> values;

  bool operator==(const Record&) const = default;
};

/// An immutable-after-load relation with a fixed arity.
class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<std::string> attributes, std::vector<Record> records);

  const std::string& name() const { return name_; }
  std::size_t arity() const { return attributes_.size(); }
  const std::vector<std::string>& attributes() const { return attributes_; }
  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  const Record& at(std::size_t i) const { return records_.at(i); }
  /// Record lookup by id; nullptr when absent.
  const Record* find(std::string_view id) const;
  const Record& get(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  bool operator==(const Table& other) const {
    return name_ == other.name_ && attributes_ == other.attributes_ && records_ == other.records_;
  }

 private:
  std::string name_;
  std::vector<std::string> attributes_;
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadOptions {
  char delimiter = ',';
  /// Column holding record ids. When unset, ids are the 0-based data row index.
  std::optional<std::string> id_column;
  /// Table name; defaults to the file stem.
  std::optional<std::string> name;
};

Table load_table(const std::string& path, const LoadOptions& options = {});
/// Parses delimited text already in memory (header row first).
Table parse_table(std::string_view text, const std::string& name, const LoadOptions& options = {});
/// Writes the table back as CSV with an `id` column first.
void save_table(const Table& table, const std::string& path, char delimiter = ',');

/// Lowercases and splits on anything that is not a letter or digit.
/// Non-ASCII letters stay inside tokens; Unicode spaces and punctuation split.
std::vector<std::string> tokenize_value(std::string_view text);

/// Truncates to the first `target_arity` attributes or pads with empty
/// attributes. Record ids and order are preserved.
Table align_arity(const Table& table, std::size_t target_arity);

/// Unordered-by-role pair of record ids: `left` always lives in the left
/// table and `right` in the right table.
struct PairKey {
  std::string left;
  std::string right;

  auto operator<=>(const PairKey&) const = default;
  bool operator==(const PairKey&) const = default;
};

struct PairKeyHash {
  std::size_t operator()(const PairKey& key) const noexcept;
};

struct LabeledKey {
  PairKey pair;
  int label = 0;

  bool operator==(const LabeledKey&) const = default;
};

/// Given train/validation/test pairs. No duplicate (left, right) entries.
class PairSet {
 public:
  PairSet() = default;
  explicit PairSet(std::vector<LabeledKey> pairs);

  const std::vector<LabeledKey>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  std::size_t count(int label) const;

  /// Throws FormatError naming the first id that does not resolve.
  void validate(const Table& left, const Table& right) const;

 private:
  std::vector<LabeledKey> pairs_;
};

/// CSV with header `left_id,right_id,label`.
PairSet load_pairs(const std::string& path);
void save_pairs(const PairSet& pairs, const std::string& path);

}  // namespace vaer
