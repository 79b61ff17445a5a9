#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "vaer/corpus.hpp"

namespace vaer::ir {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Identifies one attribute value. Text-based providers only read `value`;
/// the precomputed provider keys on (table, record_id, index).
struct AttributeRef {
  std::string_view table;
  std::string_view record_id;
  std::size_t index = 0;
  std::string_view value;
};

/// Source of intermediate representations. Implementations are immutable
/// after construction and safe for concurrent encode() calls.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Vector encode(const AttributeRef& attribute) const = 0;
};

struct LsaOptions {
  enum class Solver { automatic, dense, randomized };

  Solver solver = Solver::automatic;
  int power_iterations = 6;
  Eigen::Index oversample = 12;
  std::uint64_t seed = 0x15a;
  /// Character n-grams of each token (with word-boundary marks) join the
  /// vocabulary next to the whole words; 0 keeps words only.
  std::size_t char_ngram = 3;
  /// Rescale outputs so the fitted corpus has mean squared IR norm
  /// energy_per_dim * dim; 0 keeps the raw projection.
  double energy_per_dim = 2.0;
};

/// Vocabulary terms of one value: its tokens, plus their character n-grams
/// (prefixed with '~' so they never collide with a word) when n > 0.
std::vector<std::string> lsa_terms(std::string_view text, std::size_t char_ngram);

/// TF-IDF weighted bag of words projected onto the top singular directions.
class LsaModel : public Provider {
 public:
  LsaModel() = default;

  /// Fits on every non-empty sentence of `corpus`. Throws FormatError when
  /// `dim` exceeds min(|vocabulary|, #sentences), naming the feasible maximum.
  static LsaModel fit(std::span<const std::string> corpus, Eigen::Index dim, const LsaOptions& options = {});

  Eigen::Index dim() const override { return projection_.rows(); }
  Vector encode(const AttributeRef& attribute) const override { return encode_text(attribute.value); }
  Vector encode_text(std::string_view text) const;

  /// L2-normalized TF-IDF weights of the in-vocabulary tokens, as (column, weight).
  std::vector<std::pair<Eigen::Index, double>> tfidf(std::string_view text) const;
  /// Projection before output rescaling.
  Vector project_unscaled(std::string_view text) const;

  const Matrix& projection() const { return projection_; }  // dim x |V|, orthonormal rows
  const Vector& idf() const { return idf_; }
  const Vector& singular_values() const { return singular_values_; }
  double output_scale() const { return scale_; }
  std::size_t char_ngram() const { return char_ngram_; }
  std::size_t vocabulary_size() const { return vocabulary_.size(); }
  /// Column of `token`, or -1 when out of vocabulary.
  Eigen::Index column(const std::string& token) const;

  void save(const std::string& path) const;
  static LsaModel load(const std::string& path);

 private:
  std::unordered_map<std::string, Eigen::Index> vocabulary_;
  std::vector<std::string> tokens_;
  Vector idf_;
  Matrix projection_;
  Vector singular_values_;
  double scale_ = 1.0;
  std::size_t char_ngram_ = 0;
};

/// Every non-empty attribute value of both tables, in table order.
std::vector<std::string> corpus_sentences(const Table& left, const Table& right);

LsaModel fit_lsa(std::span<const std::string> corpus, Eigen::Index dim, const LsaOptions& options = {});

/// Pre-trained token embeddings; all vectors share one dimension.
class EmbeddingTable : public Provider {
 public:
  explicit EmbeddingTable(Eigen::Index dimension = 0) : dim_(dimension) {}

  /// word2vec text format: "token v1 ... vD" per line, optional "count dim" header.
  static EmbeddingTable load_word2vec(const std::string& path);

  void add(const std::string& token, Vector vector);
  const Vector* find(const std::string& token) const;
  std::size_t size() const { return vectors_.size(); }

  Eigen::Index dim() const override { return dim_; }
  Vector encode(const AttributeRef& attribute) const override;

 private:
  Eigen::Index dim_;
  std::unordered_map<std::string, Vector> vectors_;
};

/// Mean embedding of the in-vocabulary tokens; zero vector when none.
Vector ir_embedding_average(const EmbeddingTable& table, std::string_view value);

/// Vectors computed offline (e.g. by a contextual encoder), keyed by
/// (table, record id, attribute index).
class PrecomputedIrs : public Provider {
 public:
  explicit PrecomputedIrs(Eigen::Index dimension = 0) : dim_(dimension) {}

  void insert(const std::string& table, const std::string& record_id, std::size_t index, Vector vector);
  const Vector* find(std::string_view table, std::string_view record_id, std::size_t index) const;
  std::size_t size() const { return vectors_.size(); }

  /// Throws FormatError listing up to the first 10 missing keys.
  void require_complete(std::span<const Table* const> tables) const;

  Eigen::Index dim() const override { return dim_; }
  Vector encode(const AttributeRef& attribute) const override;

 private:
  static std::string key(std::string_view table, std::string_view record_id, std::size_t index);

  Eigen::Index dim_;
  std::map<std::string, Vector> vectors_;
};

/// CSV with columns table,record_id,attr_index,v0..v{d-1}.
PrecomputedIrs load_precomputed_irs(const std::string& path);
PrecomputedIrs load_precomputed_irs(const std::string& path, std::span<const Table* const> tables);
/// Exports provider outputs for every attribute of the given tables.
void save_precomputed_irs(const std::string& path, std::span<const Table* const> tables, const Provider& provider);

/// m x d matrix whose row i is the IR of attribute i.
Matrix encode_record_irs(const Table& table, const Record& record, const Provider& provider);

}  // namespace vaer::ir
