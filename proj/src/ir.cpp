#include "vaer/ir.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "binary_io.hpp"
#include "vaer/csv.hpp"
#include "vaer/error.hpp"

namespace vaer::ir {

namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

Matrix orthonormal_basis(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

// Right singular vectors and values of `x`, truncated to `dim`.
void dense_svd(const SparseRows& x, Eigen::Index dim, Matrix& right, Vector& values) {
  Matrix dense = Matrix(x);
  Eigen::BDCSVD<Matrix> svd(dense, Eigen::ComputeThinV);
  right = svd.matrixV().leftCols(dim);
  values = svd.singularValues().head(dim);
}

// Randomized range finder with subspace iteration, followed by an exact SVD
// of the small projected matrix.
void randomized_svd(const SparseRows& x, Eigen::Index dim, const LsaOptions& options, Matrix& right, Vector& values) {
  const Eigen::Index width = std::min<Eigen::Index>(dim + options.oversample, std::min(x.rows(), x.cols()));
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  Matrix omega(x.cols(), width);
  for (Eigen::Index r = 0; r < omega.rows(); ++r)
    for (Eigen::Index c = 0; c < width; ++c) omega(r, c) = normal(rng);

  Matrix q = orthonormal_basis(x * omega);
  for (int it = 0; it < options.power_iterations; ++it) {
    Matrix z = orthonormal_basis(Matrix(x.transpose() * q));
    q = orthonormal_basis(x * z);
  }
  // B^T = X^T Q is |V| x width; its left singular vectors are X's right ones.
  Matrix bt = x.transpose() * q;
  Eigen::BDCSVD<Matrix> svd(bt, Eigen::ComputeThinU);
  right = svd.matrixU().leftCols(dim);
  values = svd.singularValues().head(dim);
}

}  // namespace

std::vector<std::string> lsa_terms(std::string_view text, std::size_t char_ngram) {
  std::vector<std::string> terms = tokenize_value(text);
  if (char_ngram == 0) return terms;
  const std::size_t words = terms.size();
  for (std::size_t i = 0; i < words; ++i) {
    const std::string padded = "^" + terms[i] + "$";
    if (padded.size() <= char_ngram) {
      terms.push_back("~" + padded);
      continue;
    }
    for (std::size_t p = 0; p + char_ngram <= padded.size(); ++p) terms.push_back("~" + padded.substr(p, char_ngram));
  }
  return terms;
}

std::vector<std::string> corpus_sentences(const Table& left, const Table& right) {
  std::vector<std::string> out;
  for (const Table* t : {&left, &right}) {
    for (const Record& r : t->records()) {
      for (const std::string& v : r.values) {
        if (!v.empty()) out.push_back(v);
      }
    }
  }
  return out;
}

LsaModel LsaModel::fit(std::span<const std::string> corpus, Eigen::Index dim, const LsaOptions& options) {
  if (dim < 1) throw FormatError("LSA dimension must be positive");
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  std::map<std::string, std::size_t> document_frequency;
  for (const std::string& sentence : corpus) {
    auto tokens = lsa_terms(sentence, options.char_ngram);
    if (tokens.empty()) continue;
    std::vector<std::string> unique = tokens;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (const auto& t : unique) ++document_frequency[t];
    docs.push_back(std::move(tokens));
  }
  if (docs.empty()) throw FormatError("LSA corpus has no tokens");

  LsaModel model;
  model.char_ngram_ = options.char_ngram;
  const auto n_docs = static_cast<Eigen::Index>(docs.size());
  const auto n_terms = static_cast<Eigen::Index>(document_frequency.size());
  const Eigen::Index feasible = std::min(n_docs, n_terms);
  if (dim > feasible) {
    throw FormatError("LSA dimension " + std::to_string(dim) + " too large for corpus (" + std::to_string(n_docs) +
                      " sentences, " + std::to_string(n_terms) + " terms); max feasible d = " +
                      std::to_string(feasible));
  }

  model.idf_.resize(n_terms);
  Eigen::Index col = 0;
  for (const auto& [token, df] : document_frequency) {
    model.vocabulary_.emplace(token, col);
    model.tokens_.push_back(token);
    model.idf_[col] = std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
    ++col;
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index r = 0; r < n_docs; ++r) {
    std::map<Eigen::Index, double> counts;
    for (const auto& t : docs[static_cast<std::size_t>(r)]) counts[model.vocabulary_.at(t)] += 1.0;
    double norm = 0.0;
    for (auto& [c, w] : counts) {
      w *= model.idf_[c];
      norm += w * w;
    }
    norm = std::sqrt(norm);
    for (const auto& [c, w] : counts) triplets.emplace_back(r, c, w / norm);
  }
  SparseRows x(n_docs, n_terms);
  x.setFromTriplets(triplets.begin(), triplets.end());

  bool dense = options.solver == LsaOptions::Solver::dense;
  if (options.solver == LsaOptions::Solver::automatic) {
    dense = n_docs * n_terms <= 400'000 || dim + options.oversample >= feasible;
  }
  Matrix right;
  if (dense) {
    dense_svd(x, dim, right, model.singular_values_);
  } else {
    randomized_svd(x, dim, options, right, model.singular_values_);
  }
  model.projection_ = right.transpose();

  if (options.energy_per_dim > 0) {
    // Measured on the projected rows: the randomized solver's singular
    // values are only approximate.
    const double energy = Matrix(x * right).squaredNorm() / static_cast<double>(n_docs);
    model.scale_ = energy > 0 ? std::sqrt(options.energy_per_dim * static_cast<double>(dim) / energy) : 1.0;
  }
  return model;
}

LsaModel fit_lsa(std::span<const std::string> corpus, Eigen::Index dim, const LsaOptions& options) {
  return LsaModel::fit(corpus, dim, options);
}

Eigen::Index LsaModel::column(const std::string& token) const {
  auto it = vocabulary_.find(token);
  return it == vocabulary_.end() ? -1 : it->second;
}

std::vector<std::pair<Eigen::Index, double>> LsaModel::tfidf(std::string_view text) const {
  std::map<Eigen::Index, double> counts;
  for (const auto& t : lsa_terms(text, char_ngram_)) {
    const Eigen::Index c = column(t);
    if (c >= 0) counts[c] += 1.0;
  }
  double norm = 0.0;
  for (auto& [c, w] : counts) {
    w *= idf_[c];
    norm += w * w;
  }
  std::vector<std::pair<Eigen::Index, double>> out;
  if (norm == 0.0) return out;
  norm = std::sqrt(norm);
  out.reserve(counts.size());
  for (const auto& [c, w] : counts) out.emplace_back(c, w / norm);
  return out;
}

Vector LsaModel::project_unscaled(std::string_view text) const {
  Vector out = Vector::Zero(dim());
  for (const auto& [c, w] : tfidf(text)) out += w * projection_.col(c);
  return out;
}

Vector LsaModel::encode_text(std::string_view text) const { return scale_ * project_unscaled(text); }

void LsaModel::save(const std::string& path) const {
  io::BinaryWriter w(path);
  w.magic("VAERLSA1");
  w.u64(char_ngram_);
  w.u64(tokens_.size());
  for (const auto& t : tokens_) w.str(t);
  w.vector(idf_);
  w.matrix(projection_);
  w.vector(singular_values_);
  w.f64(scale_);
  w.close();
}

LsaModel LsaModel::load(const std::string& path) {
  io::BinaryReader r(path);
  r.expect_magic("VAERLSA1");
  LsaModel model;
  model.char_ngram_ = r.u64();
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    model.tokens_.push_back(r.str());
    model.vocabulary_.emplace(model.tokens_.back(), static_cast<Eigen::Index>(i));
  }
  model.idf_ = r.vector();
  model.projection_ = r.matrix();
  model.singular_values_ = r.vector();
  model.scale_ = r.f64();
  if (model.idf_.size() != static_cast<Eigen::Index>(n) || model.projection_.cols() != static_cast<Eigen::Index>(n)) {
    throw FormatError(path + ": inconsistent LSA model shapes");
  }
  return model;
}

EmbeddingTable EmbeddingTable::load_word2vec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("no such file or unreadable: " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) throw FormatError(path + ":" + std::to_string(line_no) + ": non-numeric vector entry");
    if (line_no == 1 && values.size() == 1) continue;  // "count dim" header
    if (values.empty()) throw FormatError(path + ":" + std::to_string(line_no) + ": token without vector");
    table.add(token, Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  if (table.size() == 0) throw FormatError(path + ": no embeddings");
  return table;
}

void EmbeddingTable::add(const std::string& token, Vector vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw DimensionError("embedding for '" + token + "' has dimension " + std::to_string(vector.size()) +
                         ", expected " + std::to_string(dim_));
  }
  if (!vector.allFinite()) throw FormatError("embedding for '" + token + "' is not finite");
  vectors_.insert_or_assign(token, std::move(vector));
}

const Vector* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

Vector EmbeddingTable::encode(const AttributeRef& attribute) const { return ir_embedding_average(*this, attribute.value); }

Vector ir_embedding_average(const EmbeddingTable& table, std::string_view value) {
  Vector sum = Vector::Zero(table.dim());
  std::size_t hits = 0;
  for (const auto& t : tokenize_value(value)) {
    if (const Vector* v = table.find(t)) {
      sum += *v;
      ++hits;
    }
  }
  if (hits > 0) sum /= static_cast<double>(hits);
  return sum;
}

std::string PrecomputedIrs::key(std::string_view table, std::string_view record_id, std::size_t index) {
  std::string k;
  k.reserve(table.size() + record_id.size() + 24);
  k.append(table).push_back('\x1f');
  k.append(record_id).push_back('\x1f');
  k.append(std::to_string(index));
  return k;
}

void PrecomputedIrs::insert(const std::string& table, const std::string& record_id, std::size_t index, Vector vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw DimensionError("IR for (" + table + ", " + record_id + ", " + std::to_string(index) + ") has dimension " +
                         std::to_string(vector.size()) + ", expected " + std::to_string(dim_));
  }
  vectors_.insert_or_assign(key(table, record_id, index), std::move(vector));
}

const Vector* PrecomputedIrs::find(std::string_view table, std::string_view record_id, std::size_t index) const {
  auto it = vectors_.find(key(table, record_id, index));
  return it == vectors_.end() ? nullptr : &it->second;
}

void PrecomputedIrs::require_complete(std::span<const Table* const> tables) const {
  std::vector<std::string> missing;
  std::size_t total_missing = 0;
  for (const Table* t : tables) {
    for (const Record& r : t->records()) {
      for (std::size_t i = 0; i < t->arity(); ++i) {
        if (find(t->name(), r.id, i)) continue;
        ++total_missing;
        if (missing.size() < 10) missing.push_back("(" + t->name() + ", " + r.id + ", " + std::to_string(i) + ")");
      }
    }
  }
  if (total_missing == 0) return;
  std::string msg = "precomputed IRs missing " + std::to_string(total_missing) + " key(s):";
  for (const auto& m : missing) msg += " " + m;
  throw FormatError(msg);
}

Vector PrecomputedIrs::encode(const AttributeRef& attribute) const {
  if (const Vector* v = find(attribute.table, attribute.record_id, attribute.index)) return *v;
  throw FormatError("no precomputed IR for (" + std::string(attribute.table) + ", " +
                    std::string(attribute.record_id) + ", " + std::to_string(attribute.index) + ")");
}

PrecomputedIrs load_precomputed_irs(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw FormatError(path + ": empty IR file");
  const csv::Row& header = rows.front();
  if (header.size() < 4 || header[0] != "table" || header[1] != "record_id" || header[2] != "attr_index") {
    throw FormatError(path + ": header must be table,record_id,attr_index,v0..v{d-1}");
  }
  const auto dim = static_cast<Eigen::Index>(header.size() - 3);
  PrecomputedIrs irs(dim);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const csv::Row& row = rows[r];
    if (row.size() != header.size()) {
      throw DimensionError(path + ": row " + std::to_string(r) + " has " + std::to_string(row.size() - 3) +
                           " vector entries, expected " + std::to_string(dim));
    }
    Vector v(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const std::string& cell = row[static_cast<std::size_t>(j) + 3];
      char* end = nullptr;
      v[j] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') throw FormatError(path + ": row " + std::to_string(r) + ": bad number '" + cell + "'");
    }
    irs.insert(row[0], row[1], std::stoul(row[2]), std::move(v));
  }
  return irs;
}

PrecomputedIrs load_precomputed_irs(const std::string& path, std::span<const Table* const> tables) {
  PrecomputedIrs irs = load_precomputed_irs(path);
  irs.require_complete(tables);
  return irs;
}

void save_precomputed_irs(const std::string& path, std::span<const Table* const> tables, const Provider& provider) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  csv::Row header{"table", "record_id", "attr_index"};
  for (Eigen::Index j = 0; j < provider.dim(); ++j) header.push_back("v" + std::to_string(j));
  csv::write_row(out, header);
  char buf[32];
  for (const Table* t : tables) {
    for (const Record& r : t->records()) {
      for (std::size_t i = 0; i < t->arity(); ++i) {
        const Vector v = provider.encode({t->name(), r.id, i, r.values[i]});
        csv::Row row{t->name(), r.id, std::to_string(i)};
        for (Eigen::Index j = 0; j < v.size(); ++j) {
          std::snprintf(buf, sizeof buf, "%.17g", v[j]);
          row.emplace_back(buf);
        }
        csv::write_row(out, row);
      }
    }
  }
}

Matrix encode_record_irs(const Table& table, const Record& record, const Provider& provider) {
  Matrix out(static_cast<Eigen::Index>(record.values.size()), provider.dim());
  for (std::size_t i = 0; i < record.values.size(); ++i) {
    const Vector v = provider.encode({table.name(), record.id, i, record.values[i]});
    if (v.size() != provider.dim()) throw DimensionError("IR provider returned a vector of the wrong dimension");
    out.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return out;
}

}  // namespace vaer::ir
