#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "support/fixtures.hpp"
#include "vaer/error.hpp"
#include "vaer/ir.hpp"
#include "vaer/synth.hpp"

using namespace vaer;
using doctest::Approx;

namespace {

// TF-IDF rows built straight from the definition: raw counts times the
// smoothed idf ln((1 + N) / (1 + df)) + 1, then unit L2 rows.
Eigen::MatrixXd tfidf_oracle(const std::vector<std::string>& docs, std::size_t n, std::vector<std::string>& vocab) {
  std::vector<std::map<std::string, double>> counts;
  std::map<std::string, double> df;
  for (const auto& d : docs) {
    std::map<std::string, double> c;
    for (const auto& t : ir::lsa_terms(d, n)) c[t] += 1;
    for (const auto& [t, _] : c) df[t] += 1;
    counts.push_back(c);
  }
  vocab.clear();
  for (const auto& [t, _] : df) vocab.push_back(t);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(vocab.size()));
  const double N = static_cast<double>(docs.size());
  for (std::size_t r = 0; r < docs.size(); ++r) {
    for (std::size_t c = 0; c < vocab.size(); ++c) {
      auto it = counts[r].find(vocab[c]);
      if (it != counts[r].end()) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = it->second * (std::log((1 + N) / (1 + df[vocab[c]])) + 1);
    }
    x.row(static_cast<Eigen::Index>(r)).normalize();
  }
  return x;
}

std::vector<std::string> sentences(std::uint64_t seed, std::size_t size) {
  synth::SynthConfig config;
  config.left_size = size;
  config.right_size = size;
  config.duplicates = size / 2;
  config.seed = seed;
  const auto data = synth::generate(config);
  return ir::corpus_sentences(data.left, data.right);
}

}  // namespace

TEST_CASE("terms are words plus marked character trigrams") {
  CHECK(ir::lsa_terms("Hi there", 0) == std::vector<std::string>{"hi", "there"});
  CHECK(ir::lsa_terms("Hi there", 3) ==
        std::vector<std::string>{"hi", "there", "~^hi", "~hi$", "~^th", "~the", "~her", "~ere", "~re$"});
  CHECK(ir::lsa_terms("a", 3) == std::vector<std::string>{"a", "~^a$"});
}

TEST_CASE("tf-idf weights match the definition") {
  const std::vector<std::string> docs{"red apple", "green apple apple", "red red car"};
  ir::LsaOptions options;
  options.char_ngram = 0;
  const auto lsa = ir::fit_lsa(docs, 2, options);
  std::vector<std::string> vocab;
  const auto x = tfidf_oracle(docs, 0, vocab);
  REQUIRE(lsa.vocabulary_size() == vocab.size());
  // "apple" appears in 2 of 3 documents.
  CHECK(lsa.idf()[lsa.column("apple")] == Approx(std::log(4.0 / 3.0) + 1));
  for (std::size_t r = 0; r < docs.size(); ++r) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(x.cols());
    for (const auto& [c, w] : lsa.tfidf(docs[r])) {
      for (std::size_t oc = 0; oc < vocab.size(); ++oc)
        if (lsa.column(vocab[oc]) == c) row(static_cast<Eigen::Index>(oc)) = w;
    }
    CHECK((row.transpose() - x.row(static_cast<Eigen::Index>(r))).norm() < 1e-12);
  }
  CHECK(lsa.tfidf("unknown words only").empty());
  CHECK(lsa.encode_text("unknown").isZero());
}

TEST_CASE("projection spans the top right singular vectors of the tf-idf matrix") {
  const auto docs = sentences(3, 40);
  const Eigen::Index d = 12;
  std::vector<std::string> nonempty;
  for (const auto& s : docs)
    if (!ir::lsa_terms(s, 3).empty()) nonempty.push_back(s);
  std::vector<std::string> vocab;
  const auto x = tfidf_oracle(nonempty, 3, vocab);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues().head(d);
  const Eigen::MatrixXd v = svd.matrixV().leftCols(d);
  const double best_energy = s.squaredNorm();

  auto fitted = [&](ir::LsaOptions::Solver solver) {
    ir::LsaOptions options;
    options.solver = solver;
    const auto lsa = ir::fit_lsa(docs, d, options);
    // Projection columns in oracle vocabulary order.
    Eigen::MatrixXd p(d, static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t c = 0; c < vocab.size(); ++c) p.col(static_cast<Eigen::Index>(c)) = lsa.projection().col(lsa.column(vocab[c]));
    CHECK((p * p.transpose() - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-9);
    return std::pair{lsa.singular_values(), p};
  };

  SUBCASE("dense solver is exact") {
    const auto [values, p] = fitted(ir::LsaOptions::Solver::dense);
    CHECK((values - s).cwiseAbs().maxCoeff() < 1e-9 * s(0));
    // Projectors are immune to sign flips of individual vectors.
    CHECK(((p.transpose() * p) - (v * v.transpose())).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("randomized solver is close") {
    const auto [values, p] = fitted(ir::LsaOptions::Solver::randomized);
    CHECK((values - s).cwiseAbs().maxCoeff() < 0.02 * s(0));
    CHECK(Eigen::MatrixXd(x * p.transpose()).squaredNorm() > 0.99 * best_energy);
  }
}

TEST_CASE("outputs are rescaled to the requested energy per dimension") {
  const auto docs = sentences(4, 40);
  ir::LsaOptions options;
  options.energy_per_dim = 2.0;
  const auto lsa = ir::fit_lsa(docs, 20, options);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : docs) {
    if (ir::lsa_terms(s, 3).empty()) continue;
    total += lsa.encode_text(s).squaredNorm();
    ++n;
  }
  CHECK(total / static_cast<double>(n) == Approx(2.0 * 20).epsilon(1e-9));
  CHECK((lsa.encode_text(docs[0]) - lsa.output_scale() * lsa.project_unscaled(docs[0])).norm() < 1e-12);
}

TEST_CASE("dimension larger than the corpus allows names the maximum") {
  const std::vector<std::string> docs{"a b", "b c"};
  ir::LsaOptions options;
  options.char_ngram = 0;
  CHECK_THROWS_WITH_AS(ir::fit_lsa(docs, 5, options), doctest::Contains("max feasible d = 2"), FormatError);
  CHECK_THROWS_AS(ir::fit_lsa(std::vector<std::string>{"", "  "}, 1), FormatError);
}

TEST_CASE("lsa model save/load round trip") {
  testing::TempDir dir;
  const auto docs = sentences(5, 30);
  const auto lsa = ir::fit_lsa(docs, 10);
  lsa.save(dir.file("m.lsa"));
  const auto back = ir::LsaModel::load(dir.file("m.lsa"));
  CHECK(back.char_ngram() == 3);
  CHECK(back.projection() == lsa.projection());
  CHECK(back.encode_text(docs[2]) == lsa.encode_text(docs[2]));
  testing::write_text(dir.file("junk.lsa"), "not a model");
  CHECK_THROWS_AS(ir::LsaModel::load(dir.file("junk.lsa")), FormatError);
  CHECK_THROWS_AS(ir::LsaModel::load(dir.file("absent.lsa")), IoError);
}

TEST_CASE("embedding average") {
  testing::TempDir dir;
  testing::write_text(dir.file("w2v.txt"), "3 2\nred 1 0\napple 0 2\ncar -1 -1\n");
  const auto table = ir::EmbeddingTable::load_word2vec(dir.file("w2v.txt"));
  CHECK(table.size() == 3);
  CHECK(table.dim() == 2);
  const auto v = ir::ir_embedding_average(table, "Red APPLE pie");
  CHECK(v(0) == Approx(0.5));
  CHECK(v(1) == Approx(1.0));
  CHECK(ir::ir_embedding_average(table, "pie").isZero());
  testing::write_text(dir.file("ragged.txt"), "red 1 0\napple 0 2 3\n");
  CHECK_THROWS_AS(ir::EmbeddingTable::load_word2vec(dir.file("ragged.txt")), DimensionError);
}

TEST_CASE("precomputed IRs round trip and report missing keys") {
  testing::TempDir dir;
  const Table t = parse_table("id,a,b\nx,red apple,car\ny,green,\n", "shop", {',', std::string("id"), {}});
  ir::LsaOptions options;
  options.char_ngram = 0;
  const auto lsa = ir::fit_lsa(ir::corpus_sentences(t, t), 2, options);
  const Table* tables[] = {&t};
  ir::save_precomputed_irs(dir.file("irs.csv"), tables, lsa);
  const auto irs = ir::load_precomputed_irs(dir.file("irs.csv"), tables);
  CHECK(irs.size() == 4);
  CHECK((ir::encode_record_irs(t, t.at(0), irs) - ir::encode_record_irs(t, t.at(0), lsa)).norm() < 1e-12);

  testing::write_text(dir.file("partial.csv"), "table,record_id,attr_index,v0,v1\nshop,x,0,1,2\n");
  CHECK_THROWS_WITH_AS(ir::load_precomputed_irs(dir.file("partial.csv"), tables), doctest::Contains("(shop, y, 1)"),
                       FormatError);
}
