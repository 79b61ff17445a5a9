#include <doctest.h>

#include <set>

#include "vaer/synth.hpp"

using namespace vaer;

namespace {

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

TEST_CASE("generated tables have the requested shape") {
  const auto data = synth::generate({});
  CHECK(data.left.size() == 250);
  CHECK(data.right.size() == 250);
  CHECK(data.left.arity() == 5);
  CHECK(data.duplicates.size() == 100);
  std::set<std::string> lefts, rights;
  for (const auto& d : data.duplicates) {
    CHECK(data.left.contains(d.left));
    CHECK(data.right.contains(d.right));
    lefts.insert(d.left), rights.insert(d.right);
  }
  CHECK(lefts.size() == 100);
  CHECK(rights.size() == 100);

  const auto scale = synth::generate(synth::restaurants_scale(2));
  CHECK(scale.left.size() == 533);
  CHECK(scale.right.size() == 331);
  CHECK(scale.left.arity() == 6);
  CHECK(scale.duplicates.size() == 112);

  synth::SynthConfig products;
  products.domain = synth::Domain::products;
  CHECK(synth::generate(products).left.attributes().front() == "title");
}

TEST_CASE("generation is deterministic in the seed") {
  synth::SynthConfig config;
  config.seed = 5;
  const auto a = synth::generate(config), b = synth::generate(config);
  CHECK(a.left == b.left);
  CHECK(a.right == b.right);
  CHECK(a.duplicates == b.duplicates);
  config.seed = 6;
  CHECK_FALSE(synth::generate(config).left == a.left);
}

TEST_CASE("duplicates are noisy but recognisable copies") {
  const auto data = synth::generate({});
  std::size_t identical = 0, close = 0;
  for (const auto& d : data.duplicates) {
    const auto& l = data.left.get(d.left).values;
    const auto& r = data.right.get(d.right).values;
    identical += l == r;
    std::size_t distance = 0, length = 0;
    for (std::size_t i = 0; i < l.size(); ++i) distance += levenshtein(l[i], r[i]), length += l[i].size();
    close += distance * 3 < length;
  }
  CHECK(identical < 20);
  CHECK(close == data.duplicates.size());
}

TEST_CASE("character edits") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::string edited = synth::edit_characters("pasadena", seed);
    CHECK(edited != "pasadena");
    CHECK(levenshtein(edited, "pasadena") <= 2);
  }
}

TEST_CASE("labeled pairs and stratified splits") {
  const auto data = synth::generate({});
  const auto labeled = synth::labeled_pairs(data, 200, 3);
  CHECK(labeled.size() == 300);
  CHECK(labeled.count(1) == 100);
  const std::set<PairKey> dups(data.duplicates.begin(), data.duplicates.end());
  for (const auto& p : labeled.pairs()) CHECK((p.label == 1) == dups.contains(p.pair));

  const auto [train, test] = synth::split_pairs(labeled, 200, 4);
  CHECK(train.size() == 200);
  CHECK(test.size() == 100);
  CHECK(train.count(1) > 50);
  CHECK(test.count(1) > 20);
  std::set<PairKey> seen;
  for (const auto& p : train.pairs()) seen.insert(p.pair);
  for (const auto& p : test.pairs()) CHECK_FALSE(seen.contains(p.pair));
  const auto again = synth::split_pairs(labeled, 200, 4);
  CHECK(again.first.pairs() == train.pairs());
}
