#include "vaer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "vaer/error.hpp"

namespace vaer::synth {

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

template <typename T>
const T& one_of(Rng& rng, const std::vector<T>& items) {
  return items[pick(rng, items.size())];
}

/// Pronounceable pseudo-words give an open vocabulary without shipping word lists.
std::string pseudo_word(Rng& rng, std::size_t min_syllables, std::size_t max_syllables) {
  static const std::vector<std::string> onsets = {"b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r",
                                                  "s", "t", "v", "z", "br", "ch", "st", "tr", "pl", "gr", "sh"};
  static const std::vector<std::string> vowels = {"a", "e", "i", "o", "u", "ai", "ea", "ou", "io"};
  static const std::vector<std::string> codas = {"", "", "", "n", "r", "l", "s", "m", "x", "nd", "rt"};
  const std::size_t syllables = min_syllables + pick(rng, max_syllables - min_syllables + 1);
  std::string word;
  for (std::size_t i = 0; i < syllables; ++i) word += one_of(rng, onsets) + one_of(rng, vowels);
  return word + one_of(rng, codas);
}

std::vector<std::string> vocabulary(Rng& rng, std::size_t size, std::size_t min_syl, std::size_t max_syl) {
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < size) {
    std::string w = pseudo_word(rng, min_syl, max_syl);
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::string digits(Rng& rng, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<char>('0' + pick(rng, 10));
  return s;
}

std::vector<std::string> split_tokens(const std::string& value) {
  std::istringstream in(value);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

/// Shared word pools of one domain.
struct Lexicon {
  std::vector<std::string> names;
  std::vector<std::string> streets;
  std::vector<std::string> cities;
  std::vector<std::string> area_codes;
  std::vector<std::string> kinds;
  std::vector<std::string> brands;
};

Lexicon make_lexicon(Domain domain, Rng& rng) {
  Lexicon lx;
  lx.names = vocabulary(rng, 900, 1, 3);
  lx.streets = vocabulary(rng, 160, 2, 3);
  lx.cities = vocabulary(rng, 14, 2, 3);
  for (std::size_t i = 0; i < lx.cities.size(); ++i) lx.area_codes.push_back(std::to_string(201 + 37 * i));
  if (domain == Domain::restaurants) {
    lx.kinds = {"american", "italian", "french", "chinese", "japanese", "mexican", "thai", "indian", "greek",
                "seafood", "steakhouse", "vegetarian", "californian", "spanish", "korean", "delis", "pizza",
                "vietnamese", "cajun", "continental"};
  } else {
    lx.kinds = {"laptop", "camera", "printer", "monitor", "keyboard", "speaker", "headphones", "router",
                "tablet", "phone", "charger", "drive", "mouse", "projector", "scanner", "microphone"};
    lx.brands = vocabulary(rng, 40, 2, 2);
  }
  return lx;
}

struct Entity {
  std::vector<std::string> values;
};

Entity restaurant(const Lexicon& lx, Rng& rng, bool rating) {
  static const std::vector<std::string> venue = {"cafe", "grill", "bistro", "kitchen", "house", "restaurant",
                                                 "bar", "diner", "garden", "room"};
  static const std::vector<std::string> suffix = {"st", "ave", "blvd", "rd", "way", "pl"};
  std::vector<std::string> name;
  const std::size_t words = 1 + pick(rng, 3);
  for (std::size_t i = 0; i < words; ++i) name.push_back(one_of(rng, lx.names));
  if (chance(rng, 0.6)) name.push_back(one_of(rng, venue));
  const std::size_t city = pick(rng, lx.cities.size());
  Entity e;
  e.values.push_back(join(name));
  e.values.push_back(std::to_string(1 + pick(rng, 9999)) + " " + one_of(rng, lx.streets) + " " + one_of(rng, suffix));
  e.values.push_back(lx.cities[city]);
  e.values.push_back(lx.area_codes[city] + "-" + digits(rng, 3) + "-" + digits(rng, 4));
  e.values.push_back(one_of(rng, lx.kinds));
  if (rating) e.values.push_back(std::to_string(1 + pick(rng, 5)) + " stars");
  return e;
}

Entity product(const Lexicon& lx, Rng& rng, bool rating) {
  static const std::vector<std::string> qualifiers = {"pro", "mini", "max", "plus", "lite", "ultra", "classic",
                                                      "wireless", "portable", "compact"};
  const std::string brand = one_of(rng, lx.brands);
  const std::string kind = one_of(rng, lx.kinds);
  std::string model;
  model += static_cast<char>('a' + pick(rng, 26));
  model += static_cast<char>('a' + pick(rng, 26));
  model += digits(rng, 3 + pick(rng, 2));
  std::vector<std::string> title = {brand, one_of(rng, lx.names), model};
  if (chance(rng, 0.5)) title.push_back(one_of(rng, qualifiers));
  title.push_back(kind);
  std::vector<std::string> description;
  const std::size_t words = 3 + pick(rng, 4);
  for (std::size_t i = 0; i < words; ++i) description.push_back(one_of(rng, lx.names));
  Entity e;
  e.values.push_back(join(title));
  e.values.push_back(brand);
  e.values.push_back(kind);
  e.values.push_back(std::to_string(10 + pick(rng, 1990)) + " " + digits(rng, 2));
  e.values.push_back(join(description));
  if (rating) e.values.push_back(std::to_string(1 + pick(rng, 5)) + " stars");
  return e;
}

std::vector<std::string> attribute_names(Domain domain, bool rating) {
  std::vector<std::string> names = domain == Domain::restaurants
                                       ? std::vector<std::string>{"name", "address", "city", "phone", "type"}
                                       : std::vector<std::string>{"title", "brand", "category", "price", "description"};
  if (rating) names.push_back("rating");
  return names;
}

Entity fresh(Domain domain, const Lexicon& lx, Rng& rng, bool rating) {
  return domain == Domain::restaurants ? restaurant(lx, rng, rating) : product(lx, rng, rating);
}

/// Same name (or title) as `base` with everything else drawn anew.
Entity sibling(const Entity& base, Domain domain, const Lexicon& lx, Rng& rng, bool rating) {
  Entity e = fresh(domain, lx, rng, rating);
  e.values[0] = base.values[0];
  if (domain == Domain::products) e.values[1] = base.values[1];
  return e;
}

std::string perturb(const std::string& value, const SynthConfig& config, Rng& rng) {
  std::vector<std::string> tokens = split_tokens(value);
  if (tokens.empty()) return value;
  if (tokens.size() > 1 && chance(rng, config.drop_rate)) tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(pick(rng, tokens.size())));
  if (chance(rng, config.edit_rate)) {
    std::string& t = tokens[pick(rng, tokens.size())];
    t = edit_characters(t, rng());
  }
  return join(tokens);
}

Entity noisy_copy(const Entity& base, const SynthConfig& config, Rng& rng) {
  Entity e;
  for (const std::string& v : base.values) e.values.push_back(perturb(v, config, rng));
  return e;
}

std::string make_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i);
  return buf;
}

}  // namespace

std::string edit_characters(const std::string& token, std::uint64_t seed) {
  Rng rng(seed);
  std::string t = token;
  const char letter = static_cast<char>('a' + pick(rng, 26));
  if (t.empty()) return std::string(1, letter);
  const std::size_t pos = pick(rng, t.size());
  switch (pick(rng, t.size() > 1 ? 4 : 2)) {
    case 0: t[pos] = t[pos] == letter ? static_cast<char>('a' + (letter - 'a' + 1) % 26) : letter; break;
    case 1: t.insert(t.begin() + static_cast<std::ptrdiff_t>(pos), letter); break;
    case 2: t.erase(t.begin() + static_cast<std::ptrdiff_t>(pos)); break;
    default: {
      const std::size_t a = pos + 1 < t.size() ? pos : pos - 1;
      if (t[a] == t[a + 1]) t[a] = letter;
      else std::swap(t[a], t[a + 1]);
    }
  }
  return t;
}

SynthDataset generate(const SynthConfig& config) {
  if (config.duplicates > config.left_size || config.duplicates > config.right_size) {
    throw FormatError("synth: more duplicates than records");
  }
  Rng rng(config.seed);
  const Lexicon lx = make_lexicon(config.domain, rng);
  const bool rating = config.rating_column;

  // entities are unique on their first attribute unless deliberately siblings
  std::set<std::string> used_names;
  auto new_entity = [&](const std::vector<Entity>& pool) {
    if (!pool.empty() && chance(rng, config.sibling_rate)) {
      return sibling(pool[pick(rng, pool.size())], config.domain, lx, rng, rating);
    }
    for (;;) {
      Entity e = fresh(config.domain, lx, rng, rating);
      if (used_names.insert(e.values[0]).second) return e;
    }
  };

  std::vector<Entity> left_entities;
  for (std::size_t i = 0; i < config.left_size; ++i) left_entities.push_back(new_entity(left_entities));

  std::vector<std::size_t> order(config.left_size);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(config.duplicates);

  struct RightRow {
    Entity entity;
    std::optional<std::size_t> source;
  };
  std::vector<RightRow> right_rows;
  for (std::size_t src : order) right_rows.push_back({noisy_copy(left_entities[src], config, rng), src});
  while (right_rows.size() < config.right_size) right_rows.push_back({new_entity(left_entities), std::nullopt});
  std::shuffle(right_rows.begin(), right_rows.end(), rng);

  SynthDataset data;
  const auto attrs = attribute_names(config.domain, rating);
  std::vector<Record> left_records, right_records;
  for (std::size_t i = 0; i < left_entities.size(); ++i) left_records.push_back({make_id('a', i), left_entities[i].values});
  for (std::size_t i = 0; i < right_rows.size(); ++i) {
    right_records.push_back({make_id('b', i), right_rows[i].entity.values});
    if (right_rows[i].source) data.duplicates.push_back({make_id('a', *right_rows[i].source), make_id('b', i)});
  }
  std::sort(data.duplicates.begin(), data.duplicates.end());
  const std::string prefix = config.domain == Domain::restaurants ? "restaurants" : "products";
  data.left = Table(prefix + "_a", attrs, std::move(left_records));
  data.right = Table(prefix + "_b", attrs, std::move(right_records));
  return data;
}

SynthConfig restaurants_scale(std::uint64_t seed) {
  SynthConfig config;
  config.left_size = 533;
  config.right_size = 331;
  config.duplicates = 112;
  config.rating_column = true;
  config.seed = seed;
  return config;
}

PairSet labeled_pairs(const SynthDataset& data, std::size_t negatives, std::uint64_t seed) {
  Rng rng(seed);
  std::set<PairKey> taken(data.duplicates.begin(), data.duplicates.end());
  std::vector<LabeledKey> out;
  for (const PairKey& d : data.duplicates) out.push_back({d, 1});
  const std::size_t max_negatives = data.left.size() * data.right.size() - taken.size();
  if (negatives > max_negatives) throw FormatError("synth: not enough non-duplicate pairs");

  // hard negatives share a whole attribute value (city, brand, name ...)
  std::vector<std::pair<std::size_t, std::size_t>> hard;
  for (std::size_t i = 0; i < data.left.size(); ++i)
    for (std::size_t j = 0; j < data.right.size(); ++j) {
      const auto& a = data.left.at(i).values;
      const auto& b = data.right.at(j).values;
      if (a[0] == b[0] || (a.size() > 1 && a[1] == b[1])) hard.emplace_back(i, j);
    }
  std::shuffle(hard.begin(), hard.end(), rng);
  std::size_t added = 0;
  for (const auto& [i, j] : hard) {
    if (added >= negatives / 2) break;
    PairKey key{data.left.at(i).id, data.right.at(j).id};
    if (taken.insert(key).second) {
      out.push_back({key, 0});
      ++added;
    }
  }
  while (added < negatives) {
    PairKey key{data.left.at(pick(rng, data.left.size())).id, data.right.at(pick(rng, data.right.size())).id};
    if (taken.insert(key).second) {
      out.push_back({key, 0});
      ++added;
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return PairSet(std::move(out));
}

std::pair<PairSet, PairSet> split_pairs(const PairSet& pairs, std::size_t first_size, std::uint64_t seed) {
  if (first_size > pairs.size()) throw FormatError("split_pairs: split larger than the set");
  Rng rng(seed);
  std::vector<LabeledKey> pos, neg;
  for (const LabeledKey& p : pairs.pairs()) (p.label == 1 ? pos : neg).push_back(p);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  // stratified: the first part gets its proportional share of positives
  const double share = pairs.empty() ? 0.0 : static_cast<double>(first_size) / static_cast<double>(pairs.size());
  std::size_t first_pos = static_cast<std::size_t>(std::llround(share * static_cast<double>(pos.size())));
  first_pos = std::min({first_pos, pos.size(), first_size});
  if (first_size - first_pos > neg.size()) first_pos = first_size - neg.size();
  std::vector<LabeledKey> a(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(first_pos));
  std::vector<LabeledKey> b(pos.begin() + static_cast<std::ptrdiff_t>(first_pos), pos.end());
  const std::size_t first_neg = first_size - first_pos;
  a.insert(a.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(first_neg));
  b.insert(b.end(), neg.begin() + static_cast<std::ptrdiff_t>(first_neg), neg.end());
  std::shuffle(a.begin(), a.end(), rng);
  std::shuffle(b.begin(), b.end(), rng);
  return {PairSet(std::move(a)), PairSet(std::move(b))};
}

}  // namespace vaer::synth
