#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vaer/corpus.hpp"

namespace vaer::synth {

enum class Domain { restaurants, products };

struct SynthConfig {
  Domain domain = Domain::restaurants;
  std::size_t left_size = 250;
  std::size_t right_size = 250;
  std::size_t duplicates = 100;
  /// Per attribute of a duplicate: chance of one character edit ...
  double edit_rate = 0.35;
  /// ... and of dropping one token (never the last one).
  double drop_rate = 0.25;
  /// Share of entities that copy another entity's name with other details
  /// changed (hard negatives).
  double sibling_rate = 0.15;
  /// Extra attributes appended to the domain's own (restaurants have 5).
  bool rating_column = false;
  std::uint64_t seed = 1;
};

/// Two tables whose planted duplicates are known.
struct SynthDataset {
  Table left;
  Table right;
  std::vector<PairKey> duplicates;
};

SynthDataset generate(const SynthConfig& config);

/// Restaurants-sized benchmark stand-in: 533 / 331 records, arity 6, 112 duplicates.
SynthConfig restaurants_scale(std::uint64_t seed = 1);

/// Every duplicate plus `negatives` non-duplicates, half of them sharing a
/// token-heavy attribute with the left record (hard) and half random.
PairSet labeled_pairs(const SynthDataset& data, std::size_t negatives, std::uint64_t seed);

/// Deterministic shuffle-and-split: first `first_size` pairs, then the rest.
/// Both parts keep at least one pair of each label when the input has them.
std::pair<PairSet, PairSet> split_pairs(const PairSet& pairs, std::size_t first_size, std::uint64_t seed);

/// Applies one character edit (substitution, deletion, insertion or
/// transposition) to a random position.
std::string edit_characters(const std::string& token, std::uint64_t seed);

}  // namespace vaer::synth
