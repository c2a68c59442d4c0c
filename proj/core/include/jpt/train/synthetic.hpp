#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "jpt/data/dataset.hpp"

namespace jpt {

// Sentences "[lead-in] NAME [filler] CUE [tail]" where NAME is a place name
// that is also a given name and only CUE, which follows it, says which.
// Records come in pairs sharing lead-in, name and filler, one per reading, so
// everything up to and including the name is identical within a pair.
struct SyntheticGrammar {
  std::vector<std::string> names;
  std::vector<std::string> lead_ins;  // "" allowed
  std::vector<std::string> fillers;   // "" allowed
  std::vector<std::string> person_cues;
  std::vector<std::string> location_cues;
  // Appended after the cue to both members of a pair. Each entry is a phrase
  // plus an optional unambiguous entity inside it.
  struct Tail {
    std::string text;
    std::string entity;  // substring of text, "" for none
    bool is_person = false;
  };
  std::vector<Tail> tails;

  static SyntheticGrammar standard();
};

// Class 1 = PERSON, class 2 = LOCATION.
EntitySchema synthetic_schema();

// Deterministic under `seed`. Records alternate reading within each pair;
// ambiguous name tokens are marked.
Dataset generate_synthetic(const SyntheticGrammar& grammar, std::size_t count, std::uint64_t seed);

}  // namespace jpt
