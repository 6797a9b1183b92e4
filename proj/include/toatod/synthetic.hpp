#pragma once

#include <cstdint>

#include "toatod/corpus.hpp"

namespace toatod {

struct OntologySize {
  int n_domains = 2;  // <= 3
  int n_slots = 3;    // informable slots per domain, <= 4
  int n_values = 5;   // values per informable slot, 2..10
  int n_entities = 8; // DB rows per domain
};

// Desk-scale corpus with the same schema as a real one. Deterministic in
// `seed`; every session validates and its goal is satisfiable from the DB.
Corpus generate_synthetic_corpus(std::uint64_t seed, int n_sessions, const OntologySize& size = {});

}  // namespace toatod
