#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relmh/problem.hpp"
#include "relmh/world.hpp"

namespace relmh {

struct OracleOptions {
  WorldBounds bounds;
  // Limit on recursion nodes visited; exceeding it throws ModelError
  // ("cap exceeded") rather than silently truncating.
  uint64_t cap = 10'000'000;
  bool keep_states = true;
};

// One minimal self-supporting state consistent with the evidence: the
// instantiated variables, the state's log prior mass, and each query's truth
// value (decidable by construction).
struct MinimalState {
  PartialWorld world;
  double log_weight = 0.0;
  std::vector<bool> query_values;
};

struct OracleResult {
  std::vector<MinimalState> states;     // populated when keep_states
  size_t n_states = 0;
  double log_evidence = 0.0;            // log sum of state masses
  std::vector<double> query_posterior;  // aligned with the query list
  uint64_t nodes_visited = 0;
  // Number-variable priors with infinite support are truncated at the stated
  // bound; each truncation is recorded so exactness claims stay honest.
  bool truncated = false;
  std::vector<std::string> truncation_notes;
};

// Exact posterior of the queries given the evidence, by enumerating every
// minimal self-supporting state consistent with the evidence (these states
// partition the evidence event, so their masses sum to its probability).
// Infinite supports need bounds: number variables use bounds.number_bound,
// non-enumerable function values use bounds.domain. Throws ModelError when a
// support cannot be enumerated, when the evidence has zero mass, or when the
// node cap is exceeded.
OracleResult exact_posterior(const Model& m, const EvidenceSet& evidence,
                             const std::vector<Query>& queries, const OracleOptions& opt = {});

// Every total world over the bounded concrete universe, with its log mass.
// Requires a finite universe: random functions must not take NaturalNum, Real,
// or String arguments, and every distribution reachable in enumeration must
// have finite support (number priors may be cut at bounds.number_bound, which
// is recorded as a truncation). Used to cross-check the partition law.
struct WorldEnumeration {
  std::vector<PartialWorld> worlds;
  std::vector<double> log_mass;
  bool truncated = false;
  std::vector<std::string> truncation_notes;
};

WorldEnumeration enumerate_worlds(const Model& m, const WorldBounds& bounds = {},
                                  uint64_t cap = 10'000'000);

}  // namespace relmh
