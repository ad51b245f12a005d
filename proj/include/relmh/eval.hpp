#pragma once

#include <span>
#include <vector>

#include "relmh/distribution.hpp"
#include "relmh/world.hpp"

namespace relmh {

// Result of evaluating a term against a partial instantiation. When a read
// hits an uninstantiated variable the evaluation stops; `reads` then ends
// with that variable and `supported` is false.
struct TermResult {
  bool supported = false;
  Value value;
  std::vector<BasicVariable> reads;

  const BasicVariable& blocked() const { return reads.back(); }
};

// Result of locating and instantiating a variable's distribution: the chosen
// clause's distribution with parameters evaluated, plus the active parents
// (every variable read along the way, in read order, deduplicated).
struct DependencyResult {
  bool supported = false;
  DistInstance dist;
  std::vector<BasicVariable> active_parents;

  const BasicVariable& blocked() const { return active_parents.back(); }
};

TermResult evaluate_term(const WorldView& w, const Term& term, std::span<const Value> bindings);

DependencyResult evaluate_dependency(const WorldView& w, const BasicVariable& var);

// log p(value(var) | world) under the variable's instantiated distribution.
// Precondition: var is instantiated and its dependency is supported.
double var_log_factor(const WorldView& w, const BasicVariable& var);

// Draws a value for var from its dependency. Precondition: supported. In
// identifier mode, sampling UniformOverObjects is a contract violation (the
// caller decides how object roles are proposed).
Value sample_dependency(const WorldView& w, const BasicVariable& var, Rng& rng);

}  // namespace relmh
