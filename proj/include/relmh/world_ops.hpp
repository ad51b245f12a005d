#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relmh/eval.hpp"
#include "relmh/world.hpp"

namespace relmh {

using VarSet = std::set<BasicVariable>;

// True iff every instantiated variable's dependency is supported, i.e. each
// variable's distribution can be located reading only instantiated variables.
// If scope is given, only variables in it are checked.
bool is_self_supporting(const WorldView& w, const VarSet* scope = nullptr);

// Active ancestors of `core` (core included). Every core variable must be
// instantiated and supported; throws ContractViolation otherwise.
VarSet active_ancestors(const WorldView& w, const VarSet& core);

// True iff the world instantiates exactly core plus its active ancestors.
bool is_minimal_beyond(const WorldView& w, const VarSet& core);

// Instantiated variables that are not active ancestors of core.
VarSet barren_vars(const WorldView& w, const VarSet& core);

// Removes barren variables from the patch, and drops identifiers that no
// remaining key or value mentions. Returns the removed variables.
VarSet prune_to_minimal(WorldPatch& patch, const VarSet& core);

// log p(sigma) as the product of per-variable factors. Requires a world with
// no identifiers in use; throws ContractViolation if any pool is non-empty.
double log_prob_concrete(const WorldView& w);

struct GroundingReport {
  bool all_grounded = true;
  // Ungrounded identifier tokens (sorted), for error messages.
  std::vector<std::string> ungrounded;
  // Witness per grounded identifier: a variable whose value is the identifier
  // and whose arguments are concrete or previously grounded.
  std::vector<std::pair<std::string, BasicVariable>> witnesses;
};

// An identifier is grounded if it is the value of some instantiated variable
// whose arguments are all concrete or themselves grounded (least fixed point).
GroundingReport check_identifiers_grounded(const WorldView& w);

// log p for a world that may use identifiers: the concrete-version factor
// product plus, per identifier-bearing type, log(n_t P m_t) for the number of
// injective placements. Preconditions: self-supporting; all identifiers
// grounded (refused otherwise); the number variable of each identifier-bearing
// type is instantiated. Returns -inf when any n_t < m_t.
double log_prob_abstract(const WorldView& w);

// All concrete versions of an identifier-bearing world: every injective
// substitution of numbered objects for identifiers, per type. Count is the
// product of n_t P m_t. Throws if that count exceeds `cap`.
std::vector<PartialWorld> enumerate_concrete_versions(const WorldView& w, uint64_t cap = 100000);

}  // namespace relmh
