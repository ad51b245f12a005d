#pragma once

#include "relmh/engine.hpp"

namespace relmh {

// How the single-site proposer redraws variables whose value is an object of
// an open-ended user type (one with a number statement).
//
//   Concrete     values are numbered objects; the redraw samples the located
//                distribution directly. States must not contain identifiers.
//   Identifiers  values are abstract identifiers; the redraw picks uniformly
//                among the guaranteed objects, the identifiers already in the
//                pool, and one freshly minted identifier. Moves whose repair
//                or pruning would have to invent or forget further objects
//                are force-rejected, since this kernel cannot price their
//                reverse path.
enum class ObjectProposal : uint8_t { Concrete, Identifiers };

// Single-site resample proposer. Picks an instantiated non-evidence variable
// uniformly, redraws its value (see ObjectProposal), then repairs the state:
// missing variables demanded by the evidence and query support closure are
// forward-sampled, and variables that fell out of the closure are pruned.
// The proposal ratio accounts for the pick, the redraw, the repair draws,
// and the reverse move's re-instantiation of pruned variables.
//
// A state with nothing to resample (every instantiated variable is evidence)
// is an error: the chain could never move.
class GenericProposer : public Proposer {
 public:
  explicit GenericProposer(const InferenceProblem& problem,
                           ObjectProposal policy = ObjectProposal::Concrete);

  const char* name() const override { return "single-site"; }

  // Pins the evidence, then forward-samples the support closure of the
  // evidence and query terms. Under the identifier policy each demanded
  // object variable gets a freshly minted identifier, and number variables
  // are raised to the pool size where the walk left them too small.
  void initial_state(PartialWorld& w, Rng& rng) override;

  double propose(WorldPatch& patch, Rng& rng) override;

 private:
  const InferenceProblem* problem_;
  ObjectProposal policy_;
  VarSet evidence_;
};

}  // namespace relmh
