#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "relmh/problem.hpp"
#include "relmh/world_ops.hpp"

namespace relmh {

// The inference task handed to proposers and the engine: a model, pinned
// evidence, and the query terms that must stay decidable in every state.
struct InferenceProblem {
  const Model* model = nullptr;
  EvidenceSet evidence;
  std::vector<Query> queries;

  VarSet evidence_vars() const;
  // Evidence variables plus the variables the query terms currently read.
  // Throws ContractViolation if a query is not decidable in w.
  VarSet pins(const WorldView& w) const;
};

// A Metropolis-Hastings move generator. propose() mutates the patch into the
// candidate state and returns log q(current | candidate) - log q(candidate |
// current). Candidates must keep evidence variables untouched, stay
// self-supporting, and keep identifiers grounded; the engine enforces these
// in assert mode and relies on them otherwise. Newly barren variables are
// swept by the engine after acceptance, but any variable the proposer knows
// will be swept must already be priced into the returned log ratio.
class Proposer {
 public:
  virtual ~Proposer() = default;

  virtual const char* name() const = 0;

  // Builds a starting state satisfying the evidence (minimality is the
  // engine's job; it prunes afterwards).
  virtual void initial_state(PartialWorld& w, Rng& rng) = 0;

  // Returns the log proposal ratio, or -inf to force rejection. The patch may
  // be left in any state when returning -inf; the engine discards it.
  virtual double propose(WorldPatch& patch, Rng& rng) = 0;
};

struct StepClassStats {
  uint64_t proposals = 0;
  uint64_t accepted = 0;
  uint64_t factor_evals = 0;
};

struct ChainStats {
  uint64_t seed = 0;
  uint64_t proposals = 0;
  uint64_t accepted = 0;
  // Steps that change a number variable touch every object-valued variable of
  // the type; they are tallied apart so locality claims exclude them.
  StepClassStats number_steps;
  StepClassStats other_steps;
  uint64_t factor_evals = 0;
  double init_ms = 0.0;
  double sampling_ms = 0.0;
  double log_posterior_initial = 0.0;
  double log_posterior_final = 0.0;
  std::vector<std::pair<std::string, double>> query_means;

  double acceptance_rate() const {
    return proposals ? double(accepted) / double(proposals) : 0.0;
  }
};

struct EngineOptions {
  uint64_t seed = 0;
  int64_t burn_in = 0;
  int64_t samples = 1000;
  // Re-validates the full state and child graph after every step. Slow;
  // meant for tests and debugging runs.
  bool assert_mode = false;
};

// Metropolis-Hastings over partial instantiations. The acceptance ratio is
// computed incrementally: only factors of changed variables and of their
// dependents are re-evaluated, against a cached factor table kept alongside
// a parent/child graph of the current state.
class MhEngine {
 public:
  MhEngine(InferenceProblem problem, Proposer& proposer, EngineOptions opt);

  // Builds and validates the initial state. Called by run(); exposed for
  // step-level tests.
  void init();

  // One proposal; returns whether it was accepted. init() must have run.
  bool step();

  // Runs burn-in then sampling. `on_sample` (may be empty) is invoked after
  // every post-burn-in step, with the engine in the just-sampled state.
  ChainStats run(const std::function<void(const MhEngine&)>& on_sample = {});

  const PartialWorld& world() const { return world_; }
  const InferenceProblem& problem() const { return problem_; }

  // Log joint mass of the current state, maintained incrementally.
  double log_posterior() const { return log_posterior_; }
  // Same quantity recomputed from scratch; tests compare the two.
  double naive_log_posterior() const;

  const ChainStats& stats() const { return stats_; }

  // Recomputes parents, children, and cached factors from the world.
  void rebuild_child_graph();
  // True iff the incremental graph and cache match a fresh rebuild.
  bool verify_child_graph() const;

  // Variables removed by the engine's own post-accept cleanup so far. Zero
  // for proposers that prune their candidates themselves.
  uint64_t cleanup_removals() const { return cleanup_removals_; }

  // Current query truth values (true only if decidable and true).
  std::vector<bool> query_values() const;

 private:
  struct Node {
    std::vector<BasicVariable> parents;
    std::set<BasicVariable> children;
    double factor = 0.0;
  };

  double adjustment_for(const WorldView& w) const;
  void validate_state(const char* where) const;
  void apply_accept(WorldPatch& patch,
                    const std::map<BasicVariable, std::pair<std::vector<BasicVariable>, double>>&
                        new_eval,
                    const std::vector<BasicVariable>& removed);
  // Removes variables left barren by the last accepted patch (and identifier
  // pool entries nothing references any more), adjusting log_posterior_.
  // `suspects` seeds the sweep: variables that may have lost their last
  // reader. Cost is proportional to what actually gets removed, so proposers
  // that already prune pay nothing here.
  void sweep_barren(std::vector<BasicVariable> suspects, const VarSet& pins);

  InferenceProblem problem_;
  Proposer& proposer_;
  EngineOptions opt_;

  PartialWorld world_;
  std::unordered_map<BasicVariable, Node> graph_;
  // Value-reference counts per identifier token, for cheap grounding checks.
  std::map<std::string, int64_t> ident_value_refs_;
  // Tokens whose value-reference count hit zero while applying the last
  // accepted patch; sweep_barren decides whether their pool entries go.
  std::set<std::string> zeroed_tokens_;
  double log_posterior_ = 0.0;
  uint64_t cleanup_removals_ = 0;
  Rng rng_proposer_;
  Rng rng_accept_;
  ChainStats stats_;
  bool initialized_ = false;
};

}  // namespace relmh
