#include "relmh/proposer_generic.hpp"

#include <cmath>
#include <limits>

#include "relmh/distribution.hpp"
#include "relmh/eval.hpp"

namespace relmh {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Signals a candidate whose reverse path this kernel cannot price; the
// proposal is force-rejected.
struct IrreversibleMove {};

// True for variables holding objects of a type whose population is governed
// by a number statement. Under the identifier policy these take part in the
// uniform role kernel instead of a distribution redraw.
bool open_object_var(const Model& m, const BasicVariable& v) {
  if (v.is_number()) return false;
  const ModelType& t = m.type(m.function(v.func).return_type);
  return !t.is_builtin() && t.number_statement >= 0;
}

// Demand-driven forward sampler over a patched world. need(var) makes var's
// dependency supported, sampling any uninstantiated variable it reads (and
// their ancestors), then samples var itself if missing. Draw masses and the
// sampled variables are recorded for proposal-ratio accounting.
struct SupportWalk {
  enum class ObjectRepair : uint8_t {
    SampleDist,  // concrete worlds: objects come from the located distribution
    MintFresh,   // initial states: each demanded object variable gets a new identifier
    Forbid,      // proposals in identifier worlds: throws IrreversibleMove
  };

  WorldPatch& patch;
  Rng& rng;
  ObjectRepair object_repair = ObjectRepair::SampleDist;
  double log_mass = 0.0;
  int64_t sampled = 0;
  std::set<BasicVariable> done;

  void need(const BasicVariable& var) {
    if (!done.insert(var).second) return;
    for (;;) {
      DependencyResult dep = evaluate_dependency(patch, var);
      if (dep.supported) {
        if (!patch.get(var)) {
          if (object_repair != ObjectRepair::SampleDist && open_object_var(patch.model(), var)) {
            if (object_repair == ObjectRepair::Forbid) throw IrreversibleMove{};
            TypeId rt = patch.model().function(var.func).return_type;
            patch.set(var, patch.mint_identifier(rt, rng));
          } else {
            Value x = dep.dist.sample(rng);
            log_mass += dep.dist.log_mass(x);
            patch.set(var, x);
          }
          ++sampled;
        }
        for (const BasicVariable& p : dep.active_parents) need(p);
        return;
      }
      BasicVariable blocked = dep.blocked();
      if (patch.get(blocked))
        throw ContractViolation("support walk blocked on an instantiated variable");
      need(blocked);
      if (!patch.get(blocked))
        throw ModelError("circular dependency through " + blocked.to_string(patch.model()));
    }
  }

  void need_term(const Term& term) {
    for (;;) {
      TermResult r = evaluate_term(patch, term, {});
      if (r.supported) {
        for (const BasicVariable& v : r.reads) need(v);
        return;
      }
      BasicVariable blocked = r.blocked();
      if (patch.get(blocked))
        throw ContractViolation("support walk blocked on an instantiated variable");
      need(blocked);
      if (!patch.get(blocked))
        throw ModelError("circular dependency through " + blocked.to_string(patch.model()));
    }
  }

  void cover_problem(const InferenceProblem& prob) {
    for (const auto& [var, val] : prob.evidence.items) need(var);
    for (const Query& q : prob.queries) need_term(q.term);
  }
};
}  // namespace

GenericProposer::GenericProposer(const InferenceProblem& problem, ObjectProposal policy)
    : problem_(&problem), policy_(policy), evidence_(problem.evidence_vars()) {}

void GenericProposer::initial_state(PartialWorld& w, Rng& rng) {
  for (const auto& [var, val] : problem_->evidence.items) w.set(var, val);
  {
    WorldPatch patch(w);
    SupportWalk walk{patch, rng};
    if (policy_ == ObjectProposal::Identifiers)
      walk.object_repair = SupportWalk::ObjectRepair::MintFresh;
    walk.cover_problem(*problem_);
    patch.apply();
  }
  if (policy_ != ObjectProposal::Identifiers) return;
  // The walk mints one identifier per demanded object variable without
  // consulting the number prior, so the count may have come out too small to
  // host the pool. Such a start would have zero mass; raise it.
  const Model& m = *problem_->model;
  for (TypeId t : m.user_types()) {
    int64_t pool = static_cast<int64_t>(w.pool_tokens(t).size());
    if (pool == 0) continue;
    BasicVariable num = BasicVariable::number(t);
    std::optional<Value> n = w.get(num);
    if (!n || n->as_nat() < pool) w.set(num, Value::nat(pool));
  }
}

double GenericProposer::propose(WorldPatch& patch, Rng& rng) {
  const PartialWorld& base = patch.base();
  const Model& m = *problem_->model;

  std::vector<BasicVariable> movable;
  for (const BasicVariable& var : base.instantiated_vars_sorted())
    if (!evidence_.count(var)) movable.push_back(var);
  if (movable.empty())
    throw ContractViolation("no resampleable variable: every instantiated variable is evidence");
  const int64_t k_fwd = static_cast<int64_t>(movable.size());
  const BasicVariable& site = movable[rng.below(movable.size())];

  // The site's located distribution reads only other variables, so it is the
  // same in the current and candidate states; both redraw masses come from it.
  DependencyResult dep = evaluate_dependency(patch, site);
  if (!dep.supported)
    throw ContractViolation("current state is not self-supporting at " +
                            site.to_string(patch.model()));
  Value old_value = *patch.get(site);
  if (policy_ == ObjectProposal::Concrete && old_value.is_ident())
    throw ContractViolation("identifier-valued variable " + site.to_string(m) +
                            " under the concrete object policy");

  const bool role_kernel =
      policy_ == ObjectProposal::Identifiers && open_object_var(m, site);
  TypeId site_type = role_kernel ? m.function(site.func).return_type : -1;

  Value new_value;
  double log_fwd_draw;
  if (role_kernel) {
    const std::vector<Value>& gv = m.guaranteed_values(site_type);
    std::vector<std::string> pool = patch.pool_tokens(site_type);
    const int64_t d_fwd = static_cast<int64_t>(gv.size() + pool.size()) + 1;
    int64_t pick = static_cast<int64_t>(rng.below(static_cast<uint64_t>(d_fwd)));
    if (pick < static_cast<int64_t>(gv.size()))
      new_value = gv[static_cast<size_t>(pick)];
    else if (pick < static_cast<int64_t>(gv.size() + pool.size()))
      new_value = Value::ident(site_type, pool[static_cast<size_t>(pick - gv.size())]);
    else
      new_value = patch.mint_identifier(site_type, rng);
    if (new_value == old_value) return 0.0;
    log_fwd_draw = -std::log(static_cast<double>(d_fwd));
  } else {
    new_value = dep.dist.sample(rng);
    if (new_value == old_value) return 0.0;
    log_fwd_draw = dep.dist.log_mass(new_value);
  }

  patch.set(site, new_value);

  SupportWalk walk{patch, rng};
  if (policy_ == ObjectProposal::Identifiers)
    walk.object_repair = SupportWalk::ObjectRepair::Forbid;
  try {
    walk.cover_problem(*problem_);
  } catch (const IrreversibleMove&) {
    return kNegInf;
  }

  VarSet pruned = prune_to_minimal(patch, problem_->pins(patch));
  double log_reinstate = 0.0;
  for (const BasicVariable& var : pruned) {
    // Reverse repair cannot recreate a pruned object variable under the
    // identifier policy, so such moves are one-way and must be rejected.
    if (policy_ == ObjectProposal::Identifiers && open_object_var(m, var)) return kNegInf;
    log_reinstate += var_log_factor(base, var);
  }

  double log_back_draw;
  if (role_kernel) {
    const int64_t d_back = static_cast<int64_t>(m.guaranteed_values(site_type).size() +
                                                patch.pool_tokens(site_type).size()) +
                           1;
    log_back_draw = -std::log(static_cast<double>(d_back));
  } else {
    log_back_draw = dep.dist.log_mass(old_value);
  }

  const int64_t k_back = k_fwd + walk.sampled - static_cast<int64_t>(pruned.size());
  return std::log(double(k_fwd) / double(k_back)) + log_back_draw + log_reinstate -
         log_fwd_draw - walk.log_mass;
}

}  // namespace relmh
