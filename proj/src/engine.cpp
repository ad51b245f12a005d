#include "relmh/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "relmh/distribution.hpp"
#include "relmh/eval.hpp"

namespace relmh {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}
}  // namespace

VarSet InferenceProblem::evidence_vars() const {
  VarSet s;
  for (const auto& [var, val] : evidence.items) s.insert(var);
  return s;
}

VarSet InferenceProblem::pins(const WorldView& w) const {
  VarSet s = evidence_vars();
  for (const Query& q : queries) {
    TermResult r = evaluate_term(w, q.term, {});
    if (!r.supported)
      throw ContractViolation("query " + q.name + " is not decidable in the current state");
    for (const BasicVariable& v : r.reads) s.insert(v);
  }
  return s;
}

MhEngine::MhEngine(InferenceProblem problem, Proposer& proposer, EngineOptions opt)
    : problem_(std::move(problem)),
      proposer_(proposer),
      opt_(opt),
      world_(*problem_.model),
      rng_proposer_(Rng::stream(opt.seed, "proposer")),
      rng_accept_(Rng::stream(opt.seed, "accept")) {
  stats_.seed = opt.seed;
}

double MhEngine::adjustment_for(const WorldView& w) const {
  double adj = 0.0;
  for (TypeId t : problem_.model->user_types()) {
    if (w.mode(t) != TypeMode::Identifier) continue;
    int64_t m = w.pool_size(t);
    if (m == 0) continue;
    std::optional<Value> n = w.get(BasicVariable::number(t));
    if (!n)
      throw ContractViolation("identifiers of " + problem_.model->type(t).name +
                              " in use but its number variable is not instantiated");
    adj += log_falling_factorial(n->as_nat(), m);
  }
  return adj;
}

void MhEngine::rebuild_child_graph() {
  graph_.clear();
  ident_value_refs_.clear();
  for (const BasicVariable& var : world_.instantiated_vars_sorted()) {
    DependencyResult dep = evaluate_dependency(world_, var);
    if (!dep.supported)
      throw ContractViolation("state is not self-supporting at " +
                              var.to_string(*problem_.model));
    Node& node = graph_[var];
    node.parents = dep.active_parents;
    node.factor = dep.dist.log_mass(*world_.get(var));
  }
  for (const auto& [var, node] : graph_)
    for (const BasicVariable& p : node.parents) graph_.at(p).children.insert(var);
  world_.for_each([&](const BasicVariable&, const Value& val) {
    if (val.is_ident()) ++ident_value_refs_[val.ident_token()];
  });
}

bool MhEngine::verify_child_graph() const {
  if (graph_.size() != world_.num_instantiated()) return false;
  std::map<std::string, int64_t> refs;
  bool ok = true;
  world_.for_each([&](const BasicVariable& var, const Value& val) {
    if (val.is_ident()) ++refs[val.ident_token()];
    auto it = graph_.find(var);
    if (it == graph_.end()) {
      ok = false;
      return;
    }
    DependencyResult dep = evaluate_dependency(world_, var);
    if (!dep.supported || dep.active_parents != it->second.parents ||
        std::abs(dep.dist.log_mass(val) - it->second.factor) > 1e-9) {
      ok = false;
      return;
    }
  });
  if (!ok || refs != ident_value_refs_) return false;
  // Children must be exactly the inverse of parents.
  std::unordered_map<BasicVariable, std::set<BasicVariable>> inv;
  for (const auto& [var, node] : graph_)
    for (const BasicVariable& p : node.parents) inv[p].insert(var);
  for (const auto& [var, node] : graph_)
    if (node.children != inv[var]) return false;
  return true;
}

double MhEngine::naive_log_posterior() const { return log_prob_abstract(world_); }

std::vector<bool> MhEngine::query_values() const {
  std::vector<bool> out;
  out.reserve(problem_.queries.size());
  for (const Query& q : problem_.queries) {
    TermResult r = evaluate_term(world_, q.term, {});
    out.push_back(r.supported && r.value == Value::boolean(true));
  }
  return out;
}

void MhEngine::validate_state(const char* where) const {
  auto fail = [&](const std::string& what) {
    throw ContractViolation(std::string("engine invariant broken (") + where + "): " + what);
  };
  for (const auto& [var, val] : problem_.evidence.items) {
    std::optional<Value> got = world_.get(var);
    if (!got || !(*got == val)) fail("evidence not satisfied at " + var.to_string(*problem_.model));
  }
  if (!is_self_supporting(world_)) fail("state is not self-supporting");
  VarSet p = problem_.pins(world_);  // throws if a query is undecidable
  if (!is_minimal_beyond(world_, p)) fail("state is not minimal beyond the pins");
  GroundingReport g = check_identifiers_grounded(world_);
  if (!g.all_grounded) fail("ungrounded identifier " + g.ungrounded.front());
  if (!verify_child_graph()) fail("child graph out of sync");
  if (std::abs(log_posterior_ - naive_log_posterior()) > 1e-6)
    fail("incremental log posterior drifted");
}

void MhEngine::init() {
  auto t0 = std::chrono::steady_clock::now();
  proposer_.initial_state(world_, rng_proposer_);
  {
    WorldPatch patch(world_);
    prune_to_minimal(patch, problem_.pins(world_));
    patch.apply();
  }
  for (const auto& [var, val] : problem_.evidence.items) {
    std::optional<Value> got = world_.get(var);
    if (!got || !(*got == val))
      throw ContractViolation("initial state violates evidence at " +
                              var.to_string(*problem_.model));
  }
  rebuild_child_graph();
  log_posterior_ = naive_log_posterior();
  stats_.log_posterior_initial = log_posterior_;
  initialized_ = true;
  if (opt_.assert_mode) validate_state("init");
  stats_.init_ms += ms_since(t0);
}

bool MhEngine::step() {
  if (!initialized_) throw ContractViolation("step() before init()");
  ++stats_.proposals;

  WorldPatch patch(world_);
  double log_q = proposer_.propose(patch, rng_proposer_);

  bool number_changing = false;
  for (const auto& [var, val] : patch.changed())
    if (var.is_number()) number_changing = true;
  for (const BasicVariable& var : patch.removed())
    if (var.is_number()) number_changing = true;
  StepClassStats& cls = number_changing ? stats_.number_steps : stats_.other_steps;
  ++cls.proposals;

  // The accept draw happens unconditionally so the accept stream stays
  // aligned across proposal outcomes.
  double u = rng_accept_.uniform();

  if (log_q == kNegInf) {
    patch.discard();
    if (opt_.assert_mode) validate_state("after forced rejection");
    return false;
  }

  for (const auto& [var, val] : problem_.evidence.items)
    if (patch.changed().count(var) || patch.removed().count(var))
      throw ContractViolation("proposal touches evidence variable " +
                              var.to_string(*problem_.model));

  // Queries must stay decidable in the candidate state. Their reads, plus
  // the evidence, are what the candidate must stay minimal beyond.
  VarSet new_pins = problem_.evidence_vars();
  for (const Query& q : problem_.queries) {
    TermResult r = evaluate_term(patch, q.term, {});
    if (!r.supported)
      throw ContractViolation("proposal makes query " + q.name + " undecidable");
    for (const BasicVariable& v : r.reads) new_pins.insert(v);
  }

  // Dirty variables: everything the patch writes or removes. The factors
  // that can change are those of changed variables and of the current
  // children of any dirty variable.
  std::set<BasicVariable> affected;
  std::set<BasicVariable> dirty;
  for (const auto& [var, val] : patch.changed()) {
    dirty.insert(var);
    affected.insert(var);
  }
  for (const BasicVariable& var : patch.removed()) dirty.insert(var);
  for (const BasicVariable& var : dirty) {
    auto it = graph_.find(var);
    if (it == graph_.end()) continue;
    for (const BasicVariable& child : it->second.children)
      if (!patch.removed().count(child)) affected.insert(child);
  }

  uint64_t evals = 0;
  double sum_new = 0.0, sum_old = 0.0;
  std::map<BasicVariable, std::pair<std::vector<BasicVariable>, double>> new_eval;
  for (const BasicVariable& var : affected) {
    DependencyResult dep = evaluate_dependency(patch, var);
    ++evals;
    if (!dep.supported)
      throw ContractViolation("proposal leaves " + var.to_string(*problem_.model) +
                              " unsupported (blocked on " +
                              dep.blocked().to_string(*problem_.model) + ")");
    double f = dep.dist.log_mass(*patch.get(var));
    sum_new += f;
    auto it = graph_.find(var);
    if (it != graph_.end()) sum_old += it->second.factor;
    new_eval.emplace(var, std::make_pair(std::move(dep.active_parents), f));
  }
  for (const BasicVariable& var : patch.removed()) sum_old += graph_.at(var).factor;

  double adj_delta = adjustment_for(patch) - adjustment_for(world_);
  double log_ratio = sum_new - sum_old + adj_delta + log_q;

  cls.factor_evals += evals;
  stats_.factor_evals += evals;

  if (std::log(u) < log_ratio) {
    std::vector<BasicVariable> removed(patch.removed().begin(), patch.removed().end());
    // Anything that can lose its last reader in this transition: variables a
    // query stops reading, old parents of re-evaluated or removed variables,
    // and freshly written variables (which may have no reader at all).
    std::vector<BasicVariable> suspects;
    for (const BasicVariable& v : problem_.pins(world_))
      if (!new_pins.count(v)) suspects.push_back(v);
    for (const auto& [var, pf] : new_eval) {
      auto it = graph_.find(var);
      if (it != graph_.end())
        for (const BasicVariable& p : it->second.parents) suspects.push_back(p);
    }
    for (const BasicVariable& var : removed)
      for (const BasicVariable& p : graph_.at(var).parents) suspects.push_back(p);
    for (const auto& [var, val] : patch.changed()) suspects.push_back(var);
    apply_accept(patch, new_eval, removed);
    ++stats_.accepted;
    ++cls.accepted;
    log_posterior_ += sum_new - sum_old + adj_delta;
    sweep_barren(std::move(suspects), new_pins);
    if (opt_.assert_mode) validate_state("after accept");
    return true;
  }
  patch.discard();
  if (opt_.assert_mode) validate_state("after reject");
  return false;
}

void MhEngine::apply_accept(
    WorldPatch& patch,
    const std::map<BasicVariable, std::pair<std::vector<BasicVariable>, double>>& new_eval,
    const std::vector<BasicVariable>& removed) {
  zeroed_tokens_.clear();
  auto drop_ref = [&](const Value& v) {
    if (!v.is_ident()) return;
    auto it = ident_value_refs_.find(v.ident_token());
    if (it != ident_value_refs_.end() && --it->second == 0) {
      zeroed_tokens_.insert(it->first);
      ident_value_refs_.erase(it);
    }
  };
  for (const auto& [var, val] : patch.changed()) {
    std::optional<Value> old = world_.get(var);
    if (old) drop_ref(*old);
    if (val.is_ident()) ++ident_value_refs_[val.ident_token()];
  }
  for (const BasicVariable& var : removed) drop_ref(*world_.get(var));

  for (const BasicVariable& var : removed) {
    Node& node = graph_.at(var);
    for (const BasicVariable& p : node.parents) {
      auto it = graph_.find(p);
      if (it != graph_.end()) it->second.children.erase(var);
    }
    graph_.erase(var);
  }
  for (const auto& [var, pf] : new_eval) {
    Node& node = graph_[var];
    for (const BasicVariable& p : node.parents) {
      auto it = graph_.find(p);
      if (it != graph_.end()) it->second.children.erase(var);
    }
    node.parents = pf.first;
    node.factor = pf.second;
    for (const BasicVariable& p : node.parents) graph_[p].children.insert(var);
  }
  patch.apply();
}

void MhEngine::sweep_barren(std::vector<BasicVariable> suspects, const VarSet& pins) {
  WorldPatch patch(world_);
  double removed_mass = 0.0;
  size_t qi = 0;
  while (qi < suspects.size()) {
    BasicVariable var = suspects[qi++];
    auto it = graph_.find(var);
    if (it == graph_.end() || pins.count(var) || !it->second.children.empty()) continue;
    removed_mass += it->second.factor;
    const Value& val = *world_.get(var);
    if (val.is_ident()) {
      auto rit = ident_value_refs_.find(val.ident_token());
      if (rit != ident_value_refs_.end() && --rit->second == 0) {
        zeroed_tokens_.insert(rit->first);
        ident_value_refs_.erase(rit);
      }
    }
    for (const BasicVariable& p : it->second.parents) {
      auto pit = graph_.find(p);
      if (pit != graph_.end()) {
        pit->second.children.erase(var);
        suspects.push_back(p);
      }
    }
    graph_.erase(it);
    patch.remove(var);
    ++cleanup_removals_;
  }
  if (patch.empty() && zeroed_tokens_.empty()) {
    patch.discard();
    return;
  }
  // Pool entries nothing values any more must go; a key that still mentions
  // one means the proposer left an ungrounded identifier behind.
  for (const std::string& token : zeroed_tokens_) {
    if (ident_value_refs_.count(token)) continue;
    bool key_mentioned = false;
    world_.for_each([&](const BasicVariable& v, const Value&) {
      if (patch.removed().count(v)) return;
      for (const Value& a : v.args)
        if (a.is_ident() && a.ident_token() == token) key_mentioned = true;
    });
    if (key_mentioned)
      throw ContractViolation("identifier " + token +
                              " is not the value of any variable but still appears in keys");
    for (TypeId t : problem_.model->user_types()) {
      std::vector<std::string> toks = world_.pool_tokens(t);
      if (std::find(toks.begin(), toks.end(), token) != toks.end())
        patch.drop_identifier(t, token);
    }
  }
  zeroed_tokens_.clear();
  double adj_delta = adjustment_for(patch) - adjustment_for(world_);
  patch.apply();
  log_posterior_ += adj_delta - removed_mass;
}

ChainStats MhEngine::run(const std::function<void(const MhEngine&)>& on_sample) {
  init();
  auto t0 = std::chrono::steady_clock::now();
  for (int64_t i = 0; i < opt_.burn_in; ++i) step();

  std::vector<double> sums(problem_.queries.size(), 0.0);
  for (int64_t i = 0; i < opt_.samples; ++i) {
    step();
    if (on_sample) on_sample(*this);
    std::vector<bool> qv = query_values();
    for (size_t k = 0; k < qv.size(); ++k)
      if (qv[k]) sums[k] += 1.0;
  }
  stats_.sampling_ms += ms_since(t0);
  stats_.log_posterior_final = log_posterior_;
  stats_.query_means.clear();
  for (size_t k = 0; k < problem_.queries.size(); ++k)
    stats_.query_means.emplace_back(problem_.queries[k].name,
                                    opt_.samples > 0 ? sums[k] / double(opt_.samples) : 0.0);
  return stats_;
}

}  // namespace relmh
