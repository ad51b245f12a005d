#include "relmh/world_ops.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>

#include "relmh/distribution.hpp"

namespace relmh {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

bool is_self_supporting(const WorldView& w, const VarSet* scope) {
  bool ok = true;
  if (scope) {
    for (const BasicVariable& v : *scope) {
      if (!w.has(v)) return false;
      if (!evaluate_dependency(w, v).supported) return false;
    }
    return true;
  }
  w.for_each([&](const BasicVariable& var, const Value&) {
    if (ok && !evaluate_dependency(w, var).supported) ok = false;
  });
  return ok;
}

VarSet active_ancestors(const WorldView& w, const VarSet& core) {
  VarSet seen;
  std::deque<BasicVariable> work(core.begin(), core.end());
  while (!work.empty()) {
    BasicVariable var = std::move(work.front());
    work.pop_front();
    if (!seen.insert(var).second) continue;
    if (!w.has(var))
      throw ContractViolation("active_ancestors: " + var.to_string(w.model()) +
                              " is not instantiated");
    DependencyResult dep = evaluate_dependency(w, var);
    if (!dep.supported)
      throw ContractViolation("active_ancestors: dependency of " + var.to_string(w.model()) +
                              " is unsupported");
    for (const BasicVariable& p : dep.active_parents) work.push_back(p);
  }
  return seen;
}

bool is_minimal_beyond(const WorldView& w, const VarSet& core) {
  return barren_vars(w, core).empty();
}

VarSet barren_vars(const WorldView& w, const VarSet& core) {
  VarSet keep = active_ancestors(w, core);
  VarSet out;
  w.for_each([&](const BasicVariable& var, const Value&) {
    if (!keep.count(var)) out.insert(var);
  });
  return out;
}

namespace {

void count_identifier_refs(const BasicVariable& var, const Value& val,
                           std::map<std::pair<TypeId, std::string>, int>& refs, int delta) {
  for (const Value& a : var.args)
    if (a.is_ident()) refs[{a.obj_type(), a.ident_token()}] += delta;
  if (val.is_ident()) refs[{val.obj_type(), val.ident_token()}] += delta;
}

}  // namespace

VarSet prune_to_minimal(WorldPatch& patch, const VarSet& core) {
  VarSet barren = barren_vars(patch, core);
  for (const BasicVariable& var : barren) patch.remove(var);

  // Drop identifiers that no surviving key or value mentions.
  std::map<std::pair<TypeId, std::string>, int> refs;
  patch.for_each([&](const BasicVariable& var, const Value& val) {
    count_identifier_refs(var, val, refs, 1);
  });
  for (TypeId t : patch.model().user_types()) {
    if (patch.mode(t) != TypeMode::Identifier) continue;
    for (const std::string& tok : patch.pool_tokens(t))
      if (!refs.count({t, tok}) || refs[{t, tok}] == 0) patch.drop_identifier(t, tok);
  }
  return barren;
}

double log_prob_concrete(const WorldView& w) {
  for (TypeId t : w.model().user_types())
    if (w.pool_size(t) > 0)
      throw ContractViolation("log_prob_concrete: type " + w.model().type(t).name +
                              " has identifiers in use");
  double total = 0.0;
  for (const BasicVariable& var : w.instantiated_vars_sorted()) {
    total += var_log_factor(w, var);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

GroundingReport check_identifiers_grounded(const WorldView& w) {
  GroundingReport report;
  std::set<std::pair<TypeId, std::string>> pending;
  for (TypeId t : w.model().user_types())
    for (const std::string& tok : w.pool_tokens(t)) pending.insert({t, tok});
  if (pending.empty()) return report;

  // Variables whose value is an identifier, keyed by (type, token).
  std::map<std::pair<TypeId, std::string>, std::vector<BasicVariable>> valued_by;
  w.for_each([&](const BasicVariable& var, const Value& val) {
    if (val.is_ident()) valued_by[{val.obj_type(), val.ident_token()}].push_back(var);
  });
  for (auto& [k, vars] : valued_by) std::sort(vars.begin(), vars.end());

  std::set<std::pair<TypeId, std::string>> grounded;
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto it = pending.begin(); it != pending.end();) {
      auto found = valued_by.find(*it);
      const BasicVariable* witness = nullptr;
      if (found != valued_by.end()) {
        for (const BasicVariable& var : found->second) {
          bool args_ok = true;
          for (const Value& a : var.args)
            if (a.is_ident() && !grounded.count({a.obj_type(), a.ident_token()})) {
              args_ok = false;
              break;
            }
          if (args_ok) {
            witness = &var;
            break;
          }
        }
      }
      if (witness) {
        grounded.insert(*it);
        report.witnesses.emplace_back(it->second, *witness);
        it = pending.erase(it);
        progress = true;
      } else {
        ++it;
      }
    }
  }
  for (const auto& entry : pending) {
    report.all_grounded = false;
    report.ungrounded.push_back(entry.second);
  }
  return report;
}

double log_prob_abstract(const WorldView& w) {
  GroundingReport g = check_identifiers_grounded(w);
  if (!g.all_grounded)
    throw ContractViolation("log_prob_abstract: ungrounded identifier " + g.ungrounded.front());

  double adjust = 0.0;
  for (TypeId t : w.model().user_types()) {
    int64_t m = w.pool_size(t);
    if (m == 0) continue;
    BasicVariable nv = BasicVariable::number(t);
    std::optional<Value> n = w.get(nv);
    if (!n)
      throw ContractViolation("log_prob_abstract: #" + w.model().type(t).name +
                              " is not instantiated but identifiers exist");
    adjust += log_falling_factorial(n->as_nat(), m);
    if (adjust == kNegInf) return kNegInf;
  }

  double total = adjust;
  for (const BasicVariable& var : w.instantiated_vars_sorted()) {
    total += var_log_factor(w, var);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

namespace {

Value substitute_value(const Value& v,
                       const std::map<std::pair<TypeId, std::string>, Value>& sub) {
  if (!v.is_ident()) return v;
  return sub.at({v.obj_type(), v.ident_token()});
}

}  // namespace

std::vector<PartialWorld> enumerate_concrete_versions(const WorldView& w, uint64_t cap) {
  // Per type: the sorted identifier tokens and the count of numbered targets.
  struct TypePlan {
    TypeId type;
    std::vector<std::string> tokens;
    int64_t n = 0;
  };
  std::vector<TypePlan> plans;
  double log_count = 0.0;
  for (TypeId t : w.model().user_types()) {
    std::vector<std::string> toks = w.pool_tokens(t);
    if (toks.empty()) continue;
    std::optional<Value> n = w.get(BasicVariable::number(t));
    if (!n)
      throw ContractViolation("enumerate_concrete_versions: #" + w.model().type(t).name +
                              " is not instantiated");
    TypePlan plan{t, std::move(toks), n->as_nat()};
    if (plan.n < static_cast<int64_t>(plan.tokens.size())) return {};
    log_count += log_falling_factorial(plan.n, static_cast<int64_t>(plan.tokens.size()));
    plans.push_back(std::move(plan));
  }
  if (log_count > std::log(double(cap)))
    throw ContractViolation("enumerate_concrete_versions: too many versions");

  std::vector<PartialWorld> out;
  std::map<std::pair<TypeId, std::string>, Value> sub;

  std::function<void(size_t)> emit_type = [&](size_t plan_idx) {
    if (plan_idx == plans.size()) {
      PartialWorld cw(w.model());
      w.for_each([&](const BasicVariable& var, const Value& val) {
        BasicVariable cv = var;
        for (Value& a : cv.args) a = substitute_value(a, sub);
        cw.set(cv, substitute_value(val, sub));
      });
      out.push_back(std::move(cw));
      return;
    }
    const TypePlan& plan = plans[plan_idx];
    size_t m = plan.tokens.size();
    // Injective assignments of numbered objects 1..n to the m tokens.
    std::vector<bool> used(static_cast<size_t>(plan.n) + 1, false);
    std::function<void(size_t)> assign = [&](size_t i) {
      if (i == m) {
        emit_type(plan_idx + 1);
        return;
      }
      for (int64_t obj = 1; obj <= plan.n; ++obj) {
        if (used[obj]) continue;
        used[obj] = true;
        sub[{plan.type, plan.tokens[i]}] = Value::numbered(plan.type, obj);
        assign(i + 1);
        used[obj] = false;
      }
      sub.erase({plan.type, plan.tokens[i]});
    };
    assign(0);
  };
  emit_type(0);
  return out;
}

}  // namespace relmh
