#include "relmh/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "relmh/eval.hpp"

namespace relmh {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& xs) {
  double mx = kNegInf;
  for (double x : xs) mx = std::max(mx, x);
  if (std::isinf(mx)) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

struct Truncations {
  bool any = false;
  std::vector<std::string> notes;

  void add(std::string note) {
    any = true;
    if (std::find(notes.begin(), notes.end(), note) == notes.end())
      notes.push_back(std::move(note));
  }
};

// Enumerable (value, log mass) support of a located distribution, consulting
// the bounds when the support is infinite.
std::vector<std::pair<Value, double>> support_of(const Model& m, const BasicVariable& var,
                                                 const DistInstance& dist,
                                                 const WorldBounds& bounds, Truncations& trunc) {
  std::vector<std::pair<Value, double>> out;
  if (auto sup = dist.finite_support()) {
    for (const Value& v : *sup) {
      double lm = dist.log_mass(v);
      if (lm > kNegInf) out.emplace_back(v, lm);
    }
    return out;
  }
  if (var.is_number()) {
    auto it = bounds.number_bound.find(var.number_type);
    if (it == bounds.number_bound.end())
      throw ModelError("oracle: prior of " + var.to_string(m) +
                       " has infinite support; provide a number bound");
    double covered = 0.0;
    for (int64_t k = 0; k <= it->second; ++k) {
      double lm = dist.log_mass(Value::nat(k));
      if (lm > kNegInf) {
        out.emplace_back(Value::nat(k), lm);
        covered += std::exp(lm);
      }
    }
    trunc.add(var.to_string(m) + " truncated at " + std::to_string(it->second) +
              " (prior mass covered: " + std::to_string(covered) + ")");
    return out;
  }
  auto it = bounds.domain.find(var.func);
  if (it == bounds.domain.end())
    throw ModelError("oracle: support of " + var.to_string(m) +
                     " cannot be enumerated; provide a domain bound for " +
                     m.function(var.func).name);
  for (const Value& v : it->second) {
    double lm = dist.log_mass(v);
    if (lm > kNegInf) out.emplace_back(v, lm);
  }
  // A domain bound restricts an infinite support; always a truncation.
  trunc.add(m.function(var.func).name + " restricted to a " +
            std::to_string(it->second.size()) + "-value domain");
  return out;
}

struct Enumerator {
  const Model& m;
  const EvidenceSet& evidence;
  const std::vector<Query>& queries;
  const OracleOptions& opt;

  OracleResult result;
  Truncations trunc;
  std::vector<double> state_logw;
  std::vector<std::vector<double>> query_true_logw;  // per query
  uint64_t nodes = 0;

  void visit() {
    if (++nodes > opt.cap) throw ModelError("oracle: cap exceeded");
  }

  void record(PartialWorld& w, double logw) {
    std::vector<bool> qv(queries.size());
    for (size_t i = 0; i < queries.size(); ++i) {
      TermResult r = evaluate_term(w, queries[i].term, {});
      qv[i] = r.supported && r.value == Value::boolean(true);
    }
    state_logw.push_back(logw);
    for (size_t i = 0; i < queries.size(); ++i)
      if (qv[i]) query_true_logw[i].push_back(logw);
    ++result.n_states;
    if (opt.keep_states) result.states.push_back({w, logw, std::move(qv)});
  }

  // Branches on the deepest blocked variable of a demand, then resumes the
  // scan from scratch (cheap at oracle scale, and immune to ordering bugs).
  void branch(PartialWorld& w, const BasicVariable& var, double logw) {
    visit();
    DependencyResult dep = evaluate_dependency(w, var);
    if (!dep.supported) {
      if (dep.blocked() == var)
        throw ModelError("oracle: " + var.to_string(m) + " depends on itself");
      branch(w, dep.blocked(), logw);
      return;
    }
    for (const auto& [v, lm] : support_of(m, var, dep.dist, opt.bounds, trunc)) {
      w.set(var, v);
      expand(w, logw + lm);
      w.erase(var);
    }
  }

  void expand(PartialWorld& w, double logw) {
    visit();
    // Evidence demands first: pin each evidence variable at its observed
    // value, weighting by the located distribution.
    for (const auto& [var, val] : evidence.items) {
      if (w.has(var)) continue;
      DependencyResult dep = evaluate_dependency(w, var);
      if (!dep.supported) {
        branch(w, dep.blocked(), logw);
        return;
      }
      double lm = dep.dist.log_mass(val);
      if (lm == kNegInf) return;  // state contradicts the evidence
      w.set(var, val);
      expand(w, logw + lm);
      w.erase(var);
      return;
    }
    // Then query decidability.
    for (const Query& q : queries) {
      TermResult r = evaluate_term(w, q.term, {});
      if (!r.supported) {
        branch(w, r.blocked(), logw);
        return;
      }
    }
    record(w, logw);
  }

  OracleResult run() {
    query_true_logw.resize(queries.size());
    PartialWorld w(m);
    expand(w, 0.0);

    result.nodes_visited = nodes;
    result.truncated = trunc.any;
    result.truncation_notes = trunc.notes;
    result.log_evidence = log_sum_exp(state_logw);
    if (result.n_states == 0 || result.log_evidence == kNegInf)
      throw ModelError("oracle: evidence has zero probability mass");
    for (size_t i = 0; i < queries.size(); ++i)
      result.query_posterior.push_back(
          std::exp(log_sum_exp(query_true_logw[i]) - result.log_evidence));
    return std::move(result);
  }
};

}  // namespace

OracleResult exact_posterior(const Model& m, const EvidenceSet& evidence,
                             const std::vector<Query>& queries, const OracleOptions& opt) {
  Enumerator e{m, evidence, queries, opt};
  return e.run();
}

namespace {

struct FullEnumerator {
  const Model& m;
  const WorldBounds& bounds;
  uint64_t cap;

  WorldEnumeration result;
  Truncations trunc;
  uint64_t nodes = 0;

  void visit() {
    if (++nodes > cap) throw ModelError("oracle: cap exceeded");
  }

  // All concrete objects of a type under the current number assignment.
  std::vector<Value> objects(const PartialWorld& w, TypeId t) const {
    std::vector<Value> out = m.guaranteed_values(t);
    if (m.number_statement(t)) {
      std::optional<Value> n = w.get(BasicVariable::number(t));
      for (int64_t i = 1; i <= n->as_nat(); ++i) out.push_back(Value::numbered(t, i));
    }
    return out;
  }

  // The complete variable universe under the current number assignment.
  std::vector<BasicVariable> universe(const PartialWorld& w) const {
    std::vector<BasicVariable> vars;
    for (FuncId f = 0; f < FuncId(m.functions().size()); ++f) {
      const FunctionSymbol& fn = m.function(f);
      for (TypeId at : fn.arg_types)
        if (m.type(at).is_builtin())
          throw ModelError("enumerate_worlds: function " + fn.name + " takes a " +
                           m.type(at).name + " argument; universe is infinite");
      std::vector<std::vector<Value>> arg_space;
      for (TypeId at : fn.arg_types) arg_space.push_back(objects(w, at));
      std::vector<Value> cur(fn.arg_types.size());
      std::function<void(size_t)> rec = [&](size_t i) {
        if (i == arg_space.size()) {
          vars.push_back(BasicVariable::app(f, cur));
          return;
        }
        for (const Value& v : arg_space[i]) {
          cur[i] = v;
          rec(i + 1);
        }
      };
      rec(0);
    }
    return vars;
  }

  // Instantiates every variable in `vars`, branching over supports. Picks the
  // first uninstantiated variable whose dependency is supported; a full pass
  // with no progress means a dependency cycle.
  void fill(PartialWorld& w, const std::vector<BasicVariable>& vars, size_t done, double logw) {
    visit();
    if (done == vars.size()) {
      result.worlds.push_back(w);
      result.log_mass.push_back(logw);
      return;
    }
    for (const BasicVariable& var : vars) {
      if (w.has(var)) continue;
      DependencyResult dep = evaluate_dependency(w, var);
      if (!dep.supported) continue;
      auto sup = dep.dist.finite_support();
      if (!sup)
        throw ModelError("enumerate_worlds: support of " + var.to_string(m) +
                         " is not finitely enumerable");
      for (const Value& v : *sup) {
        double lm = dep.dist.log_mass(v);
        if (lm == kNegInf) continue;
        w.set(var, v);
        fill(w, vars, done + 1, logw + lm);
        w.erase(var);
      }
      return;
    }
    throw ModelError("enumerate_worlds: circular dependencies; no variable is supported");
  }

  void numbers(PartialWorld& w, size_t idx, double logw) {
    visit();
    if (idx == m.numbers().size()) {
      fill(w, universe(w), 0, logw);
      return;
    }
    const NumberStatement& num = m.numbers()[idx];
    BasicVariable var = BasicVariable::number(num.type);
    DependencyResult dep = evaluate_dependency(w, var);
    if (!dep.supported)
      throw ModelError("enumerate_worlds: number priors may not depend on functions");
    for (const auto& [v, lm] : support_of(m, var, dep.dist, bounds, trunc)) {
      w.set(var, v);
      numbers(w, idx + 1, logw + lm);
      w.erase(var);
    }
  }

  WorldEnumeration run() {
    PartialWorld w(m);
    numbers(w, 0, 0.0);
    result.truncated = trunc.any;
    result.truncation_notes = trunc.notes;
    return std::move(result);
  }
};

}  // namespace

WorldEnumeration enumerate_worlds(const Model& m, const WorldBounds& bounds, uint64_t cap) {
  FullEnumerator e{m, bounds, cap};
  return e.run();
}

}  // namespace relmh
