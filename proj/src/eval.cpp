#include "relmh/eval.hpp"

#include <algorithm>
#include <cmath>

namespace relmh {

namespace {

// Appends var to reads unless already present (active parents are a set but
// read order is kept for diagnostics and blocked-variable reporting).
void note_read(std::vector<BasicVariable>& reads, const BasicVariable& var) {
  if (std::find(reads.begin(), reads.end(), var) == reads.end()) reads.push_back(var);
}

struct Evaluator {
  const WorldView& w;
  std::vector<BasicVariable> reads;
  bool supported = true;

  // Evaluates a term; when unsupported the returned value is meaningless.
  Value term(const Term& t, std::span<const Value> bindings) {
    switch (t.kind) {
      case Term::Kind::Literal:
        return t.literal;
      case Term::Kind::Param:
        return bindings[t.param];
      case Term::Kind::Builtin: {
        std::vector<Value> vals;
        vals.reserve(t.args.size());
        for (const Term& a : t.args) {
          vals.push_back(term(a, bindings));
          if (!supported) return Value::null();
        }
        for (const Value& v : vals)
          if (v.is_null()) return Value::null();  // null propagates through builtins
        switch (t.op) {
          case BuiltinOp::Succ: return Value::nat(vals[0].as_nat() + 1);
          case BuiltinOp::Pred: return Value::nat(std::max<int64_t>(0, vals[0].as_nat() - 1));
          case BuiltinOp::Lt: return Value::boolean(vals[0].as_nat() < vals[1].as_nat());
          case BuiltinOp::Le: return Value::boolean(vals[0].as_nat() <= vals[1].as_nat());
          case BuiltinOp::Gt: return Value::boolean(vals[0].as_nat() > vals[1].as_nat());
          case BuiltinOp::Ge: return Value::boolean(vals[0].as_nat() >= vals[1].as_nat());
          case BuiltinOp::Eq: return Value::boolean(vals[0] == vals[1]);
          case BuiltinOp::Ne: return Value::boolean(!(vals[0] == vals[1]));
        }
        return Value::null();
      }
      case Term::Kind::Number: {
        BasicVariable var = BasicVariable::number(t.number_type);
        std::optional<Value> got = w.get(var);
        note_read(reads, var);
        if (!got) {
          supported = false;
          return Value::null();
        }
        return *got;
      }
      case Term::Kind::Apply: {
        std::vector<Value> vals;
        vals.reserve(t.args.size());
        for (const Term& a : t.args) {
          vals.push_back(term(a, bindings));
          if (!supported) return Value::null();
        }
        // A null argument makes the application null without touching the
        // variable space (there is no variable keyed on null).
        for (const Value& v : vals)
          if (v.is_null()) return Value::null();
        BasicVariable var = BasicVariable::app(t.func, std::move(vals));
        std::optional<Value> got = w.get(var);
        note_read(reads, var);
        if (!got) {
          supported = false;
          return Value::null();
        }
        return *got;
      }
    }
    return Value::null();
  }

  // Prepares a DistInstance from a spec with parameters evaluated in context.
  DistInstance dist(const DistSpec& spec, std::span<const Value> bindings) {
    std::vector<Value> argv;
    argv.reserve(spec.args.size());
    for (const Term& a : spec.args) {
      argv.push_back(term(a, bindings));
      if (!supported) return DistInstance();
    }
    // A null distribution parameter collapses the clause to a point mass on
    // null; nulls never enter likelihoods as ordinary values.
    for (const Value& v : argv)
      if (v.is_null()) return DistInstance::point_mass(Value::null());

    DistInstance d;
    d.kind = spec.kind;
    auto need = [&](size_t n, const char* what) {
      if (argv.size() != n)
        throw ModelError(std::string(dist_kind_name(spec.kind)) + " expects " + what);
    };
    auto as_prob = [&](const Value& v) -> double {
      double x = v.is_real() ? v.as_real() : (v.is_nat() ? double(v.as_nat()) : -1.0);
      if (x < 0.0 || x > 1.0)
        throw ModelError(std::string(dist_kind_name(spec.kind)) + ": probability out of [0,1]");
      return x;
    };
    switch (spec.kind) {
      case DistKind::PointMass:
        need(1, "1 argument");
        return DistInstance::point_mass(argv[0]);
      case DistKind::Categorical: {
        d.categorical = spec.categorical;
        double total = 0.0;
        for (auto& [v, p] : d.categorical) total += p;
        for (auto& [v, p] : d.categorical) p /= total;
        break;
      }
      case DistKind::Bernoulli:
        need(1, "1 argument (success probability)");
        d.p = as_prob(argv[0]);
        break;
      case DistKind::UniformOverObjects: {
        d.obj_type = spec.uniform_type;
        d.guaranteed = w.model().guaranteed_values(d.obj_type);
        if (w.model().number_statement(d.obj_type)) {
          // The type's number variable is an active parent whenever objects
          // of the type are drawn, no matter which object the value names.
          BasicVariable nv = BasicVariable::number(d.obj_type);
          std::optional<Value> n = w.get(nv);
          note_read(reads, nv);
          if (!n) {
            supported = false;
            return d;
          }
          d.n_count = n->as_nat();
        }
        break;
      }
      case DistKind::UniformInt:
        need(2, "2 arguments (lo, hi)");
        d.lo = argv[0].as_nat();
        d.hi = argv[1].as_nat();
        if (d.lo > d.hi) throw ModelError("UniformInt: lo > hi");
        break;
      case DistKind::Poisson:
        need(1, "1 argument (rate)");
        d.lambda = argv[0].is_real() ? argv[0].as_real() : double(argv[0].as_nat());
        if (d.lambda <= 0) throw ModelError("Poisson: rate must be positive");
        break;
      case DistKind::Geometric:
        need(1, "1 argument (success probability)");
        d.geo_p = as_prob(argv[0]);
        if (d.geo_p <= 0 || d.geo_p > 1) throw ModelError("Geometric: p must be in (0,1]");
        break;
      case DistKind::NoisyCopy:
        need(2, "2 arguments (source, fidelity)");
        if (!argv[0].is_bool()) throw ModelError("NoisyCopy: source must be Boolean");
        d.source = argv[0].as_bool();
        d.fidelity = as_prob(argv[1]);
        break;
      case DistKind::TokenStringModel: {
        auto cfg_real = [&](const char* key, double dflt) {
          auto it = spec.config.find(key);
          if (it == spec.config.end()) return dflt;
          return it->second.is_nat() ? double(it->second.as_nat()) : it->second.as_real();
        };
        d.vocab = spec.vocab;
        d.len_p = cfg_real("p", 0.5);
        d.tok_eps = cfg_real("eps", 0.05);
        if (argv.size() > 1) throw ModelError("TokenStringModel takes at most one source");
        if (argv.size() == 1) {
          if (!argv[0].is_str()) throw ModelError("TokenStringModel: source must be String");
          d.str_source = argv[0].as_str();
        }
        break;
      }
      case DistKind::StringConcatFormat: {
        auto it = spec.config.find("eps");
        d.sep = spec.config.count("sep") ? spec.config.at("sep").as_str() : ".";
        d.sep_eps = it == spec.config.end()
                        ? 0.05
                        : (it->second.is_nat() ? double(it->second.as_nat()) : it->second.as_real());
        for (const Value& v : argv) {
          if (!v.is_str()) throw ModelError("StringConcatFormat: components must be String");
          d.components.push_back(v.as_str());
        }
        break;
      }
    }
    return d;
  }
};

}  // namespace

TermResult evaluate_term(const WorldView& w, const Term& term, std::span<const Value> bindings) {
  Evaluator ev{w};
  TermResult out;
  out.value = ev.term(term, bindings);
  out.supported = ev.supported;
  out.reads = std::move(ev.reads);
  if (!out.supported) out.value = Value::null();
  return out;
}

DependencyResult evaluate_dependency(const WorldView& w, const BasicVariable& var) {
  DependencyResult out;
  Evaluator ev{w};

  if (var.is_number()) {
    const NumberStatement* num = w.model().number_statement(var.number_type);
    if (!num)
      throw ModelError("type " + w.model().type(var.number_type).name +
                       " has no number statement");
    out.dist = ev.dist(num->prior, {});
    out.supported = ev.supported;
    out.active_parents = std::move(ev.reads);
    return out;
  }

  const DependencyStatement& dep = w.model().dependency_of(var.func);
  if (dep.param_types.size() != var.args.size())
    throw ModelError("arity mismatch for " + w.model().function(var.func).name);

  std::span<const Value> bindings(var.args);
  for (const Clause& clause : dep.clauses) {
    if (clause.guard) {
      Value g = ev.term(*clause.guard, bindings);
      if (!ev.supported) break;
      if (g.is_null() || !g.as_bool()) continue;  // null guard never fires
    }
    switch (clause.body) {
      case Clause::Body::Dist:
        out.dist = ev.dist(clause.dist, bindings);
        break;
      case Clause::Body::Equal: {
        Value v = ev.term(clause.equal, bindings);
        if (ev.supported) out.dist = DistInstance::point_mass(std::move(v));
        break;
      }
      case Clause::Body::NullValue:
        out.dist = DistInstance::point_mass(Value::null());
        break;
    }
    out.supported = ev.supported;
    out.active_parents = std::move(ev.reads);
    return out;
  }

  // Either a guard was unsupported, or no guard matched: the latter yields a
  // definite point mass on null with the guard reads as active parents.
  out.supported = ev.supported;
  if (ev.supported) out.dist = DistInstance::point_mass(Value::null());
  out.active_parents = std::move(ev.reads);
  return out;
}

double var_log_factor(const WorldView& w, const BasicVariable& var) {
  std::optional<Value> val = w.get(var);
  if (!val)
    throw ContractViolation("var_log_factor: " + var.to_string(w.model()) +
                            " is not instantiated");
  DependencyResult dep = evaluate_dependency(w, var);
  if (!dep.supported)
    throw ContractViolation("var_log_factor: dependency of " + var.to_string(w.model()) +
                            " is unsupported (blocked on " +
                            dep.blocked().to_string(w.model()) + ")");
  return dep.dist.log_mass(*val);
}

Value sample_dependency(const WorldView& w, const BasicVariable& var, Rng& rng) {
  DependencyResult dep = evaluate_dependency(w, var);
  if (!dep.supported)
    throw ContractViolation("sample_dependency: dependency of " + var.to_string(w.model()) +
                            " is unsupported");
  if (dep.dist.kind == DistKind::UniformOverObjects &&
      w.mode(dep.dist.obj_type) == TypeMode::Identifier)
    throw ContractViolation("sample_dependency: cannot draw a concrete object for type in "
                            "identifier mode");
  return dep.dist.sample(rng);
}

}  // namespace relmh
