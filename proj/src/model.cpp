#include "relmh/model.hpp"

#include <sstream>

namespace relmh {

const char* dist_kind_name(DistKind k) {
  switch (k) {
    case DistKind::PointMass: return "PointMass";
    case DistKind::Categorical: return "Categorical";
    case DistKind::Bernoulli: return "Bernoulli";
    case DistKind::UniformOverObjects: return "Uniform";
    case DistKind::UniformInt: return "UniformInt";
    case DistKind::Poisson: return "Poisson";
    case DistKind::Geometric: return "Geometric";
    case DistKind::NoisyCopy: return "NoisyCopy";
    case DistKind::TokenStringModel: return "TokenStringModel";
    case DistKind::StringConcatFormat: return "StringConcatFormat";
  }
  return "?";
}

bool Term::operator==(const Term& o) const {
  if (kind != o.kind || type != o.type) return false;
  switch (kind) {
    case Kind::Literal:
      if (!(literal == o.literal)) return false;
      break;
    case Kind::Param:
      if (param != o.param) return false;
      break;
    case Kind::Apply:
      if (func != o.func) return false;
      break;
    case Kind::Builtin:
      if (op != o.op) return false;
      break;
    case Kind::Number:
      if (number_type != o.number_type) return false;
      break;
  }
  return args == o.args;
}

bool DistSpec::operator==(const DistSpec& o) const {
  return kind == o.kind && uniform_type == o.uniform_type && categorical == o.categorical &&
         config == o.config && args == o.args;
}

bool Clause::operator==(const Clause& o) const {
  if (guard.has_value() != o.guard.has_value() || body != o.body) return false;
  if (guard && !(*guard == *o.guard)) return false;
  switch (body) {
    case Body::Dist: return dist == o.dist;
    case Body::Equal: return equal == o.equal;
    case Body::NullValue: return true;
  }
  return true;
}

bool DependencyStatement::operator==(const DependencyStatement& o) const {
  return func == o.func && param_names == o.param_names && param_types == o.param_types &&
         clauses == o.clauses;
}

bool NumberStatement::operator==(const NumberStatement& o) const {
  return type == o.type && prior == o.prior;
}

bool FunctionSymbol::operator==(const FunctionSymbol& o) const {
  return name == o.name && arg_types == o.arg_types && return_type == o.return_type;
}

Model::Model() {
  auto builtin = [this](const std::string& name, BuiltinType bt) {
    ModelType t;
    t.name = name;
    t.builtin = bt;
    type_by_name_[name] = static_cast<TypeId>(types_.size());
    types_.push_back(std::move(t));
    guaranteed_values_.emplace_back();
  };
  builtin("Boolean", BuiltinType::Boolean);
  builtin("NaturalNum", BuiltinType::NaturalNum);
  builtin("Real", BuiltinType::Real);
  builtin("String", BuiltinType::StringT);
}

TypeId Model::add_type(const std::string& name) {
  if (type_by_name_.count(name)) throw ModelError("duplicate type declaration: " + name);
  ModelType t;
  t.name = name;
  TypeId id = static_cast<TypeId>(types_.size());
  type_by_name_[name] = id;
  types_.push_back(std::move(t));
  guaranteed_values_.emplace_back();
  return id;
}

void Model::add_guaranteed(TypeId t, const std::string& symbol) {
  if (type(t).is_builtin()) throw ModelError("guaranteed objects need a user type: " + symbol);
  if (guaranteed_by_symbol_.count(symbol))
    throw ModelError("duplicate guaranteed object symbol: " + symbol);
  int32_t index = static_cast<int32_t>(types_[t].guaranteed.size());
  types_[t].guaranteed.push_back(symbol);
  Value v = Value::guaranteed(t, index);
  guaranteed_by_symbol_[symbol] = v;
  guaranteed_values_[t].push_back(v);
}

FuncId Model::add_function(FunctionSymbol f) {
  if (func_by_name_.count(f.name)) throw ModelError("duplicate function declaration: " + f.name);
  FuncId id = static_cast<FuncId>(funcs_.size());
  func_by_name_[f.name] = id;
  funcs_.push_back(std::move(f));
  return id;
}

void Model::add_dependency(DependencyStatement dep) {
  FunctionSymbol& f = funcs_.at(dep.func);
  if (f.dependency >= 0)
    throw ModelError("function " + f.name + " already has a dependency statement");
  f.dependency = static_cast<int>(deps_.size());
  deps_.push_back(std::move(dep));
}

void Model::add_number_statement(NumberStatement num) {
  ModelType& t = types_.at(num.type);
  if (t.is_builtin()) throw ModelError("number statement needs a user type: " + t.name);
  if (t.number_statement >= 0)
    throw ModelError("duplicate number statement for type " + t.name);
  t.number_statement = static_cast<int>(numbers_.size());
  numbers_.push_back(std::move(num));
}

void Model::bind_prior(const std::string& name, DistSpec spec) {
  if (priors_.count(name)) throw ModelError("duplicate prior binding: " + name);
  priors_[name] = std::move(spec);
}

const DependencyStatement& Model::dependency_of(FuncId f) const {
  const FunctionSymbol& fn = function(f);
  if (fn.dependency < 0) throw ModelError("function " + fn.name + " has no dependency statement");
  return deps_[fn.dependency];
}

const NumberStatement* Model::number_statement(TypeId t) const {
  int idx = type(t).number_statement;
  return idx >= 0 ? &numbers_[idx] : nullptr;
}

const DistSpec* Model::prior(const std::string& name) const {
  auto it = priors_.find(name);
  return it == priors_.end() ? nullptr : &it->second;
}

std::optional<TypeId> Model::find_type(const std::string& name) const {
  auto it = type_by_name_.find(name);
  if (it == type_by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<FuncId> Model::find_function(const std::string& name) const {
  auto it = func_by_name_.find(name);
  if (it == func_by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<Value> Model::find_guaranteed(const std::string& symbol) const {
  auto it = guaranteed_by_symbol_.find(symbol);
  if (it == guaranteed_by_symbol_.end()) return std::nullopt;
  return it->second;
}

const std::vector<Value>& Model::guaranteed_values(TypeId t) const {
  return guaranteed_values_.at(t);
}

const std::string& Model::guaranteed_symbol(const Value& v) const {
  return type(v.obj_type()).guaranteed.at(static_cast<size_t>(v.obj_index()));
}

std::vector<TypeId> Model::user_types() const {
  std::vector<TypeId> out;
  for (TypeId t = 0; t < static_cast<TypeId>(types_.size()); ++t)
    if (!types_[t].is_builtin()) out.push_back(t);
  return out;
}

bool Model::operator==(const Model& o) const {
  if (types_.size() != o.types_.size() || funcs_.size() != o.funcs_.size()) return false;
  for (size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].name != o.types_[i].name || types_[i].builtin != o.types_[i].builtin ||
        types_[i].guaranteed != o.types_[i].guaranteed ||
        (types_[i].number_statement >= 0) != (o.types_[i].number_statement >= 0))
      return false;
  }
  return funcs_ == o.funcs_ && deps_ == o.deps_ && numbers_ == o.numbers_ && priors_ == o.priors_;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string Value::to_string(const Model& m) const {
  switch (kind_) {
    case Kind::Null: return "null";
    case Kind::Bool: return b_ ? "true" : "false";
    case Kind::Nat: return std::to_string(i_);
    case Kind::Real: {
      std::ostringstream os;
      os << r_;
      return os.str();
    }
    case Kind::Str: {
      std::string out = "\"";
      for (char c : s_) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      out.push_back('"');
      return out;
    }
    case Kind::Object:
      if (obj_kind_ == ObjKind::Guaranteed) return m.guaranteed_symbol(*this);
      return "(" + m.type(type_).name + ", " + std::to_string(i_) + ")";
    case Kind::Ident: return s_;
  }
  return "?";
}

std::string BasicVariable::to_string(const Model& m) const {
  if (is_number()) return "#" + m.type(number_type).name;
  std::string out = m.function(func).name;
  if (!args.empty()) {
    out.push_back('(');
    for (size_t i = 0; i < args.size(); ++i) {
      if (i) out += ", ";
      out += args[i].to_string(m);
    }
    out.push_back(')');
  }
  return out;
}

}  // namespace relmh
