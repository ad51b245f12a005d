#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relmh/value.hpp"

namespace relmh {

// Thrown for malformed models and type errors discovered at evaluation time.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an engine or proposer precondition is violated (a bug in the
// caller, not a property of the data).
class ContractViolation : public std::runtime_error {
 public:
  explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

enum class BuiltinType : uint8_t { None, Boolean, NaturalNum, Real, StringT };

struct ModelType {
  std::string name;
  BuiltinType builtin = BuiltinType::None;  // None => user-declared type
  std::vector<std::string> guaranteed;      // symbols, in declaration order
  int number_statement = -1;                // index into Model::numbers(), -1 if none

  bool is_builtin() const { return builtin != BuiltinType::None; }
};

enum class DistKind : uint8_t {
  PointMass,  // internal; produced by "= term" clauses and implicit null
  Categorical,
  Bernoulli,
  UniformOverObjects,
  UniformInt,
  Poisson,
  Geometric,
  NoisyCopy,
  TokenStringModel,
  StringConcatFormat,
};

const char* dist_kind_name(DistKind k);

struct SourceSpan {
  int line = 0;       // 1-based; 0 = unknown
  int col = 0;        // 1-based
  size_t begin = 0;   // byte offsets into the source text
  size_t end = 0;
};

enum class BuiltinOp : uint8_t { Succ, Pred, Lt, Le, Gt, Ge, Eq, Ne };

// Term tree. Types are resolved during model validation.
struct Term {
  enum class Kind : uint8_t { Literal, Param, Apply, Builtin, Number };

  Kind kind = Kind::Literal;
  Value literal;               // Literal (also carries guaranteed-object constants)
  int param = -1;              // Param: index into the dependency's formal params
  FuncId func = -1;            // Apply
  BuiltinOp op = BuiltinOp::Succ;  // Builtin
  TypeId number_type = -1;     // Number: reads the type's number variable
  std::vector<Term> args;
  TypeId type = -1;            // resolved result type
  SourceSpan span;

  bool operator==(const Term& o) const;
};

// A distribution expression as written in the model: a kind plus fixed keyword
// configuration and positional argument terms. Named priors are DistSpecs
// bound to a name; applying a named prior appends positional args.
struct DistSpec {
  DistKind kind = DistKind::PointMass;
  TypeId uniform_type = -1;                          // UniformOverObjects
  std::vector<std::pair<Value, double>> categorical; // Categorical weight table
  std::map<std::string, Value> config;               // keyword args (vocab, p, eps, sep)
  std::vector<Term> args;                            // positional terms, evaluated per call
  std::shared_ptr<std::vector<std::string>> vocab;   // prepared from config at validation

  bool operator==(const DistSpec& o) const;
};

struct Clause {
  enum class Body : uint8_t { Dist, Equal, NullValue };

  std::optional<Term> guard;  // nullopt = else / unconditional
  Body body = Body::Dist;
  DistSpec dist;
  Term equal;

  bool operator==(const Clause& o) const;
};

// Every random function has exactly one dependency statement; the declaration
// and the dependency are a single syntactic unit.
struct DependencyStatement {
  FuncId func = -1;
  std::vector<std::string> param_names;
  std::vector<TypeId> param_types;
  std::vector<Clause> clauses;  // evaluated in order; no matching guard => null

  bool operator==(const DependencyStatement& o) const;
};

struct NumberStatement {
  TypeId type = -1;
  DistSpec prior;

  bool operator==(const NumberStatement& o) const;
};

struct FunctionSymbol {
  std::string name;
  std::vector<TypeId> arg_types;
  TypeId return_type = -1;
  int dependency = -1;  // index into Model::dependencies()

  bool operator==(const FunctionSymbol& o) const;
};

class Model {
 public:
  Model();

  // Builtin types are pre-registered at fixed indices.
  TypeId boolean_type() const { return 0; }
  TypeId natural_type() const { return 1; }
  TypeId real_type() const { return 2; }
  TypeId string_type() const { return 3; }

  TypeId add_type(const std::string& name);
  void add_guaranteed(TypeId t, const std::string& symbol);
  FuncId add_function(FunctionSymbol f);
  void add_dependency(DependencyStatement dep);
  void add_number_statement(NumberStatement num);
  void bind_prior(const std::string& name, DistSpec spec);

  const std::vector<ModelType>& types() const { return types_; }
  const ModelType& type(TypeId t) const { return types_.at(t); }
  const std::vector<FunctionSymbol>& functions() const { return funcs_; }
  const FunctionSymbol& function(FuncId f) const { return funcs_.at(f); }
  const std::vector<DependencyStatement>& dependencies() const { return deps_; }
  const DependencyStatement& dependency_of(FuncId f) const;
  const std::vector<NumberStatement>& numbers() const { return numbers_; }
  const NumberStatement* number_statement(TypeId t) const;
  const std::map<std::string, DistSpec>& priors() const { return priors_; }
  const DistSpec* prior(const std::string& name) const;

  std::optional<TypeId> find_type(const std::string& name) const;
  std::optional<FuncId> find_function(const std::string& name) const;
  // Resolves a guaranteed-object symbol to its value, if declared.
  std::optional<Value> find_guaranteed(const std::string& symbol) const;

  const std::vector<Value>& guaranteed_values(TypeId t) const;
  int64_t guaranteed_count(TypeId t) const { return static_cast<int64_t>(type(t).guaranteed.size()); }
  const std::string& guaranteed_symbol(const Value& v) const;

  // User types in declaration order (excludes builtins).
  std::vector<TypeId> user_types() const;

  // Structural equality, used by parse/format round-trip tests.
  bool operator==(const Model& o) const;

 private:
  std::vector<ModelType> types_;
  std::vector<FunctionSymbol> funcs_;
  std::vector<DependencyStatement> deps_;
  std::vector<NumberStatement> numbers_;
  std::map<std::string, DistSpec> priors_;
  std::map<std::string, TypeId> type_by_name_;
  std::map<std::string, FuncId> func_by_name_;
  std::map<std::string, Value> guaranteed_by_symbol_;
  std::vector<std::vector<Value>> guaranteed_values_;  // parallel to types_
};

// Shared by evaluation and the distribution layer: splits a text into
// whitespace-separated tokens.
std::vector<std::string> tokenize(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace relmh
