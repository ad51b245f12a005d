#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "relmh/model.hpp"
#include "relmh/rng.hpp"
#include "relmh/value.hpp"

namespace relmh {

// Per user type, a world is committed to representing non-guaranteed objects
// either concretely (numbered) or through abstract identifiers, never both.
enum class TypeMode : uint8_t { Uncommitted, Concrete, Identifier };

// Read interface over a (possibly patched) partial instantiation.
class WorldView {
 public:
  virtual ~WorldView() = default;

  virtual const Model& model() const = 0;
  virtual std::optional<Value> get(const BasicVariable& var) const = 0;
  virtual bool has(const BasicVariable& var) const { return get(var).has_value(); }

  virtual TypeMode mode(TypeId t) const = 0;
  virtual int64_t pool_size(TypeId t) const = 0;
  virtual std::vector<std::string> pool_tokens(TypeId t) const = 0;  // sorted

  virtual size_t num_instantiated() const = 0;
  // Visit every instantiated (variable, value) pair. Iteration order is
  // unspecified; callers needing determinism sort.
  virtual void for_each(const std::function<void(const BasicVariable&, const Value&)>& fn) const = 0;

  std::vector<BasicVariable> instantiated_vars_sorted() const;

  // Sorted `var = value` lines.
  std::string debug_string() const;
};

class PartialWorld : public WorldView {
 public:
  explicit PartialWorld(const Model& model);

  const Model& model() const override { return *model_; }
  std::optional<Value> get(const BasicVariable& var) const override;
  TypeMode mode(TypeId t) const override;
  int64_t pool_size(TypeId t) const override;
  std::vector<std::string> pool_tokens(TypeId t) const override;
  size_t num_instantiated() const override { return assignment_.size(); }
  void for_each(const std::function<void(const BasicVariable&, const Value&)>& fn) const override;

  // Instantiates or overwrites. Enforces the per-type representation
  // invariant for any objects/identifiers in the key or value.
  void set(const BasicVariable& var, const Value& value);
  void erase(const BasicVariable& var);

  // Adds an identifier token to the type's pool, committing the type to
  // identifier mode. Tokens must be unique within the type.
  void register_identifier(TypeId t, const std::string& token);
  void drop_identifier(TypeId t, const std::string& token);
  // Mints a fresh token "<Type>@<counter><suffix>" and registers it.
  Value mint_identifier(TypeId t, Rng& rng);

  // Mutation counter; covers set/erase/pool updates. Patch-apply cost
  // assertions read this.
  uint64_t mutation_count() const { return mutations_; }

 private:
  friend class WorldPatch;

  struct TypeState {
    TypeMode mode = TypeMode::Uncommitted;
    std::set<std::string> pool;
    uint64_t mint_counter = 0;
  };

  void note_value_repr(const Value& v);
  TypeState& state(TypeId t);

  const Model* model_;
  std::unordered_map<BasicVariable, Value> assignment_;
  std::vector<TypeState> type_state_;  // indexed by TypeId
  uint64_t mutations_ = 0;
};

// Overlay of pending changes on a base world. Reads fall through to the base;
// writes stay in the patch until apply(). changed and removed are disjoint.
class WorldPatch : public WorldView {
 public:
  explicit WorldPatch(PartialWorld& base) : base_(&base) {}

  const Model& model() const override { return base_->model(); }
  std::optional<Value> get(const BasicVariable& var) const override;
  TypeMode mode(TypeId t) const override;
  int64_t pool_size(TypeId t) const override;
  std::vector<std::string> pool_tokens(TypeId t) const override;
  size_t num_instantiated() const override;
  void for_each(const std::function<void(const BasicVariable&, const Value&)>& fn) const override;

  void set(const BasicVariable& var, const Value& value);
  void remove(const BasicVariable& var);
  Value mint_identifier(TypeId t, Rng& rng);
  void register_identifier(TypeId t, const std::string& token);
  void drop_identifier(TypeId t, const std::string& token);

  const PartialWorld& base() const { return *base_; }
  const std::map<BasicVariable, Value>& changed() const { return changed_; }
  const std::set<BasicVariable>& removed() const { return removed_; }
  const std::map<TypeId, std::set<std::string>>& pool_added() const { return pool_added_; }
  const std::map<TypeId, std::set<std::string>>& pool_removed() const { return pool_removed_; }

  bool empty() const {
    return changed_.empty() && removed_.empty() && pool_added_.empty() && pool_removed_.empty();
  }

  // Writes all pending changes into the base world. Cost is proportional to
  // the change-set size. The patch is cleared afterwards.
  void apply();
  // Drops all pending changes; the base world is untouched.
  void discard();

 private:
  PartialWorld* base_;
  std::map<BasicVariable, Value> changed_;
  std::set<BasicVariable> removed_;
  std::map<TypeId, std::set<std::string>> pool_added_;
  std::map<TypeId, std::set<std::string>> pool_removed_;
  uint64_t mint_offset_ = 0;
};

}  // namespace relmh
