#include "relmh/world.hpp"

#include <algorithm>
#include <sstream>

namespace relmh {

std::vector<BasicVariable> WorldView::instantiated_vars_sorted() const {
  std::vector<BasicVariable> vars;
  vars.reserve(num_instantiated());
  for_each([&](const BasicVariable& v, const Value&) { vars.push_back(v); });
  std::sort(vars.begin(), vars.end());
  return vars;
}

std::string WorldView::debug_string() const {
  std::vector<std::string> lines;
  for_each([&](const BasicVariable& var, const Value& val) {
    lines.push_back(var.to_string(model()) + " = " + val.to_string(model()));
  });
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

PartialWorld::PartialWorld(const Model& model)
    : model_(&model), type_state_(model.types().size()) {}

std::optional<Value> PartialWorld::get(const BasicVariable& var) const {
  auto it = assignment_.find(var);
  if (it == assignment_.end()) return std::nullopt;
  return it->second;
}

TypeMode PartialWorld::mode(TypeId t) const { return type_state_.at(t).mode; }

int64_t PartialWorld::pool_size(TypeId t) const {
  return static_cast<int64_t>(type_state_.at(t).pool.size());
}

std::vector<std::string> PartialWorld::pool_tokens(TypeId t) const {
  const auto& pool = type_state_.at(t).pool;
  return {pool.begin(), pool.end()};
}

void PartialWorld::for_each(
    const std::function<void(const BasicVariable&, const Value&)>& fn) const {
  for (const auto& [var, val] : assignment_) fn(var, val);
}

PartialWorld::TypeState& PartialWorld::state(TypeId t) { return type_state_.at(t); }

void PartialWorld::note_value_repr(const Value& v) {
  if (v.is_numbered()) {
    TypeState& st = state(v.obj_type());
    if (st.mode == TypeMode::Identifier)
      throw ContractViolation("type " + model_->type(v.obj_type()).name +
                              " uses identifiers; concrete numbered objects are not allowed");
    st.mode = TypeMode::Concrete;
  } else if (v.is_ident()) {
    TypeState& st = state(v.obj_type());
    if (st.mode == TypeMode::Concrete)
      throw ContractViolation("type " + model_->type(v.obj_type()).name +
                              " uses concrete objects; identifiers are not allowed");
    st.mode = TypeMode::Identifier;
    if (!st.pool.count(v.ident_token()))
      throw ContractViolation("identifier " + v.ident_token() + " is not registered");
  }
}

void PartialWorld::set(const BasicVariable& var, const Value& value) {
  for (const Value& a : var.args) note_value_repr(a);
  note_value_repr(value);
  assignment_[var] = value;
  ++mutations_;
}

void PartialWorld::erase(const BasicVariable& var) {
  assignment_.erase(var);
  ++mutations_;
}

void PartialWorld::register_identifier(TypeId t, const std::string& token) {
  TypeState& st = state(t);
  if (st.mode == TypeMode::Concrete)
    throw ContractViolation("type " + model_->type(t).name +
                            " uses concrete objects; identifiers are not allowed");
  st.mode = TypeMode::Identifier;
  if (!st.pool.insert(token).second)
    throw ContractViolation("identifier " + token + " already registered");
  ++mutations_;
}

void PartialWorld::drop_identifier(TypeId t, const std::string& token) {
  state(t).pool.erase(token);
  ++mutations_;
}

Value PartialWorld::mint_identifier(TypeId t, Rng& rng) {
  TypeState& st = state(t);
  uint64_t n = st.mint_counter++;
  static const char* digits = "0123456789abcdef";
  uint64_t r = rng.next_u64();
  std::string suffix;
  for (int i = 0; i < 3; ++i) {
    suffix.push_back(digits[r & 15]);
    r >>= 4;
  }
  std::string token = model_->type(t).name + "@" + std::to_string(n) + suffix;
  register_identifier(t, token);
  return Value::ident(t, token);
}

std::optional<Value> WorldPatch::get(const BasicVariable& var) const {
  auto it = changed_.find(var);
  if (it != changed_.end()) return it->second;
  if (removed_.count(var)) return std::nullopt;
  return base_->get(var);
}

TypeMode WorldPatch::mode(TypeId t) const {
  TypeMode m = base_->mode(t);
  if (m != TypeMode::Uncommitted) return m;
  if (auto it = pool_added_.find(t); it != pool_added_.end() && !it->second.empty())
    return TypeMode::Identifier;
  // Scan pending values for a committing representation.
  for (const auto& [var, val] : changed_) {
    for (const Value& a : var.args)
      if ((a.is_numbered() || a.is_ident()) && a.obj_type() == t)
        return a.is_ident() ? TypeMode::Identifier : TypeMode::Concrete;
    if ((val.is_numbered() || val.is_ident()) && val.obj_type() == t)
      return val.is_ident() ? TypeMode::Identifier : TypeMode::Concrete;
  }
  return TypeMode::Uncommitted;
}

int64_t WorldPatch::pool_size(TypeId t) const {
  int64_t n = base_->pool_size(t);
  if (auto it = pool_added_.find(t); it != pool_added_.end()) n += it->second.size();
  if (auto it = pool_removed_.find(t); it != pool_removed_.end()) n -= it->second.size();
  return n;
}

std::vector<std::string> WorldPatch::pool_tokens(TypeId t) const {
  std::set<std::string> pool(base_->type_state_.at(t).pool);
  if (auto it = pool_removed_.find(t); it != pool_removed_.end())
    for (const auto& tok : it->second) pool.erase(tok);
  if (auto it = pool_added_.find(t); it != pool_added_.end())
    for (const auto& tok : it->second) pool.insert(tok);
  return {pool.begin(), pool.end()};
}

size_t WorldPatch::num_instantiated() const {
  size_t n = base_->num_instantiated() + changed_.size();
  for (const auto& [var, _] : changed_)
    if (base_->get(var)) --n;
  return n - removed_.size();
}

void WorldPatch::for_each(
    const std::function<void(const BasicVariable&, const Value&)>& fn) const {
  base_->for_each([&](const BasicVariable& var, const Value& val) {
    if (removed_.count(var) || changed_.count(var)) return;
    fn(var, val);
  });
  for (const auto& [var, val] : changed_) fn(var, val);
}

void WorldPatch::set(const BasicVariable& var, const Value& value) {
  removed_.erase(var);
  changed_[var] = value;
}

void WorldPatch::remove(const BasicVariable& var) {
  changed_.erase(var);
  if (base_->get(var)) removed_.insert(var);
}

void WorldPatch::register_identifier(TypeId t, const std::string& token) {
  if (auto it = pool_removed_.find(t); it != pool_removed_.end() && it->second.erase(token))
    return;
  pool_added_[t].insert(token);
}

void WorldPatch::drop_identifier(TypeId t, const std::string& token) {
  if (auto it = pool_added_.find(t); it != pool_added_.end() && it->second.erase(token)) return;
  pool_removed_[t].insert(token);
}

Value WorldPatch::mint_identifier(TypeId t, Rng& rng) {
  uint64_t n = base_->type_state_.at(t).mint_counter + mint_offset_++;
  static const char* digits = "0123456789abcdef";
  uint64_t r = rng.next_u64();
  std::string suffix;
  for (int i = 0; i < 3; ++i) {
    suffix.push_back(digits[r & 15]);
    r >>= 4;
  }
  std::string token = base_->model().type(t).name + "@" + std::to_string(n) + suffix;
  register_identifier(t, token);
  return Value::ident(t, token);
}

void WorldPatch::apply() {
  for (const auto& [t, toks] : pool_added_)
    for (const auto& tok : toks) base_->register_identifier(t, tok);
  for (const BasicVariable& var : removed_) base_->erase(var);
  for (const auto& [var, val] : changed_) base_->set(var, val);
  for (const auto& [t, toks] : pool_removed_)
    for (const auto& tok : toks) base_->drop_identifier(t, tok);
  // Advance mint counters past any tokens minted through this patch.
  if (mint_offset_ > 0)
    for (const auto& [t, toks] : pool_added_)
      base_->type_state_.at(t).mint_counter += mint_offset_;
  discard();
}

void WorldPatch::discard() {
  changed_.clear();
  removed_.clear();
  pool_added_.clear();
  pool_removed_.clear();
  mint_offset_ = 0;
}

}  // namespace relmh
