#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace relmh {

class Model;

using TypeId = int32_t;
using FuncId = int32_t;

// Runtime value of a basic variable or term. One of:
//   null        distinguished "undefined" value
//   bool / natural / real / string  literals
//   object      a guaranteed or numbered (non-guaranteed) object of a user type
//   identifier  an abstract stand-in for a non-guaranteed object, named by token
class Value {
 public:
  enum class Kind : uint8_t { Null, Bool, Nat, Real, Str, Object, Ident };
  enum class ObjKind : uint8_t { Guaranteed, Numbered };

  Value() : kind_(Kind::Null) {}

  static Value null() { return Value(); }
  static Value boolean(bool b) {
    Value v;
    v.kind_ = Kind::Bool;
    v.b_ = b;
    return v;
  }
  static Value nat(int64_t n) {
    Value v;
    v.kind_ = Kind::Nat;
    v.i_ = n;
    return v;
  }
  static Value real(double r) {
    Value v;
    v.kind_ = Kind::Real;
    v.r_ = r;
    return v;
  }
  static Value str(std::string s) {
    Value v;
    v.kind_ = Kind::Str;
    v.s_ = std::move(s);
    return v;
  }
  static Value guaranteed(TypeId t, int32_t index) {
    Value v;
    v.kind_ = Kind::Object;
    v.obj_kind_ = ObjKind::Guaranteed;
    v.type_ = t;
    v.i_ = index;
    return v;
  }
  // Numbered objects are 1-based: (type, k) exists in a world iff k <= #type.
  static Value numbered(TypeId t, int64_t index) {
    Value v;
    v.kind_ = Kind::Object;
    v.obj_kind_ = ObjKind::Numbered;
    v.type_ = t;
    v.i_ = index;
    return v;
  }
  static Value ident(TypeId t, std::string token) {
    Value v;
    v.kind_ = Kind::Ident;
    v.type_ = t;
    v.s_ = std::move(token);
    return v;
  }

  Kind kind() const { return kind_; }
  bool is_null() const { return kind_ == Kind::Null; }
  bool is_bool() const { return kind_ == Kind::Bool; }
  bool is_nat() const { return kind_ == Kind::Nat; }
  bool is_real() const { return kind_ == Kind::Real; }
  bool is_str() const { return kind_ == Kind::Str; }
  bool is_object() const { return kind_ == Kind::Object; }
  bool is_ident() const { return kind_ == Kind::Ident; }
  bool is_numbered() const { return kind_ == Kind::Object && obj_kind_ == ObjKind::Numbered; }
  bool is_guaranteed() const { return kind_ == Kind::Object && obj_kind_ == ObjKind::Guaranteed; }

  bool as_bool() const { return b_; }
  int64_t as_nat() const { return i_; }
  double as_real() const { return r_; }
  const std::string& as_str() const { return s_; }
  const std::string& ident_token() const { return s_; }
  TypeId obj_type() const { return type_; }  // object or identifier
  ObjKind obj_kind() const { return obj_kind_; }
  int64_t obj_index() const { return i_; }

  bool operator==(const Value& o) const {
    if (kind_ != o.kind_) return false;
    switch (kind_) {
      case Kind::Null: return true;
      case Kind::Bool: return b_ == o.b_;
      case Kind::Nat: return i_ == o.i_;
      case Kind::Real: return r_ == o.r_;
      case Kind::Str: return s_ == o.s_;
      case Kind::Object:
        return obj_kind_ == o.obj_kind_ && type_ == o.type_ && i_ == o.i_;
      case Kind::Ident: return type_ == o.type_ && s_ == o.s_;
    }
    return false;
  }

  // Canonical total order; used for deterministic iteration and sorted output.
  std::strong_ordering operator<=>(const Value& o) const {
    if (auto c = kind_ <=> o.kind_; c != 0) return c;
    switch (kind_) {
      case Kind::Null: return std::strong_ordering::equal;
      case Kind::Bool: return b_ <=> o.b_;
      case Kind::Nat: return i_ <=> o.i_;
      case Kind::Real: {
        if (r_ < o.r_) return std::strong_ordering::less;
        if (r_ > o.r_) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
      }
      case Kind::Str: return s_.compare(o.s_) <=> 0;
      case Kind::Object: {
        if (auto c = type_ <=> o.type_; c != 0) return c;
        if (auto c = obj_kind_ <=> o.obj_kind_; c != 0) return c;
        return i_ <=> o.i_;
      }
      case Kind::Ident: {
        if (auto c = type_ <=> o.type_; c != 0) return c;
        return s_.compare(o.s_) <=> 0;
      }
    }
    return std::strong_ordering::equal;
  }

  size_t hash() const {
    size_t h = static_cast<size_t>(kind_) * 0x9e3779b97f4a7c15ull;
    auto mix = [&h](size_t x) {
      h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    switch (kind_) {
      case Kind::Null: break;
      case Kind::Bool: mix(b_ ? 1 : 2); break;
      case Kind::Nat: mix(static_cast<size_t>(i_)); break;
      case Kind::Real: mix(std::hash<double>()(r_)); break;
      case Kind::Str: mix(std::hash<std::string>()(s_)); break;
      case Kind::Object:
        mix(static_cast<size_t>(type_));
        mix(static_cast<size_t>(obj_kind_) + 7);
        mix(static_cast<size_t>(i_));
        break;
      case Kind::Ident:
        mix(static_cast<size_t>(type_));
        mix(std::hash<std::string>()(s_));
        break;
    }
    return h;
  }

  // Rendering; object and identifier values need the model for type/symbol names.
  std::string to_string(const Model& m) const;

 private:
  Kind kind_;
  ObjKind obj_kind_ = ObjKind::Guaranteed;
  TypeId type_ = -1;
  bool b_ = false;
  int64_t i_ = 0;
  double r_ = 0.0;
  std::string s_;
};

// A basic random variable: either the number variable #T of a user type, or a
// function application variable F(arg values).
struct BasicVariable {
  static constexpr FuncId kNumber = -1;

  FuncId func = kNumber;
  TypeId number_type = -1;  // valid iff func == kNumber
  std::vector<Value> args;

  static BasicVariable number(TypeId t) {
    BasicVariable v;
    v.func = kNumber;
    v.number_type = t;
    return v;
  }
  static BasicVariable app(FuncId f, std::vector<Value> args) {
    BasicVariable v;
    v.func = f;
    v.args = std::move(args);
    return v;
  }

  bool is_number() const { return func == kNumber; }

  bool operator==(const BasicVariable& o) const {
    return func == o.func && number_type == o.number_type && args == o.args;
  }
  std::strong_ordering operator<=>(const BasicVariable& o) const {
    if (auto c = func <=> o.func; c != 0) return c;
    if (auto c = number_type <=> o.number_type; c != 0) return c;
    if (auto c = args.size() <=> o.args.size(); c != 0) return c;
    for (size_t i = 0; i < args.size(); ++i) {
      if (auto c = args[i] <=> o.args[i]; c != 0) return c;
    }
    return std::strong_ordering::equal;
  }

  size_t hash() const {
    size_t h = std::hash<int64_t>()((static_cast<int64_t>(func) << 20) ^ number_type);
    for (const Value& v : args) h ^= v.hash() + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
  }

  std::string to_string(const Model& m) const;
};

}  // namespace relmh

template <>
struct std::hash<relmh::Value> {
  size_t operator()(const relmh::Value& v) const { return v.hash(); }
};

template <>
struct std::hash<relmh::BasicVariable> {
  size_t operator()(const relmh::BasicVariable& v) const { return v.hash(); }
};
