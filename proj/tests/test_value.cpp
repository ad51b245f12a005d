#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>
#include <unordered_set>

#include "doctest.h"
#include "relmh/value.hpp"

using namespace relmh;

TEST_CASE("value equality distinguishes kinds and payloads") {
  CHECK(Value::null() == Value::null());
  CHECK(Value::boolean(true) != Value::boolean(false));
  CHECK(Value::nat(3) == Value::nat(3));
  CHECK(Value::nat(3) != Value::real(3.0));
  CHECK(Value::str("a b") == Value::str("a b"));
  CHECK(Value::guaranteed(4, 0) != Value::guaranteed(4, 1));
  CHECK(Value::guaranteed(4, 0) != Value::guaranteed(5, 0));
  CHECK(Value::numbered(4, 1) != Value::guaranteed(4, 1));
  CHECK(Value::ident(4, "Pub@1a") == Value::ident(4, "Pub@1a"));
  CHECK(Value::ident(4, "Pub@1a") != Value::ident(4, "Pub@2b"));
}

TEST_CASE("value ordering is total and strict") {
  std::vector<Value> vs = {
      Value::null(),        Value::boolean(false), Value::boolean(true),
      Value::nat(0),        Value::nat(7),         Value::real(-1.5),
      Value::str(""),       Value::str("z"),       Value::guaranteed(4, 0),
      Value::numbered(4, 2), Value::ident(4, "T@1"), Value::ident(5, "U@1"),
  };
  std::set<Value> sorted(vs.begin(), vs.end());
  CHECK(sorted.size() == vs.size());
  for (const Value& a : vs)
    for (const Value& b : vs) {
      bool lt = a < b, gt = b < a, eq = a == b;
      CHECK((lt + gt + eq) == 1);
    }
}

TEST_CASE("value hashing agrees with equality") {
  std::unordered_set<Value> s;
  for (int i = 0; i < 50; ++i) s.insert(Value::nat(i % 10));
  CHECK(s.size() == 10);
  s.insert(Value::ident(4, "Pub@a"));
  s.insert(Value::ident(4, "Pub@a"));
  CHECK(s.count(Value::ident(4, "Pub@a")) == 1);
}

TEST_CASE("basic variables compare and hash structurally") {
  BasicVariable n = BasicVariable::number(4);
  BasicVariable n2 = BasicVariable::number(4);
  BasicVariable m = BasicVariable::number(5);
  CHECK(n == n2);
  CHECK(n != m);

  BasicVariable f = BasicVariable::app(0, {Value::guaranteed(4, 0)});
  BasicVariable g = BasicVariable::app(0, {Value::guaranteed(4, 1)});
  BasicVariable h = BasicVariable::app(1, {Value::guaranteed(4, 0)});
  CHECK(f != g);
  CHECK(f != h);
  CHECK(f == BasicVariable::app(0, {Value::guaranteed(4, 0)}));

  std::unordered_set<BasicVariable> s{n, n2, m, f, g, h};
  CHECK(s.size() == 5);

  std::set<BasicVariable> ordered{h, g, f, m, n};
  CHECK(ordered.size() == 5);
}

TEST_CASE("numbered objects are one-based and carry their index") {
  Value v = Value::numbered(9, 1);
  CHECK(v.obj_index() == 1);
  CHECK(v.obj_type() == 9);
  CHECK(v.is_object());
  CHECK(!Value::ident(9, "X@1").is_numbered());
  CHECK(Value::ident(9, "X@1").is_ident());
}
