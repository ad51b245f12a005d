#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>

#include "doctest.h"
#include "relmh/world.hpp"
#include "test_util.hpp"

using namespace relmh;
using relmh::testutil::load_model;

namespace {

struct Tiny {
  Model m;
  TypeId pub, cit;
  FuncId hot, pubcited, obs;
  Value c1;

  Tiny()
      : m(load_model("tiny.blog")),
        pub(*m.find_type("Pub")),
        cit(*m.find_type("Cit")),
        hot(*m.find_function("Hot")),
        pubcited(*m.find_function("PubCited")),
        obs(*m.find_function("Obs")),
        c1(*m.find_guaranteed("C1")) {}

  BasicVariable num_pub() const { return BasicVariable::number(pub); }
  BasicVariable hot_of(Value p) const { return BasicVariable::app(hot, {p}); }
  BasicVariable cited() const { return BasicVariable::app(pubcited, {c1}); }
  BasicVariable observed() const { return BasicVariable::app(obs, {c1}); }
};

}  // namespace

TEST_CASE("set, get, erase, and overwrite") {
  Tiny t;
  PartialWorld w(t.m);
  CHECK(w.num_instantiated() == 0);
  CHECK(!w.get(t.num_pub()).has_value());

  w.set(t.num_pub(), Value::nat(2));
  w.set(t.cited(), Value::numbered(t.pub, 1));
  CHECK(w.num_instantiated() == 2);
  CHECK(*w.get(t.num_pub()) == Value::nat(2));

  w.set(t.num_pub(), Value::nat(1));
  CHECK(*w.get(t.num_pub()) == Value::nat(1));
  CHECK(w.num_instantiated() == 2);

  w.erase(t.cited());
  CHECK(!w.get(t.cited()).has_value());
  CHECK(w.num_instantiated() == 1);
}

TEST_CASE("types commit to one object representation") {
  Tiny t;
  PartialWorld w(t.m);
  CHECK(w.mode(t.pub) == TypeMode::Uncommitted);

  SUBCASE("numbered first, identifier rejected") {
    w.set(t.cited(), Value::numbered(t.pub, 1));
    CHECK(w.mode(t.pub) == TypeMode::Concrete);
    CHECK_THROWS_AS(w.register_identifier(t.pub, "Pub@x"), ContractViolation);
    CHECK_THROWS_AS(w.set(t.cited(), Value::ident(t.pub, "Pub@x")), ContractViolation);
  }

  SUBCASE("identifier first, numbered rejected") {
    w.register_identifier(t.pub, "Pub@x");
    CHECK(w.mode(t.pub) == TypeMode::Identifier);
    CHECK(w.pool_size(t.pub) == 1);
    w.set(t.cited(), Value::ident(t.pub, "Pub@x"));
    CHECK_THROWS_AS(w.set(t.cited(), Value::numbered(t.pub, 1)), ContractViolation);
  }

  SUBCASE("identifier values must be registered") {
    w.register_identifier(t.pub, "Pub@x");
    CHECK_THROWS_AS(w.set(t.cited(), Value::ident(t.pub, "Pub@zzz")), ContractViolation);
  }

  SUBCASE("guaranteed objects commit nothing") {
    PartialWorld v(t.m);
    v.set(t.observed(), Value::boolean(true));  // key holds guaranteed C1
    CHECK(v.mode(t.cit) == TypeMode::Uncommitted);
  }
}

TEST_CASE("minted identifiers are unique and registered") {
  Tiny t;
  PartialWorld w(t.m);
  Rng rng(42);
  Value a = w.mint_identifier(t.pub, rng);
  Value b = w.mint_identifier(t.pub, rng);
  CHECK(a != b);
  CHECK(w.pool_size(t.pub) == 2);
  auto toks = w.pool_tokens(t.pub);
  REQUIRE(toks.size() == 2);
  CHECK(toks[0] < toks[1]);
  w.drop_identifier(t.pub, a.ident_token());
  CHECK(w.pool_size(t.pub) == 1);
}

TEST_CASE("debug string is sorted and stable") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.observed(), Value::boolean(true));
  w.set(t.num_pub(), Value::nat(1));
  w.set(t.cited(), Value::numbered(t.pub, 1));
  w.set(t.hot_of(Value::numbered(t.pub, 1)), Value::boolean(true));
  CHECK(w.debug_string() ==
        "#Pub = 1\n"
        "Hot((Pub, 1)) = true\n"
        "Obs(C1) = true\n"
        "PubCited(C1) = (Pub, 1)\n");
}

TEST_CASE("patch reads through and applies atomically") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.num_pub(), Value::nat(2));
  w.set(t.cited(), Value::numbered(t.pub, 2));

  WorldPatch p(w);
  CHECK(p.empty());
  CHECK(*p.get(t.num_pub()) == Value::nat(2));

  p.set(t.num_pub(), Value::nat(1));
  p.set(t.hot_of(Value::numbered(t.pub, 2)), Value::boolean(false));
  p.remove(t.cited());
  CHECK(!p.empty());

  // The view reflects pending changes; the base does not.
  CHECK(*p.get(t.num_pub()) == Value::nat(1));
  CHECK(!p.get(t.cited()).has_value());
  CHECK(p.num_instantiated() == 2);
  CHECK(*w.get(t.num_pub()) == Value::nat(2));
  CHECK(w.get(t.cited()).has_value());
  CHECK(w.num_instantiated() == 2);

  SUBCASE("apply writes everything") {
    p.apply();
    CHECK(p.empty());
    CHECK(*w.get(t.num_pub()) == Value::nat(1));
    CHECK(!w.get(t.cited()).has_value());
    CHECK(w.get(t.hot_of(Value::numbered(t.pub, 2))).has_value());
    CHECK(w.num_instantiated() == 2);
  }

  SUBCASE("discard leaves the base untouched") {
    p.discard();
    CHECK(p.empty());
    CHECK(*w.get(t.num_pub()) == Value::nat(2));
    CHECK(w.num_instantiated() == 2);
  }
}

TEST_CASE("set after remove cancels the removal") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.num_pub(), Value::nat(2));
  WorldPatch p(w);
  p.remove(t.num_pub());
  CHECK(!p.get(t.num_pub()).has_value());
  p.set(t.num_pub(), Value::nat(1));
  CHECK(*p.get(t.num_pub()) == Value::nat(1));
  CHECK(p.removed().empty());
  p.apply();
  CHECK(*w.get(t.num_pub()) == Value::nat(1));
}

TEST_CASE("removing a patch-only variable leaves no removal entry") {
  Tiny t;
  PartialWorld w(t.m);
  WorldPatch p(w);
  p.set(t.num_pub(), Value::nat(1));
  p.remove(t.num_pub());
  CHECK(p.empty());
  p.apply();
  CHECK(w.num_instantiated() == 0);
}

TEST_CASE("patch pool edits and minting read through") {
  Tiny t;
  PartialWorld w(t.m);
  Rng rng(7);
  WorldPatch p(w);
  Value a = p.mint_identifier(t.pub, rng);
  CHECK(p.mode(t.pub) == TypeMode::Identifier);
  CHECK(p.pool_size(t.pub) == 1);
  CHECK(w.pool_size(t.pub) == 0);
  CHECK(w.mode(t.pub) == TypeMode::Uncommitted);
  p.set(t.cited(), a);
  p.apply();
  CHECK(w.pool_size(t.pub) == 1);
  CHECK(*w.get(t.cited()) == a);

  // A second patch minting must not collide with the applied token.
  WorldPatch q(w);
  Value b = q.mint_identifier(t.pub, rng);
  CHECK(b != a);
  q.apply();
  CHECK(w.pool_size(t.pub) == 2);
}

TEST_CASE("patch view equals an eagerly updated mirror under random ops") {
  Tiny t;
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    PartialWorld base(t.m);
    PartialWorld mirror(t.m);
    // Seed some base state.
    base.set(t.num_pub(), Value::nat(3));
    mirror.set(t.num_pub(), Value::nat(3));
    WorldPatch p(base);

    auto rand_var = [&]() -> BasicVariable {
      switch (rng.below(4)) {
        case 0: return t.num_pub();
        case 1: return t.cited();
        case 2: return t.observed();
        default: return t.hot_of(Value::numbered(t.pub, 1 + int64_t(rng.below(3))));
      }
    };
    auto rand_val = [&](const BasicVariable& v) -> Value {
      if (v == t.num_pub()) return Value::nat(1 + int64_t(rng.below(3)));
      if (v == t.cited()) return Value::numbered(t.pub, 1 + int64_t(rng.below(3)));
      return Value::boolean(rng.below(2) == 0);
    };

    for (int op = 0; op < 600; ++op) {
      BasicVariable v = rand_var();
      if (rng.below(3) == 0) {
        p.remove(v);
        mirror.erase(v);
      } else {
        Value val = rand_val(v);
        p.set(v, val);
        mirror.set(v, val);
      }
      if (op % 97 == 0) CHECK(p.debug_string() == mirror.debug_string());
      CHECK(p.num_instantiated() == mirror.num_instantiated());
    }
    CHECK(p.debug_string() == mirror.debug_string());
    p.apply();
    CHECK(base.debug_string() == mirror.debug_string());
  }
}

TEST_CASE("apply cost tracks the change set, not the world size") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.num_pub(), Value::nat(1000));
  for (int i = 1; i <= 1000; ++i)
    w.set(t.hot_of(Value::numbered(t.pub, i)), Value::boolean(i % 2 == 0));

  WorldPatch p(w);
  p.set(t.hot_of(Value::numbered(t.pub, 5)), Value::boolean(true));
  p.remove(t.hot_of(Value::numbered(t.pub, 6)));
  p.set(t.cited(), Value::numbered(t.pub, 9));

  uint64_t before = w.mutation_count();
  p.apply();
  uint64_t delta = w.mutation_count() - before;
  CHECK(delta <= 8);  // three changes plus bookkeeping; never ~1000
  CHECK(*w.get(t.hot_of(Value::numbered(t.pub, 5))) == Value::boolean(true));
  CHECK(!w.get(t.hot_of(Value::numbered(t.pub, 6))).has_value());
}
