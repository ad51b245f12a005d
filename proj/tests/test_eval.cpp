#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "relmh/eval.hpp"
#include "relmh/parser.hpp"
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

const char* kGuards = R"(
type Pub;
guaranteed Pub P1;
random NaturalNum NumAuthors(Pub p) ~ UniformInt(1, 3);
random Boolean Big(Pub p)
  if (NumAuthors(p) >= 3) then = true
  else if (NumAuthors(p) == 2) then ~ Bernoulli(0.25)
  else = false;
random String Title(Pub p) ~ TokenStringModel(vocab="a b", p=0.5);
random Pub Ref(Pub p)
  if (NumAuthors(p) >= 2) then ~ Uniform(Pub q);
random String RefTitle(Pub p) = Title(Ref(p));
)";

}  // namespace

TEST_CASE("number variable dependencies come from the number statement") {
  Tiny t;
  PartialWorld w(t.m);
  DependencyResult r = evaluate_dependency(w, t.num_pub());
  REQUIRE(r.supported);
  CHECK(r.dist.kind == DistKind::Categorical);
  CHECK(r.active_parents.empty());
  CHECK(std::exp(r.dist.log_mass(Value::nat(1))) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("uniform over objects reads the number variable as a parent") {
  Tiny t;
  PartialWorld w(t.m);

  SUBCASE("blocked when the number variable is missing") {
    DependencyResult r = evaluate_dependency(w, t.cited());
    CHECK(!r.supported);
    CHECK(r.blocked() == t.num_pub());
  }

  SUBCASE("supported once the number variable exists") {
    w.set(t.num_pub(), Value::nat(2));
    DependencyResult r = evaluate_dependency(w, t.cited());
    REQUIRE(r.supported);
    CHECK(r.dist.kind == DistKind::UniformOverObjects);
    CHECK(r.dist.object_total() == 2);
    REQUIRE(r.active_parents.size() == 1);
    CHECK(r.active_parents[0] == t.num_pub());
  }
}

TEST_CASE("argument reads come before the blocked variable") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.num_pub(), Value::nat(1));

  SUBCASE("missing argument variable blocks first") {
    DependencyResult r = evaluate_dependency(w, t.observed());
    CHECK(!r.supported);
    CHECK(r.blocked() == t.cited());
  }

  SUBCASE("then the source variable blocks") {
    w.set(t.cited(), Value::numbered(t.pub, 1));
    DependencyResult r = evaluate_dependency(w, t.observed());
    CHECK(!r.supported);
    REQUIRE(r.active_parents.size() == 2);
    CHECK(r.active_parents[0] == t.cited());
    CHECK(r.blocked() == t.hot_of(Value::numbered(t.pub, 1)));
  }

  SUBCASE("fully supported with both parents active") {
    w.set(t.cited(), Value::numbered(t.pub, 1));
    w.set(t.hot_of(Value::numbered(t.pub, 1)), Value::boolean(true));
    DependencyResult r = evaluate_dependency(w, t.observed());
    REQUIRE(r.supported);
    CHECK(r.dist.kind == DistKind::NoisyCopy);
    CHECK(r.dist.source == true);
    CHECK(r.dist.fidelity == doctest::Approx(0.9));
    REQUIRE(r.active_parents.size() == 2);
    CHECK(r.active_parents[0] == t.cited());
    CHECK(r.active_parents[1] == t.hot_of(Value::numbered(t.pub, 1)));
  }
}

TEST_CASE("per-variable factors multiply to the world mass") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.num_pub(), Value::nat(1));
  w.set(t.cited(), Value::numbered(t.pub, 1));
  w.set(t.hot_of(Value::numbered(t.pub, 1)), Value::boolean(true));
  w.set(t.observed(), Value::boolean(true));

  double total = var_log_factor(w, t.num_pub()) + var_log_factor(w, t.cited()) +
                 var_log_factor(w, t.hot_of(Value::numbered(t.pub, 1))) +
                 var_log_factor(w, t.observed());
  // 0.5 (one pub) * 1.0 (only choice) * 0.7 (hot) * 0.9 (faithful copy)
  CHECK(total == doctest::Approx(std::log(0.315)).epsilon(1e-12));
}

TEST_CASE("guard chains pick the first true clause and record guard reads") {
  ParseResult pr = parse_model(kGuards);
  REQUIRE(pr.ok());
  const Model& m = *pr.model;
  Value p1 = *m.find_guaranteed("P1");
  TypeId pub = *m.find_type("Pub");
  BasicVariable numauth = BasicVariable::app(*m.find_function("NumAuthors"), {p1});
  BasicVariable big = BasicVariable::app(*m.find_function("Big"), {p1});

  PartialWorld w(m);

  SUBCASE("guards block until their reads exist") {
    DependencyResult r = evaluate_dependency(w, big);
    CHECK(!r.supported);
    CHECK(r.blocked() == numauth);
  }

  SUBCASE("first guard true: equality clause") {
    w.set(numauth, Value::nat(3));
    DependencyResult r = evaluate_dependency(w, big);
    REQUIRE(r.supported);
    CHECK(r.dist.kind == DistKind::PointMass);
    CHECK(r.dist.point == Value::boolean(true));
    REQUIRE(r.active_parents.size() == 1);
    CHECK(r.active_parents[0] == numauth);
  }

  SUBCASE("second guard true: distribution clause") {
    w.set(numauth, Value::nat(2));
    DependencyResult r = evaluate_dependency(w, big);
    REQUIRE(r.supported);
    CHECK(r.dist.kind == DistKind::Bernoulli);
    CHECK(r.dist.p == doctest::Approx(0.25));
    REQUIRE(r.active_parents.size() == 1);
    CHECK(r.active_parents[0] == numauth);
  }

  SUBCASE("trailing else") {
    w.set(numauth, Value::nat(1));
    DependencyResult r = evaluate_dependency(w, big);
    REQUIRE(r.supported);
    CHECK(r.dist.point == Value::boolean(false));
  }

  SUBCASE("no matching clause yields a point mass on null") {
    // Ref has a single guarded clause and no else.
    BasicVariable ref = BasicVariable::app(*m.find_function("Ref"), {p1});
    w.set(numauth, Value::nat(1));
    DependencyResult r = evaluate_dependency(w, ref);
    REQUIRE(r.supported);
    CHECK(r.dist.kind == DistKind::PointMass);
    CHECK(r.dist.point.is_null());
    REQUIRE(r.active_parents.size() == 1);
    CHECK(r.active_parents[0] == numauth);
  }
}

TEST_CASE("null arguments short-circuit applications without variable reads") {
  ParseResult pr = parse_model(kGuards);
  REQUIRE(pr.ok());
  const Model& m = *pr.model;
  Value p1 = *m.find_guaranteed("P1");
  BasicVariable numauth = BasicVariable::app(*m.find_function("NumAuthors"), {p1});
  BasicVariable ref = BasicVariable::app(*m.find_function("Ref"), {p1});
  BasicVariable reftitle = BasicVariable::app(*m.find_function("RefTitle"), {p1});

  PartialWorld w(m);
  w.set(numauth, Value::nat(1));
  w.set(ref, Value::null());

  // RefTitle = Title(Ref(p)); Ref(p) is null, so no Title variable is read
  // and the value clause collapses to null.
  DependencyResult r = evaluate_dependency(w, reftitle);
  REQUIRE(r.supported);
  CHECK(r.dist.kind == DistKind::PointMass);
  CHECK(r.dist.point.is_null());
  REQUIRE(r.active_parents.size() == 1);
  CHECK(r.active_parents[0] == ref);

  // The factor of a variable instantiated to null under that clause is 0.
  w.set(reftitle, Value::null());
  CHECK(var_log_factor(w, reftitle) == 0.0);
}

TEST_CASE("evaluate_term tracks reads and supports comparisons") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.num_pub(), Value::nat(2));
  w.set(t.cited(), Value::numbered(t.pub, 2));
  w.set(t.hot_of(Value::numbered(t.pub, 2)), Value::boolean(false));

  TermParseResult q = parse_ground_term(t.m, "Hot(PubCited(C1)) == false");
  REQUIRE(q.term.has_value());
  TermResult r = evaluate_term(w, *q.term, {});
  REQUIRE(r.supported);
  CHECK(r.value == Value::boolean(true));
  REQUIRE(r.reads.size() == 2);
  CHECK(r.reads[0] == t.cited());
  CHECK(r.reads[1] == t.hot_of(Value::numbered(t.pub, 2)));

  TermParseResult n = parse_ground_term(t.m, "#Pub");
  REQUIRE(n.term.has_value());
  CHECK(!n.term->args.size());
}

TEST_CASE("sampling follows the located distribution deterministically by seed") {
  Tiny t;
  PartialWorld w(t.m);
  w.set(t.num_pub(), Value::nat(2));
  Rng a(99), b(99);
  Value va = sample_dependency(w, t.cited(), a);
  Value vb = sample_dependency(w, t.cited(), b);
  CHECK(va == vb);
  CHECK(va.is_numbered());

  // Identifier-mode object sampling is the proposer's job, not the sampler's.
  PartialWorld wi(t.m);
  wi.set(t.num_pub(), Value::nat(2));
  wi.register_identifier(t.pub, "Pub@z");
  Rng c(1);
  CHECK_THROWS_AS(sample_dependency(wi, t.cited(), c), ContractViolation);
}
