#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "relmh/citation_text.hpp"
#include "relmh/engine.hpp"
#include "relmh/eval.hpp"
#include "relmh/parser.hpp"
#include "relmh/proposer_split_merge.hpp"
#include "relmh/world_ops.hpp"
#include "test_util.hpp"

using namespace relmh;
using relmh::testutil::load_model;
using relmh::testutil::models_dir;
using relmh::testutil::read_file;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Title-only fixture over the six-citation benchmark model, restricted to a
// chosen prefix of the guaranteed citations so states stay hand-enumerable.
struct TitleOnly {
  Model m;
  TypeId pub;
  FuncId text_fn, title_fn, ref_fn;
  std::vector<Value> cites;
  std::vector<std::string> texts;
  InferenceProblem prob;

  explicit TitleOnly(std::vector<std::string> texts_in)
      : m(load_model("cite6.blog")), texts(std::move(texts_in)) {
    pub = *m.find_type("Pub");
    text_fn = *m.find_function("Text");
    title_fn = *m.find_function("Title");
    ref_fn = *m.find_function("PubCited");
    prob.model = &m;
    for (size_t i = 0; i < texts.size(); ++i) {
      Value c = *m.find_guaranteed("C" + std::to_string(i + 1));
      cites.push_back(c);
      prob.evidence.items.emplace_back(BasicVariable::app(text_fn, {c}), Value::str(texts[i]));
    }
  }

  BasicVariable ref(const Value& c) const { return BasicVariable::app(ref_fn, {c}); }
  BasicVariable title(const Value& p) const { return BasicVariable::app(title_fn, {p}); }
};

// Independent recomputation of the benchmark model's title prior:
// length L w.p. 0.5^L, tokens i.i.d. uniform over {alpha, beta}.
double cite6_title_prior(const std::string& title) {
  std::istringstream ss(title);
  std::string tok;
  int len = 0;
  while (ss >> tok) {
    if (tok != "alpha" && tok != "beta") return 0.0;
    ++len;
  }
  return len == 0 ? 0.0 : std::pow(0.25, len);
}

// Extraction-or-prior mixture for a title proposed from one donor text.
double title_mix(const std::string& donor_text, const std::string& title, double rho) {
  const double keep = donor_text == title ? 1.0 - rho : 0.0;
  return keep + rho * cite6_title_prior(title);
}

size_t canopy_index_of(const SplitMergeProposer& sp, const Value& c) {
  for (size_t i = 0; i < sp.canopies().size(); ++i)
    for (const Value& v : sp.canopies()[i].members)
      if (v == c) return i;
  REQUIRE(false);
  return 0;
}

// Ordered-pair choice mass between two citation groups, both orders.
double pair_mass_of(const SplitMergeProposer& sp, const std::vector<Value>& s1,
                    const std::vector<Value>& s2) {
  size_t eligible = 0;
  for (const Canopy& cp : sp.canopies()) eligible += cp.members.size() >= 2;
  double s = 0.0;
  for (const Value& a : s1)
    for (const Value& b : s2) {
      const size_t ca = canopy_index_of(sp, a);
      if (ca != canopy_index_of(sp, b)) continue;
      const double g = static_cast<double>(sp.canopies()[ca].members.size());
      s += 1.0 / (static_cast<double>(eligible) * g * (g - 1.0));
    }
  return 2.0 * s;
}

std::vector<Value> refs_equal(const TitleOnly& f, const WorldView& w, const Value& p) {
  std::vector<Value> out;
  for (const Value& c : f.cites) {
    auto v = w.get(f.ref(c));
    if (v && *v == p) out.push_back(c);
  }
  return out;
}

double mean_title_mix(const TitleOnly& f, const std::vector<Value>& donors,
                      const std::string& title, double rho) {
  double s = 0.0;
  for (const Value& d : donors) {
    size_t idx = 0;
    while (f.cites[idx] != d) ++idx;
    s += title_mix(f.texts[idx], title, rho);
  }
  return s / static_cast<double>(donors.size());
}

}  // namespace

TEST_CASE("schema discovery finds the title-only citation roles") {
  TitleOnly f({"alpha beta", "alpha beta", "beta alpha"});
  SplitMergeProposer sp(f.prob);
  const CitationSchema& s = sp.schema();
  CHECK(s.ref_fn == *f.m.find_function("PubCited"));
  CHECK(s.text_fn == *f.m.find_function("Text"));
  CHECK(s.title_fn == *f.m.find_function("Title"));
  CHECK(s.pub_type == *f.m.find_type("Pub"));
  CHECK(s.cite_type == *f.m.find_type("Cit"));
  CHECK_FALSE(s.has_authors);
}

TEST_CASE("schema discovery finds the author machinery and separator") {
  std::string src = read_file(models_dir() + "/citations.blog");
  src += "\nguaranteed Cit K1, K2;\n";
  ParseResult pr = parse_model(src);
  REQUIRE(pr.ok());
  const Model& m = *pr.model;

  InferenceProblem prob;
  prob.model = &m;
  FuncId text_fn = *m.find_function("Text");
  prob.evidence.items.emplace_back(
      BasicVariable::app(text_fn, {*m.find_guaranteed("K1")}), Value::str("markov . chain"));
  prob.evidence.items.emplace_back(
      BasicVariable::app(text_fn, {*m.find_guaranteed("K2")}), Value::str("graph . logic"));

  CitationSchema s = CitationSchema::discover(m, prob.evidence);
  CHECK(s.has_authors);
  CHECK(s.ref_fn == *m.find_function("PubCited"));
  CHECK(s.title_fn == *m.find_function("Title"));
  CHECK(s.num_authors_fn == *m.find_function("NumAuthors"));
  CHECK(s.author_fn == *m.find_function("NthAuthor"));
  CHECK(s.name_fn == *m.find_function("Name"));
  CHECK(s.res_type == *m.find_type("Res"));
  CHECK(s.separator == ".");
}

TEST_CASE("schema discovery rejects a model with two title candidates") {
  ParseResult pr = parse_model(
      "type Pub;\n"
      "type Cit;\n"
      "guaranteed Cit C1, C2;\n"
      "#Pub ~ UniformInt(1, 2);\n"
      "random String Title(Pub p) ~ TokenStringModel(vocab=\"a b\", p=0.5);\n"
      "random String Subtitle(Pub p) ~ TokenStringModel(vocab=\"a b\", p=0.5);\n"
      "random Pub PubCited(Cit c) ~ Uniform(Pub p);\n"
      "random String Text(Cit c) ~ TokenStringModel(eps=0.1, vocab=\"a b\", p=0.5, "
      "Title(PubCited(c)));\n");
  REQUIRE(pr.ok());
  EvidenceSet ev;
  ev.items.emplace_back(
      BasicVariable::app(*pr.model->find_function("Text"), {*pr.model->find_guaranteed("C1")}),
      Value::str("a"));
  CHECK_THROWS_AS(CitationSchema::discover(*pr.model, ev), ContractViolation);
}

TEST_CASE("canopies come from the evidence texts and cover every citation") {
  TitleOnly f({"alpha beta", "alpha beta", "beta alpha"});
  SplitMergeProposer sp(f.prob);
  REQUIRE(sp.canopies().size() == 1);
  CHECK(sp.canopies()[0].members.size() == 3);
}

TEST_CASE("token-disjoint canopies make every proposal a no-op") {
  ParseResult pr = parse_model(
      "type Pub;\n"
      "type Cit;\n"
      "guaranteed Cit C1, C2;\n"
      "#Pub ~ UniformInt(1, 2);\n"
      "random String Title(Pub p) ~ TokenStringModel(vocab=\"aa bb\", p=0.5);\n"
      "random Pub PubCited(Cit c) ~ Uniform(Pub p);\n"
      "random String Text(Cit c) ~ TokenStringModel(eps=0.1, vocab=\"aa bb\", p=0.5, "
      "Title(PubCited(c)));\n");
  REQUIRE(pr.ok());
  InferenceProblem prob;
  prob.model = &*pr.model;
  FuncId text_fn = *pr.model->find_function("Text");
  prob.evidence.items.emplace_back(
      BasicVariable::app(text_fn, {*pr.model->find_guaranteed("C1")}), Value::str("aa"));
  prob.evidence.items.emplace_back(
      BasicVariable::app(text_fn, {*pr.model->find_guaranteed("C2")}), Value::str("bb"));

  SplitMergeProposer sp(prob);
  REQUIRE(sp.canopies().size() == 2);

  PartialWorld w(*pr.model);
  Rng rng(7);
  sp.initial_state(w, rng);
  for (int i = 0; i < 20; ++i) {
    WorldPatch patch(w);
    CHECK(sp.propose(patch, rng) == 0.0);
    CHECK(patch.empty());
    CHECK_FALSE(sp.last_move().has_value());
  }
}

TEST_CASE("initial state pins evidence and is valid, minimal, and deterministic") {
  TitleOnly f({"alpha beta", "alpha beta", "beta alpha"});
  SplitMergeProposer sp(f.prob);

  // The publication count prior allows 3 here, so the start is singletons.
  PartialWorld w(f.m);
  Rng rng(11);
  sp.initial_state(w, rng);
  CHECK(w.get(BasicVariable::number(f.pub))->as_nat() == 3);
  CHECK(w.pool_size(f.pub) == 3);
  for (size_t i = 0; i < f.cites.size(); ++i) {
    REQUIRE(w.get(f.ref(f.cites[i])).has_value());
    CHECK(w.get(f.ref(f.cites[i]))->is_ident());
    CHECK(w.get(BasicVariable::app(f.text_fn, {f.cites[i]})) == Value::str(f.texts[i]));
  }
  VarSet pins = f.prob.pins(w);
  CHECK(is_self_supporting(w));
  CHECK(check_identifiers_grounded(w).all_grounded);
  CHECK(is_minimal_beyond(w, pins));
  CHECK(std::isfinite(log_prob_abstract(w)));

  PartialWorld w2(f.m);
  Rng rng2(11);
  sp.initial_state(w2, rng2);
  CHECK(w.debug_string() == w2.debug_string());

  // Six citations overflow the count prior, so everything starts together.
  TitleOnly f6({"alpha beta", "alpha beta", "alpha beta", "alpha beta", "beta alpha",
                "beta alpha"});
  SplitMergeProposer sp6(f6.prob);
  PartialWorld w6(f6.m);
  Rng rng6(11);
  sp6.initial_state(w6, rng6);
  CHECK(w6.get(BasicVariable::number(f6.pub))->as_nat() == 1);
  CHECK(w6.pool_size(f6.pub) == 1);
  CHECK(is_self_supporting(w6));
  CHECK(std::isfinite(log_prob_abstract(w6)));
}

// Every realized proposal's reported masses are checked against a from-first-
// principles path sum over (canopy, ordered pair, reassignment, donor,
// attribute) choices, while a hand-rolled chain drives through split and
// merge states.
TEST_CASE("reported proposal masses match an exhaustive path enumeration") {
  const double rho = 0.1;
  TitleOnly f({"alpha beta", "alpha beta", "beta alpha"});
  SplitMergeConfig cfg;
  cfg.rho = rho;
  SplitMergeProposer sp(f.prob, cfg);

  PartialWorld w(f.m);
  Rng init_rng(3);
  sp.initial_state(w, init_rng);
  VarSet pins = f.prob.pins(w);
  {
    WorldPatch p0(w);
    prune_to_minimal(p0, pins);
    p0.apply();
  }
  double lp = log_prob_abstract(w);

  Rng prop_rng(31);
  Rng acc_rng(32);
  int splits = 0, merges = 0;
  for (int step = 0; step < 400; ++step) {
    WorldPatch patch(w);
    const double ratio = sp.propose(patch, prop_rng);
    REQUIRE(sp.last_move().has_value());
    const SplitMergeMove& mv = *sp.last_move();
    CHECK(ratio == mv.log_q_back - mv.log_q_fwd);

    double fwd = 0.0, back = 0.0;
    if (mv.kind == SplitMergeMove::Kind::Split) {
      ++splits;
      const Value kept = Value::ident(f.pub, mv.pubs[0]);
      const Value minted = Value::ident(f.pub, mv.pubs[1]);
      const std::vector<Value> all = refs_equal(f, w, kept);
      const std::vector<Value> s1 = refs_equal(f, patch, kept);
      const std::vector<Value> s2 = refs_equal(f, patch, minted);
      REQUIRE(s1.size() + s2.size() == all.size());
      const std::string t1 = patch.get(f.title(kept))->as_str();
      const std::string t2 = patch.get(f.title(minted))->as_str();
      const std::string t_old = w.get(f.title(kept))->as_str();
      const double pair = pair_mass_of(sp, s1, s2);
      fwd = pair * std::pow(0.5, double(all.size() - 2)) * mean_title_mix(f, s1, t1, rho) *
            mean_title_mix(f, s2, t2, rho);
      back = pair * mean_title_mix(f, all, t_old, rho);
      CHECK(patch.get(BasicVariable::number(f.pub))->as_nat() ==
            w.get(BasicVariable::number(f.pub))->as_nat() + 1);
    } else {
      ++merges;
      const Value kept = Value::ident(f.pub, mv.pubs[0]);
      const Value gone = *w.get(f.ref(mv.c2));
      const std::vector<Value> s1 = refs_equal(f, w, kept);
      const std::vector<Value> s2 = refs_equal(f, w, gone);
      const std::vector<Value> all = refs_equal(f, patch, kept);
      REQUIRE(s1.size() + s2.size() == all.size());
      const std::string t_new = patch.get(f.title(kept))->as_str();
      const std::string t1_old = w.get(f.title(kept))->as_str();
      const std::string t2_old = w.get(f.title(gone))->as_str();
      const double pair = pair_mass_of(sp, s1, s2);
      fwd = pair * mean_title_mix(f, all, t_new, rho);
      back = pair * std::pow(0.5, double(all.size() - 2)) *
             mean_title_mix(f, s1, t1_old, rho) * mean_title_mix(f, s2, t2_old, rho);
      CHECK(patch.get(BasicVariable::number(f.pub))->as_nat() ==
            w.get(BasicVariable::number(f.pub))->as_nat() - 1);
    }
    CHECK(std::abs(mv.log_q_fwd - std::log(fwd)) < 1e-10);
    CHECK(std::abs(mv.log_q_back - std::log(back)) < 1e-10);

    const double cand = log_prob_abstract(patch);
    if (std::log(acc_rng.uniform()) < cand - lp + ratio) {
      patch.apply();
      lp = cand;
    } else {
      patch.discard();
    }
    if (step % 50 == 0) {
      CHECK(is_self_supporting(w));
      CHECK(check_identifiers_grounded(w).all_grounded);
      CHECK(is_minimal_beyond(w, pins));
      CHECK(w.pool_size(f.pub) == w.get(BasicVariable::number(f.pub))->as_nat());
      CHECK(std::abs(lp - log_prob_abstract(w)) < 1e-9);
    }
  }
  // The chain actually exercised both move kinds.
  CHECK(splits > 20);
  CHECK(merges > 20);
}

TEST_CASE("a split's reverse merge reports the mirrored masses") {
  TitleOnly f({"alpha beta", "alpha beta", "beta alpha"});
  SplitMergeProposer sp(f.prob);

  PartialWorld w(f.m);
  Rng init_rng(5);
  sp.initial_state(w, init_rng);
  VarSet pins = f.prob.pins(w);
  {
    WorldPatch p0(w);
    prune_to_minimal(p0, pins);
    p0.apply();
  }

  Rng rng(77);
  int round_trips = 0;
  for (int attempt = 0; attempt < 6000 && round_trips < 25; ++attempt) {
    WorldPatch patch(w);
    sp.propose(patch, rng);
    REQUIRE(sp.last_move().has_value());
    const bool was_split = sp.last_move()->kind == SplitMergeMove::Kind::Split;
    const double f1 = sp.last_move()->log_q_fwd;
    const double b1 = sp.last_move()->log_q_back;
    if (!std::isfinite(log_prob_abstract(patch))) {
      patch.discard();
      continue;
    }
    const std::string before = w.debug_string();
    const std::vector<std::string> pool_before = w.pool_tokens(f.pub);
    patch.apply();
    if (!was_split) continue;  // the walk still moves so splits keep coming

    // Hunt for the exact reverse move; verbatim re-proposals make it likely.
    // A miss leaves the walk in the split state, which is fine.
    for (int back_attempt = 0; back_attempt < 400; ++back_attempt) {
      WorldPatch rev(w);
      sp.propose(rev, rng);
      if (sp.last_move() && sp.last_move()->kind == SplitMergeMove::Kind::Merge &&
          rev.debug_string() == before && rev.pool_tokens(f.pub) == pool_before) {
        CHECK(std::abs(sp.last_move()->log_q_fwd - b1) < 1e-10);
        CHECK(std::abs(sp.last_move()->log_q_back - f1) < 1e-10);
        rev.apply();
        ++round_trips;
        break;
      }
      rev.discard();
    }
  }
  CHECK(round_trips >= 25);
}

TEST_CASE("the engine runs the proposer with nothing left for the sweep") {
  Model m = load_model("cite6.blog");
  InferenceProblem prob;
  prob.model = &m;
  EvidenceParseResult ev = parse_evidence(m, read_file(models_dir() + "/cite6.evidence"));
  REQUIRE(ev.ok());
  prob.evidence = ev.evidence;
  QueryParseResult qr = parse_queries(m, read_file(models_dir() + "/cite6.queries"));
  REQUIRE(qr.ok());
  prob.queries = qr.queries;

  SplitMergeProposer sp(prob);
  EngineOptions opt;
  opt.seed = 9;
  opt.burn_in = 300;
  opt.samples = 1500;
  opt.assert_mode = true;
  MhEngine eng(prob, sp, opt);
  ChainStats st = eng.run();

  CHECK(st.proposals == 1800);
  CHECK(st.accepted > 0);
  CHECK(eng.cleanup_removals() == 0);
  CHECK(eng.verify_child_graph());
  CHECK(std::isfinite(st.log_posterior_final));
  // Every effective move changes the publication count, so the only
  // non-number steps are no-op proposals that evaluate nothing.
  CHECK(st.other_steps.factor_evals == 0);
  CHECK(st.number_steps.proposals > 0);
  REQUIRE(st.query_means.size() == prob.queries.size());
  for (const auto& [name, mean] : st.query_means) {
    CHECK(mean >= 0.0);
    CHECK(mean <= 1.0);
  }
}

TEST_CASE("author attributes ride along through engine-driven splits and merges") {
  std::string src = read_file(models_dir() + "/citations.blog");
  src += "\nguaranteed Cit K1, K2, K3, K4;\n";
  ParseResult pr = parse_model(src);
  REQUIRE(pr.ok());
  const Model& m = *pr.model;

  InferenceProblem prob;
  prob.model = &m;
  EvidenceParseResult ev = parse_evidence(
      m,
      "Text(K1) = \"markov . chain inference\";\n"
      "Text(K2) = \"markov . chain inference\";\n"
      "Text(K3) = \"graph , logic . entity linkage\";\n"
      "Text(K4) = \"graph , logic . entity linkage\";\n");
  REQUIRE(ev.ok());
  prob.evidence = ev.evidence;
  QueryParseResult qr = parse_queries(
      m,
      "query q12 : PubCited(K1) == PubCited(K2);\n"
      "query q13 : PubCited(K1) == PubCited(K3);\n"
      "query q34 : PubCited(K3) == PubCited(K4);\n");
  REQUIRE(qr.ok());
  prob.queries = qr.queries;

  SplitMergeProposer sp(prob);
  REQUIRE(sp.schema().has_authors);
  REQUIRE(sp.canopies().size() == 2);

  EngineOptions opt;
  opt.seed = 21;
  opt.burn_in = 200;
  opt.samples = 800;
  opt.assert_mode = true;
  MhEngine eng(prob, sp, opt);
  ChainStats st = eng.run();

  CHECK(st.accepted > 0);
  CHECK(eng.cleanup_removals() == 0);
  CHECK(std::isfinite(st.log_posterior_final));
  const PartialWorld& w = eng.world();
  TypeId res = sp.schema().res_type;
  CHECK(w.pool_size(res) == w.get(BasicVariable::number(res))->as_nat());
  TypeId pub = sp.schema().pub_type;
  CHECK(w.pool_size(pub) == w.get(BasicVariable::number(pub))->as_nat());
}

TEST_CASE("full-schema proposal masses match an independent recomputation") {
  std::string src = read_file(models_dir() + "/citations.blog");
  src += "\nguaranteed Cit K1, K2, K3;\n";
  ParseResult pr = parse_model(src);
  REQUIRE(pr.ok());
  const Model& m = *pr.model;

  const std::vector<std::string> texts = {"markov . chain inference", "markov . chain inference",
                                          "graph , markov . chain inference"};
  InferenceProblem prob;
  prob.model = &m;
  FuncId text_fn = *m.find_function("Text");
  std::vector<Value> cites;
  for (size_t i = 0; i < texts.size(); ++i) {
    Value c = *m.find_guaranteed("K" + std::to_string(i + 1));
    cites.push_back(c);
    prob.evidence.items.emplace_back(BasicVariable::app(text_fn, {c}), Value::str(texts[i]));
  }

  const double rho = 0.1;
  SplitMergeConfig cfg;
  cfg.rho = rho;
  SplitMergeProposer sp(prob, cfg);
  REQUIRE(sp.canopies().size() == 1);

  // Independent attribute-mass recomputation: the shared vocabulary is pasted
  // from the model file, and string priors are length p(1-p)^(L-1) with
  // uniform tokens.
  const std::string vocab_words =
      "markov chain inference relational object identity model theory random graph "
      "logic network entity record linkage data stream split merge world state "
      "variable factor parser engine sampler proposal kernel cluster canopy citation "
      "title author name index token string prior bound query";
  std::set<std::string> vocab;
  {
    std::istringstream ss(vocab_words);
    std::string tok;
    while (ss >> tok) vocab.insert(tok);
  }
  REQUIRE(vocab.size() == 40);
  auto string_prior = [&](const std::string& s, double p) {
    std::istringstream ss(s);
    std::string tok;
    int len = 0;
    while (ss >> tok) {
      if (!vocab.count(tok)) return 0.0;
      ++len;
    }
    if (len == 0) return 0.0;
    return p / 40.0 * std::pow((1.0 - p) / 40.0, len - 1);
  };
  auto title_prior = [&](const std::string& s) { return string_prior(s, 0.35); };
  auto name_prior = [&](const std::string& s) { return string_prior(s, 0.6); };

  struct Attrs {
    std::string title;
    int64_t k = 0;
    std::vector<std::string> names;
  };
  auto attr_mass = [&](const std::string& donor, const Attrs& a) {
    SegmentedCitation seg = segment_citation(donor, ".");
    double mass;
    if (seg.ok)
      mass = (a.title == seg.title ? 1.0 - rho : 0.0) + rho * title_prior(a.title);
    else
      mass = title_prior(a.title);
    double km = (a.k >= 1 && a.k <= 3) ? 1.0 / 3.0 : 0.0;
    if (seg.ok)
      km = (a.k == static_cast<int64_t>(seg.authors.size()) ? 1.0 - rho : 0.0) + rho * km;
    mass *= km;
    for (int64_t i = 0; i < a.k; ++i) {
      double nm = name_prior(a.names[static_cast<size_t>(i)]);
      if (seg.ok && i < static_cast<int64_t>(seg.authors.size()))
        nm = (a.names[static_cast<size_t>(i)] == seg.authors[static_cast<size_t>(i)] ? 1.0 - rho
                                                                                     : 0.0) +
             rho * nm;
      mass *= nm;
    }
    return mass;
  };

  TypeId pub = sp.schema().pub_type;
  FuncId ref_fn = sp.schema().ref_fn;
  FuncId title_fn = sp.schema().title_fn;
  FuncId num_fn = sp.schema().num_authors_fn;
  FuncId auth_fn = sp.schema().author_fn;
  FuncId name_fn = sp.schema().name_fn;
  auto attrs_of = [&](const WorldView& view, const Value& p) {
    Attrs a;
    a.title = view.get(BasicVariable::app(title_fn, {p}))->as_str();
    a.k = view.get(BasicVariable::app(num_fn, {p}))->as_nat();
    for (int64_t i = 1; i <= a.k; ++i) {
      Value r = *view.get(BasicVariable::app(auth_fn, {p, Value::nat(i)}));
      a.names.push_back(view.get(BasicVariable::app(name_fn, {r}))->as_str());
    }
    return a;
  };
  auto members_of = [&](const WorldView& view, const Value& p) {
    std::vector<Value> out;
    for (const Value& c : cites) {
      auto v = view.get(BasicVariable::app(ref_fn, {c}));
      if (v && *v == p) out.push_back(c);
    }
    return out;
  };
  auto mean_mass = [&](const std::vector<Value>& donors, const Attrs& a) {
    double s = 0.0;
    for (const Value& d : donors) {
      size_t idx = 0;
      while (cites[idx] != d) ++idx;
      s += attr_mass(texts[idx], a);
    }
    return s / static_cast<double>(donors.size());
  };

  PartialWorld w(m);
  Rng init_rng(2);
  sp.initial_state(w, init_rng);
  VarSet pins = prob.pins(w);
  {
    WorldPatch p0(w);
    prune_to_minimal(p0, pins);
    p0.apply();
  }
  double lp = log_prob_abstract(w);

  Rng prop_rng(41);
  Rng acc_rng(42);
  int checked_splits = 0, checked_merges = 0;
  for (int step = 0; step < 500; ++step) {
    WorldPatch patch(w);
    const double ratio = sp.propose(patch, prop_rng);
    REQUIRE(sp.last_move().has_value());
    const SplitMergeMove& mv = *sp.last_move();

    double fwd = 0.0, back = 0.0;
    if (mv.kind == SplitMergeMove::Kind::Split) {
      const Value kept = Value::ident(pub, mv.pubs[0]);
      const Value minted = Value::ident(pub, mv.pubs[1]);
      const std::vector<Value> all = members_of(w, kept);
      const std::vector<Value> s1 = members_of(patch, kept);
      const std::vector<Value> s2 = members_of(patch, minted);
      const double pair = pair_mass_of(sp, s1, s2);
      fwd = pair * std::pow(0.5, double(all.size() - 2)) * mean_mass(s1, attrs_of(patch, kept)) *
            mean_mass(s2, attrs_of(patch, minted));
      back = pair * mean_mass(all, attrs_of(w, kept));
      ++checked_splits;
    } else {
      const Value kept = Value::ident(pub, mv.pubs[0]);
      const Value gone = *w.get(BasicVariable::app(ref_fn, {mv.c2}));
      const std::vector<Value> s1 = members_of(w, kept);
      const std::vector<Value> s2 = members_of(w, gone);
      const std::vector<Value> all = members_of(patch, kept);
      const double pair = pair_mass_of(sp, s1, s2);
      fwd = pair * mean_mass(all, attrs_of(patch, kept));
      back = pair * std::pow(0.5, double(all.size() - 2)) * mean_mass(s1, attrs_of(w, kept)) *
             mean_mass(s2, attrs_of(w, gone));
      ++checked_merges;
    }
    CHECK(std::abs(mv.log_q_fwd - std::log(fwd)) < 1e-10);
    CHECK(std::abs(mv.log_q_back - std::log(back)) < 1e-10);

    const double cand = log_prob_abstract(patch);
    if (std::log(acc_rng.uniform()) < cand - lp + ratio) {
      patch.apply();
      lp = cand;
    } else {
      patch.discard();
    }
  }
  CHECK(checked_splits > 50);
  CHECK(checked_merges > 50);
}

TEST_CASE("non-identifier publication references are rejected") {
  TitleOnly f({"alpha beta", "alpha beta"});
  SplitMergeProposer sp(f.prob);
  PartialWorld w(f.m);
  w.set(BasicVariable::number(f.pub), Value::nat(1));
  for (size_t i = 0; i < f.cites.size(); ++i) {
    w.set(BasicVariable::app(f.text_fn, {f.cites[i]}), Value::str(f.texts[i]));
    w.set(f.ref(f.cites[i]), Value::numbered(f.pub, 1));
  }
  w.set(f.title(Value::numbered(f.pub, 1)), Value::str("alpha beta"));
  Rng rng(1);
  WorldPatch patch(w);
  CHECK_THROWS_AS(sp.propose(patch, rng), ContractViolation);
}
