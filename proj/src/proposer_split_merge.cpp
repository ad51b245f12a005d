#include "relmh/proposer_split_merge.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <set>

#include "relmh/citation_text.hpp"
#include "relmh/eval.hpp"

namespace relmh {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string trimmed(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void collect_funcs(const Term& t, std::set<FuncId>& out) {
  if (t.kind == Term::Kind::Apply) out.insert(t.func);
  for (const Term& a : t.args) collect_funcs(a, out);
}

bool term_mentions(const Term& t, FuncId f) {
  if (t.kind == Term::Kind::Apply && t.func == f) return true;
  for (const Term& a : t.args)
    if (term_mentions(a, f)) return true;
  return false;
}

// The function's whole dependency, when it is one unconditional distribution.
const DistSpec* sole_dist(const Model& m, FuncId f) {
  const DependencyStatement& dep = m.dependency_of(f);
  if (dep.clauses.size() != 1) return nullptr;
  const Clause& c = dep.clauses.front();
  if (c.guard || c.body != Clause::Body::Dist) return nullptr;
  return &c.dist;
}

bool sourceless_token_prior(const Model& m, FuncId f) {
  const DistSpec* d = sole_dist(m, f);
  return d && d->kind == DistKind::TokenStringModel && d->args.empty();
}

}  // namespace

CitationSchema CitationSchema::discover(const Model& m, const EvidenceSet& evidence) {
  CitationSchema s;
  const FuncId nfuncs = static_cast<FuncId>(m.functions().size());

  // Reference: guaranteed-object argument type to open-ended return type.
  for (FuncId f = 0; f < nfuncs; ++f) {
    const FunctionSymbol& fn = m.function(f);
    if (fn.arg_types.size() != 1) continue;
    const TypeId a = fn.arg_types[0], r = fn.return_type;
    if (m.type(a).is_builtin() || m.type(r).is_builtin()) continue;
    if (m.guaranteed_count(a) == 0 || m.type(r).number_statement < 0) continue;
    if (s.ref_fn >= 0)
      throw ContractViolation("split-merge: ambiguous citation reference: " +
                              m.function(s.ref_fn).name + " vs " + fn.name);
    s.ref_fn = f;
    s.cite_type = a;
    s.pub_type = r;
  }
  if (s.ref_fn < 0)
    throw ContractViolation(
        "split-merge: no reference from a guaranteed-object type to an open-ended type");

  // Observed text: the String function over citations pinned by the evidence.
  for (const auto& [var, val] : evidence.items) {
    if (var.is_number()) continue;
    const FunctionSymbol& fn = m.function(var.func);
    if (fn.return_type != m.string_type()) continue;
    if (fn.arg_types.size() != 1 || fn.arg_types[0] != s.cite_type) continue;
    if (s.text_fn >= 0 && s.text_fn != var.func)
      throw ContractViolation("split-merge: evidence observes two citation text functions");
    s.text_fn = var.func;
  }
  if (s.text_fn < 0) throw ContractViolation("split-merge: evidence observes no citation text");

  // Title: String over publications drawn from a sourceless token prior.
  for (FuncId f = 0; f < nfuncs; ++f) {
    const FunctionSymbol& fn = m.function(f);
    if (fn.return_type != m.string_type()) continue;
    if (fn.arg_types != std::vector<TypeId>{s.pub_type}) continue;
    if (!sourceless_token_prior(m, f)) continue;
    if (s.title_fn >= 0)
      throw ContractViolation("split-merge: ambiguous title function: " +
                              m.function(s.title_fn).name + " vs " + fn.name);
    s.title_fn = f;
  }
  if (s.title_fn < 0)
    throw ContractViolation("split-merge: no publication title with a token-string prior");

  // Author machinery hangs off the slot function (publication, index) ->
  // open-ended type; its guard names the count function.
  for (FuncId f = 0; f < nfuncs; ++f) {
    const FunctionSymbol& fn = m.function(f);
    if (fn.arg_types.size() != 2) continue;
    if (fn.arg_types[0] != s.pub_type || fn.arg_types[1] != m.natural_type()) continue;
    if (m.type(fn.return_type).is_builtin() || fn.return_type == s.pub_type) continue;
    if (m.type(fn.return_type).number_statement < 0) continue;
    if (s.author_fn >= 0)
      throw ContractViolation("split-merge: ambiguous author slot function: " +
                              m.function(s.author_fn).name + " vs " + fn.name);
    s.author_fn = f;
    s.res_type = fn.return_type;
  }
  if (s.author_fn >= 0) {
    std::set<FuncId> guard_funcs;
    for (const Clause& c : m.dependency_of(s.author_fn).clauses)
      if (c.guard) collect_funcs(*c.guard, guard_funcs);
    for (FuncId f : guard_funcs) {
      const FunctionSymbol& fn = m.function(f);
      if (fn.return_type != m.natural_type()) continue;
      if (fn.arg_types != std::vector<TypeId>{s.pub_type}) continue;
      if (s.num_authors_fn >= 0)
        throw ContractViolation("split-merge: ambiguous author count function");
      s.num_authors_fn = f;
    }
    if (s.num_authors_fn < 0)
      throw ContractViolation("split-merge: author slots lack a count guard");
    for (FuncId f = 0; f < nfuncs; ++f) {
      const FunctionSymbol& fn = m.function(f);
      if (fn.return_type != m.string_type()) continue;
      if (fn.arg_types != std::vector<TypeId>{s.res_type}) continue;
      if (!sourceless_token_prior(m, f)) continue;
      if (s.name_fn >= 0) throw ContractViolation("split-merge: ambiguous author name function");
      s.name_fn = f;
    }
    if (s.name_fn < 0)
      throw ContractViolation("split-merge: authors lack a name with a token-string prior");
    s.has_authors = true;
    // Separator between the author list and the title, read off the format
    // that embeds the title. A wrong guess only degrades extraction to prior
    // fallbacks, so absence is not an error.
    for (const DependencyStatement& dep : m.dependencies()) {
      for (const Clause& c : dep.clauses) {
        if (c.body != Clause::Body::Dist) continue;
        if (c.dist.kind != DistKind::StringConcatFormat) continue;
        bool reads_title = false;
        for (const Term& t : c.dist.args) reads_title = reads_title || term_mentions(t, s.title_fn);
        if (!reads_title) continue;
        auto it = c.dist.config.find("sep");
        if (it != c.dist.config.end()) s.separator = it->second.as_str();
      }
    }
  }
  return s;
}

SplitMergeProposer::SplitMergeProposer(const InferenceProblem& problem, SplitMergeConfig cfg)
    : problem_(&problem),
      cfg_(cfg),
      schema_(CitationSchema::discover(*problem.model, problem.evidence)) {
  for (const auto& [var, val] : problem.evidence.items) {
    if (var.is_number() || var.func != schema_.text_fn) continue;
    if (!val.is_str()) throw ContractViolation("split-merge: citation text evidence must be a string");
    if (!text_of_.emplace(var.args[0], val.as_str()).second)
      throw ContractViolation("split-merge: duplicate text evidence for one citation");
    citations_.push_back(var.args[0]);
  }
  std::sort(citations_.begin(), citations_.end());

  std::vector<std::string> texts;
  texts.reserve(citations_.size());
  for (const Value& c : citations_) texts.push_back(text_of_.at(c));
  for (const std::vector<size_t>& group : canopy_groups(texts, cfg_.theta)) {
    Canopy cp;
    for (size_t idx : group) {
      canopy_of_[citations_[idx]] = canopies_.size();
      cp.members.push_back(citations_[idx]);
    }
    if (cp.members.size() >= 2) eligible_.push_back(canopies_.size());
    canopies_.push_back(std::move(cp));
  }

  // Attribute priors have constant parameters, so one instantiation against a
  // throwaway world with placeholder identifiers serves every proposal.
  const Model& m = *problem.model;
  PartialWorld scratch(m);
  Rng scratch_rng(0);
  const Value p = scratch.mint_identifier(schema_.pub_type, scratch_rng);
  auto dt = evaluate_dependency(scratch, BasicVariable::app(schema_.title_fn, {p}));
  if (!dt.supported)
    throw ContractViolation("split-merge: title prior reads other state");
  title_prior_ = dt.dist;
  if (schema_.has_authors) {
    auto dk = evaluate_dependency(scratch, BasicVariable::app(schema_.num_authors_fn, {p}));
    if (!dk.supported)
      throw ContractViolation("split-merge: author count prior reads other state");
    num_authors_prior_ = dk.dist;
    const Value r = scratch.mint_identifier(schema_.res_type, scratch_rng);
    auto dn = evaluate_dependency(scratch, BasicVariable::app(schema_.name_fn, {r}));
    if (!dn.supported)
      throw ContractViolation("split-merge: author name prior reads other state");
    name_prior_ = dn.dist;
  }
}

SplitMergeProposer::Extraction SplitMergeProposer::extract(const std::string& text) const {
  Extraction e;
  if (!schema_.has_authors) {
    e.title = Value::str(trimmed(text));
    return e;
  }
  SegmentedCitation seg = segment_citation(text, schema_.separator);
  if (!seg.ok) return e;  // nothing usable; every field falls back to its prior
  e.title = Value::str(seg.title);
  e.num_authors = Value::nat(static_cast<int64_t>(seg.authors.size()));
  e.authors = seg.authors;
  return e;
}

double SplitMergeProposer::mix_log_mass(const DistInstance& prior,
                                        const std::optional<Value>& extracted,
                                        const Value& v) const {
  const double pm = std::exp(prior.log_mass(v));
  const double m = extracted ? (v == *extracted ? 1.0 - cfg_.rho : 0.0) + cfg_.rho * pm : pm;
  return m > 0 ? std::log(m) : kNegInf;
}

Value SplitMergeProposer::mix_draw(const DistInstance& prior,
                                   const std::optional<Value>& extracted, Rng& rng) const {
  if (!extracted || rng.bernoulli(cfg_.rho)) return prior.sample(rng);
  return *extracted;
}

SplitMergeProposer::AttrValues SplitMergeProposer::draw_attributes(const std::string& donor_text,
                                                                   Rng& rng) const {
  const Extraction e = extract(donor_text);
  AttrValues a;
  a.title = mix_draw(title_prior_, e.title, rng);
  if (schema_.has_authors) {
    a.num_authors = mix_draw(*num_authors_prior_, e.num_authors, rng).as_nat();
    for (int64_t i = 0; i < a.num_authors; ++i) {
      std::optional<Value> nm;
      if (i < static_cast<int64_t>(e.authors.size())) nm = Value::str(e.authors[i]);
      a.names.push_back(mix_draw(*name_prior_, nm, rng));
    }
  }
  return a;
}

double SplitMergeProposer::attr_log_mass(const std::string& donor_text,
                                         const AttrValues& target) const {
  const Extraction e = extract(donor_text);
  double lm = mix_log_mass(title_prior_, e.title, target.title);
  if (schema_.has_authors) {
    lm += mix_log_mass(*num_authors_prior_, e.num_authors, Value::nat(target.num_authors));
    for (int64_t i = 0; i < target.num_authors; ++i) {
      std::optional<Value> nm;
      if (i < static_cast<int64_t>(e.authors.size())) nm = Value::str(e.authors[i]);
      lm += mix_log_mass(*name_prior_, nm, target.names[i]);
    }
  }
  return lm;
}

double SplitMergeProposer::donor_sum_log(const std::vector<Value>& donors,
                                         const AttrValues& target) const {
  double s = 0.0;
  for (const Value& d : donors) {
    const double lm = attr_log_mass(text_of_.at(d), target);
    if (lm > kNegInf) s += std::exp(lm);
  }
  return s > 0 ? std::log(s / static_cast<double>(donors.size())) : kNegInf;
}

double SplitMergeProposer::pair_choice_log(const std::vector<Value>& s1,
                                           const std::vector<Value>& s2) const {
  double s = 0.0;
  for (const Value& a : s1) {
    const size_t ca = canopy_of_.at(a);
    for (const Value& b : s2) {
      if (canopy_of_.at(b) != ca) continue;
      const double g = static_cast<double>(canopies_[ca].members.size());
      s += 1.0 / (static_cast<double>(eligible_.size()) * g * (g - 1.0));
    }
  }
  // Publication identifiers are exchangeable, so the role-swapped pair lands
  // in the same state; both orders count.
  return s > 0 ? std::log(2.0 * s) : kNegInf;
}

std::vector<Value> SplitMergeProposer::cites_of(const WorldView& w, const Value& pub) const {
  std::vector<Value> out;
  for (const Value& c : citations_) {
    auto v = w.get(BasicVariable::app(schema_.ref_fn, {c}));
    if (v && *v == pub) out.push_back(c);
  }
  return out;
}

SplitMergeProposer::RemovedClosure SplitMergeProposer::remove_closure(WorldPatch& patch,
                                                                      const Value& pub) const {
  RemovedClosure out;
  std::vector<std::pair<BasicVariable, Value>> keyed;
  patch.for_each([&](const BasicVariable& var, const Value& val) {
    if (var.is_number()) return;
    for (const Value& a : var.args)
      if (a == pub) {
        keyed.emplace_back(var, val);
        return;
      }
  });
  std::sort(keyed.begin(), keyed.end());

  std::map<int64_t, Value> researcher_by_slot;
  std::vector<BasicVariable> derived;
  for (const auto& [var, val] : keyed) {
    if (var.func == schema_.title_fn) {
      out.old_attrs.title = val;
    } else if (schema_.has_authors && var.func == schema_.num_authors_fn) {
      out.old_attrs.num_authors = val.as_nat();
    } else if (schema_.has_authors && var.func == schema_.author_fn) {
      if (!val.is_ident())
        throw ContractViolation("split-merge: author slot holds a non-identifier");
      if (!researcher_by_slot.emplace(var.args[1].as_nat(), val).second)
        throw ContractViolation("split-merge: duplicate author slot");
      continue;
    } else if (var.func == schema_.ref_fn || var.func == schema_.text_fn) {
      throw ContractViolation("split-merge: publication used as a citation key");
    } else {
      derived.push_back(var);
    }
  }

  std::set<Value> researchers;
  for (const auto& [slot, r] : researcher_by_slot)
    if (!researchers.insert(r).second)
      throw ContractViolation("split-merge: one researcher fills two author slots");
  std::vector<std::pair<BasicVariable, Value>> res_keyed;
  if (!researchers.empty()) {
    patch.for_each([&](const BasicVariable& var, const Value& val) {
      if (var.is_number()) return;
      for (const Value& a : var.args)
        if (researchers.count(a)) {
          res_keyed.emplace_back(var, val);
          return;
        }
    });
    std::sort(res_keyed.begin(), res_keyed.end());
  }
  std::map<std::string, Value> name_of;
  for (const auto& [var, val] : res_keyed) {
    if (var.func == schema_.name_fn)
      name_of[var.args[0].ident_token()] = val;
    else
      derived.push_back(var);
  }
  std::sort(derived.begin(), derived.end());
  derived.erase(std::unique(derived.begin(), derived.end()), derived.end());

  // The reverse move re-derives everything here from its own dependency;
  // price that before teardown while the dependencies still evaluate.
  for (const BasicVariable& var : derived) out.reinstate_log_mass += var_log_factor(patch, var);

  for (const auto& [slot, r] : researcher_by_slot) {
    auto it = name_of.find(r.ident_token());
    if (it == name_of.end())
      throw ContractViolation("split-merge: author slot researcher has no name");
    out.old_attrs.names.push_back(it->second);
  }
  out.author_count = static_cast<int64_t>(researcher_by_slot.size());

  for (const auto& [var, val] : keyed) patch.remove(var);
  for (const auto& [var, val] : res_keyed) patch.remove(var);
  for (const Value& r : researchers) patch.drop_identifier(schema_.res_type, r.ident_token());
  return out;
}

std::vector<Value> SplitMergeProposer::apply_attributes(WorldPatch& patch, const Value& pub,
                                                        const AttrValues& a, Rng& rng) const {
  std::vector<Value> minted;
  patch.set(BasicVariable::app(schema_.title_fn, {pub}), a.title);
  if (schema_.has_authors) {
    patch.set(BasicVariable::app(schema_.num_authors_fn, {pub}), Value::nat(a.num_authors));
    for (int64_t i = 0; i < a.num_authors; ++i) {
      const Value r = patch.mint_identifier(schema_.res_type, rng);
      patch.set(BasicVariable::app(schema_.author_fn, {pub, Value::nat(i + 1)}), r);
      patch.set(BasicVariable::app(schema_.name_fn, {r}), a.names[i]);
      minted.push_back(r);
    }
  }
  return minted;
}

void SplitMergeProposer::record_attrs(SplitMergeMove& mv, const Value& pub, const AttrValues& a,
                                      const std::vector<Value>& minted) const {
  mv.attributes[BasicVariable::app(schema_.title_fn, {pub})] = a.title;
  if (schema_.has_authors) {
    mv.attributes[BasicVariable::app(schema_.num_authors_fn, {pub})] = Value::nat(a.num_authors);
    for (size_t i = 0; i < minted.size(); ++i) {
      mv.attributes[BasicVariable::app(
          schema_.author_fn, {pub, Value::nat(static_cast<int64_t>(i) + 1)})] = minted[i];
      mv.attributes[BasicVariable::app(schema_.name_fn, {minted[i]})] = a.names[i];
    }
  }
}

double SplitMergeProposer::derive_support(WorldPatch& patch, const std::vector<Value>& cites,
                                          Rng& rng) const {
  double mass = 0.0;
  std::function<void(const BasicVariable&)> need = [&](const BasicVariable& var) {
    DependencyResult dep;
    while (!(dep = evaluate_dependency(patch, var)).supported) need(dep.blocked());
    if (patch.get(var)) return;
    if (dep.dist.kind == DistKind::UniformOverObjects)
      throw ContractViolation("split-merge: derived support would sample an object role");
    const Value v = dep.dist.sample(rng);
    mass += dep.dist.log_mass(v);
    patch.set(var, v);
  };
  for (const Value& c : cites) need(BasicVariable::app(schema_.text_fn, {c}));
  for (const Query& q : problem_->queries) {
    TermResult r;
    while (!(r = evaluate_term(patch, q.term, {})).supported) need(r.blocked());
  }
  return mass;
}

void SplitMergeProposer::initial_state(PartialWorld& w, Rng& rng) {
  for (const auto& [var, val] : problem_->evidence.items) w.set(var, val);
  WorldPatch patch(w);

  auto count_dep = evaluate_dependency(patch, BasicVariable::number(schema_.pub_type));
  if (!count_dep.supported)
    throw ContractViolation("split-merge: publication count prior reads other state");
  const int64_t m_cites = static_cast<int64_t>(citations_.size());
  const bool singletons = count_dep.dist.log_mass(Value::nat(m_cites)) > kNegInf;
  if (!singletons && count_dep.dist.log_mass(Value::nat(1)) == kNegInf)
    throw ContractViolation(
        "split-merge: publication count prior rejects both 1 and the citation count");
  const int64_t k = singletons ? m_cites : 1;

  patch.set(BasicVariable::number(schema_.pub_type), Value::nat(k));
  std::vector<Value> pubs;
  for (int64_t i = 0; i < k; ++i) pubs.push_back(patch.mint_identifier(schema_.pub_type, rng));
  for (size_t i = 0; i < citations_.size(); ++i)
    patch.set(BasicVariable::app(schema_.ref_fn, {citations_[i]}), pubs[singletons ? i : 0]);

  int64_t researchers = 0;
  for (int64_t i = 0; i < k; ++i) {
    const Value& donor = citations_[singletons ? i : 0];
    // Attributes start at the donor's extraction verbatim: a prior draw of
    // the wrong token count would zero the text likelihood, and the chain
    // must not start at probability zero. The prior only fills gaps
    // (unsegmentable text, extracted values outside its own support).
    const Extraction e = extract(text_of_.at(donor));
    AttrValues a;
    a.title = e.title && title_prior_.log_mass(*e.title) > kNegInf ? *e.title
                                                                   : title_prior_.sample(rng);
    if (schema_.has_authors) {
      a.num_authors = e.num_authors && num_authors_prior_->log_mass(*e.num_authors) > kNegInf
                          ? e.num_authors->as_nat()
                          : num_authors_prior_->sample(rng).as_nat();
      for (int64_t slot = 0; slot < a.num_authors; ++slot) {
        std::optional<Value> nm;
        if (slot < static_cast<int64_t>(e.authors.size())) nm = Value::str(e.authors[slot]);
        a.names.push_back(nm && name_prior_->log_mass(*nm) > kNegInf ? *nm
                                                                     : name_prior_->sample(rng));
      }
      researchers += a.num_authors;
    }
    apply_attributes(patch, pubs[static_cast<size_t>(i)], a, rng);
  }
  if (schema_.has_authors)
    patch.set(BasicVariable::number(schema_.res_type), Value::nat(researchers));

  derive_support(patch, citations_, rng);
  patch.apply();
}

double SplitMergeProposer::propose(WorldPatch& patch, Rng& rng) {
  last_move_.reset();
  if (eligible_.empty()) return 0.0;

  // Uniform canopy draw with bounded retries; exhausting them is a no-op.
  // The success probability is fixed by the canopy structure, so it cancels
  // between the forward and reverse directions and the reported masses
  // condition on a usable draw.
  size_t ci = canopies_.size();
  for (int t = 0; t < cfg_.canopy_retries; ++t) {
    const size_t cand = rng.below(canopies_.size());
    if (canopies_[cand].members.size() >= 2) {
      ci = cand;
      break;
    }
  }
  if (ci == canopies_.size()) return 0.0;

  const Canopy& cp = canopies_[ci];
  const size_t g = cp.members.size();
  const size_t i = rng.below(g);
  size_t j = rng.below(g - 1);
  if (j >= i) ++j;
  const Value c1 = cp.members[i];
  const Value c2 = cp.members[j];

  const auto r1 = patch.get(BasicVariable::app(schema_.ref_fn, {c1}));
  const auto r2 = patch.get(BasicVariable::app(schema_.ref_fn, {c2}));
  if (!r1 || !r2)
    throw ContractViolation("split-merge: citation without a publication reference");
  if (!r1->is_ident() || !r2->is_ident())
    throw ContractViolation("split-merge: publication references must be identifiers");

  if (*r1 == *r2) return split_move(patch, rng, ci, c1, c2, *r1);
  return merge_move(patch, rng, ci, c1, c2, *r1, *r2);
}

double SplitMergeProposer::split_move(WorldPatch& patch, Rng& rng, size_t canopy_idx,
                                      const Value& c1, const Value& c2, const Value& pub) {
  const std::vector<Value> all = cites_of(patch, pub);
  const size_t n = all.size();  // >= 2: c1 and c2 both refer to pub
  const BasicVariable pub_count = BasicVariable::number(schema_.pub_type);
  const auto old_count = patch.get(pub_count);
  if (!old_count) throw ContractViolation("split-merge: publication count uninstantiated");

  // c1 anchors the kept publication, c2 the minted one; the rest flip coins.
  const Value p2 = patch.mint_identifier(schema_.pub_type, rng);
  std::vector<Value> s1, s2;
  for (const Value& c : all) {
    const bool stays = c == c1 || (c != c2 && rng.bernoulli(0.5));
    (stays ? s1 : s2).push_back(c);
    if (!stays) patch.set(BasicVariable::app(schema_.ref_fn, {c}), p2);
  }
  patch.set(pub_count, Value::nat(old_count->as_nat() + 1));

  const Value d1 = s1[rng.below(s1.size())];
  const Value d2 = s2[rng.below(s2.size())];
  const RemovedClosure old1 = remove_closure(patch, pub);
  const AttrValues a1 = draw_attributes(text_of_.at(d1), rng);
  const AttrValues a2 = draw_attributes(text_of_.at(d2), rng);
  const std::vector<Value> minted1 = apply_attributes(patch, pub, a1, rng);
  const std::vector<Value> minted2 = apply_attributes(patch, p2, a2, rng);
  if (schema_.has_authors) {
    const BasicVariable res_count = BasicVariable::number(schema_.res_type);
    const auto old_res = patch.get(res_count);
    if (!old_res) throw ContractViolation("split-merge: researcher count uninstantiated");
    patch.set(res_count, Value::nat(old_res->as_nat() - old1.author_count + a1.num_authors +
                                    a2.num_authors));
  }
  const double derive_mass = derive_support(patch, all, rng);

  const double pair_mass = pair_choice_log(s1, s2);
  const double log_q_fwd = pair_mass + static_cast<double>(n - 2) * std::log(0.5) +
                           donor_sum_log(s1, a1) + donor_sum_log(s2, a2) + derive_mass;
  const double log_q_back =
      pair_mass + donor_sum_log(all, old1.old_attrs) + old1.reinstate_log_mass;

  SplitMergeMove mv;
  mv.kind = SplitMergeMove::Kind::Split;
  mv.canopy = canopy_idx;
  mv.c1 = c1;
  mv.c2 = c2;
  mv.pubs = {pub.ident_token(), p2.ident_token()};
  record_attrs(mv, pub, a1, minted1);
  record_attrs(mv, p2, a2, minted2);
  mv.log_q_fwd = log_q_fwd;
  mv.log_q_back = log_q_back;
  last_move_ = std::move(mv);
  return log_q_back - log_q_fwd;
}

double SplitMergeProposer::merge_move(WorldPatch& patch, Rng& rng, size_t canopy_idx,
                                      const Value& c1, const Value& c2, const Value& p1,
                                      const Value& p2) {
  const std::vector<Value> s1 = cites_of(patch, p1);
  const std::vector<Value> s2 = cites_of(patch, p2);
  std::vector<Value> all;
  all.reserve(s1.size() + s2.size());
  std::merge(s1.begin(), s1.end(), s2.begin(), s2.end(), std::back_inserter(all));
  const size_t n = all.size();
  const BasicVariable pub_count = BasicVariable::number(schema_.pub_type);
  const auto old_count = patch.get(pub_count);
  if (!old_count) throw ContractViolation("split-merge: publication count uninstantiated");

  for (const Value& c : s2) patch.set(BasicVariable::app(schema_.ref_fn, {c}), p1);
  patch.set(pub_count, Value::nat(old_count->as_nat() - 1));

  const RemovedClosure old2 = remove_closure(patch, p2);
  const RemovedClosure old1 = remove_closure(patch, p1);
  patch.drop_identifier(schema_.pub_type, p2.ident_token());

  const Value d = all[rng.below(n)];
  const AttrValues a = draw_attributes(text_of_.at(d), rng);
  const std::vector<Value> minted = apply_attributes(patch, p1, a, rng);
  if (schema_.has_authors) {
    const BasicVariable res_count = BasicVariable::number(schema_.res_type);
    const auto old_res = patch.get(res_count);
    if (!old_res) throw ContractViolation("split-merge: researcher count uninstantiated");
    patch.set(res_count, Value::nat(old_res->as_nat() - old1.author_count - old2.author_count +
                                    a.num_authors));
  }
  const double derive_mass = derive_support(patch, all, rng);

  const double pair_mass = pair_choice_log(s1, s2);
  const double log_q_fwd = pair_mass + donor_sum_log(all, a) + derive_mass;
  const double log_q_back = pair_mass + static_cast<double>(n - 2) * std::log(0.5) +
                            donor_sum_log(s1, old1.old_attrs) +
                            donor_sum_log(s2, old2.old_attrs) + old1.reinstate_log_mass +
                            old2.reinstate_log_mass;

  SplitMergeMove mv;
  mv.kind = SplitMergeMove::Kind::Merge;
  mv.canopy = canopy_idx;
  mv.c1 = c1;
  mv.c2 = c2;
  mv.pubs = {p1.ident_token()};
  record_attrs(mv, p1, a, minted);
  mv.log_q_fwd = log_q_fwd;
  mv.log_q_back = log_q_back;
  last_move_ = std::move(mv);
  return log_q_back - log_q_fwd;
}

}  // namespace relmh
