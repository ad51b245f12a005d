#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relmh/model.hpp"
#include "relmh/rng.hpp"
#include "relmh/value.hpp"

namespace relmh {

// A distribution with all parameters evaluated to concrete values. Exposes a
// pointwise log mass, a forward sampler, and (where it exists) a finite
// support enumeration. Masses of values outside the support are -inf.
class DistInstance {
 public:
  DistKind kind = DistKind::PointMass;

  // PointMass
  Value point;

  // Categorical: normalized (value, probability) pairs in model order.
  std::vector<std::pair<Value, double>> categorical;

  // Bernoulli
  double p = 0.5;

  // UniformOverObjects: guaranteed objects plus numbered objects 1..n_count.
  TypeId obj_type = -1;
  std::vector<Value> guaranteed;  // guaranteed objects of the type
  int64_t n_count = 0;            // numbered objects (0 when type has no number statement)

  // UniformInt
  int64_t lo = 0, hi = 0;

  // Poisson / Geometric
  double lambda = 1.0;
  double geo_p = 0.5;

  // NoisyCopy: emits the source value with probability fidelity, its negation
  // otherwise. Source must be boolean.
  bool source = false;
  double fidelity = 1.0;

  // TokenStringModel. Without a source: token count ~ 1 + Geometric(len_p),
  // tokens i.i.d. uniform over the vocabulary. With a source: per-token
  // substitution noise at rate tok_eps (uniform replacement from the
  // vocabulary); token count is preserved.
  std::shared_ptr<std::vector<std::string>> vocab;
  double len_p = 0.5;
  double tok_eps = 0.05;
  std::optional<std::string> str_source;

  // StringConcatFormat: joins the non-empty component strings; each join
  // renders " <sep> " with probability 1 - sep_eps and a bare " " otherwise.
  std::string sep = ".";
  double sep_eps = 0.05;
  std::vector<std::string> components;

  double log_mass(const Value& v) const;
  Value sample(Rng& rng) const;

  // Values with positive mass, in canonical order, when finitely enumerable.
  // Poisson, Geometric, and sourceless TokenStringModel return nullopt.
  std::optional<std::vector<Value>> finite_support() const;

  // Object-count for UniformOverObjects (guaranteed + numbered).
  int64_t object_total() const { return static_cast<int64_t>(guaranteed.size()) + n_count; }

  static DistInstance point_mass(Value v);
};

// log(n! / (n-m)!) as a sum of logs of integers; -inf when m > n.
double log_falling_factorial(int64_t n, int64_t m);

// log(k!) by summation.
double log_factorial(int64_t k);

}  // namespace relmh
