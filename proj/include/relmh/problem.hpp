#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relmh/model.hpp"
#include "relmh/value.hpp"

namespace relmh {

// Observed variable/value pairs, in file order.
struct EvidenceSet {
  std::vector<std::pair<BasicVariable, Value>> items;

  std::optional<Value> find(const BasicVariable& var) const {
    for (const auto& [v, val] : items)
      if (v == var) return val;
    return std::nullopt;
  }
};

// A named boolean ground term whose posterior probability is estimated.
struct Query {
  std::string name;
  Term term;
};

// Finite enumeration limits for exact inference: caps on number variables and
// explicit value domains for functions whose distributions have infinite
// support.
struct WorldBounds {
  std::map<TypeId, int64_t> number_bound;
  std::map<FuncId, std::vector<Value>> domain;
};

}  // namespace relmh
