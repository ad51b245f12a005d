#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace relmh {

// Word tokens of a citation string: lowercased, with every non-alphanumeric
// character treated as whitespace.
std::vector<std::string> citation_tokens(const std::string& text);

// Token-set Jaccard similarity. Two empty token sets count as disjoint, so
// blank citations end up isolated rather than all alike.
double token_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Groups citations by cheap text similarity, two-threshold style: pairs with
// Jaccard >= theta are linked; each connected component of the relaxed graph
// (Jaccard >= theta/2) contributes one group holding the members that have at
// least one linked partner inside it. Every other citation gets a singleton
// group, so each index appears in exactly one group and groups with >= 2
// members are the ones worth proposing moves in.
std::vector<std::vector<size_t>> canopy_groups(const std::vector<std::string>& texts,
                                               double theta = 0.25);

// A citation string split at the format separator: everything before the
// first occurrence is the author list (comma-separated names), everything
// after it is the title. `ok` is false when the separator is missing or
// either side is blank, in which case callers fall back to prior sampling.
struct SegmentedCitation {
  bool ok = false;
  std::vector<std::string> authors;
  std::string title;
};

SegmentedCitation segment_citation(const std::string& text, const std::string& separator);

}  // namespace relmh
