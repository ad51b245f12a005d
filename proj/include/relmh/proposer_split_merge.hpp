#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relmh/distribution.hpp"
#include "relmh/engine.hpp"

namespace relmh {

struct SplitMergeConfig {
  // Canopy similarity threshold; pairs at or above it are linked.
  double theta = 0.25;
  // Per attribute field: probability of redrawing from the prior instead of
  // taking the value extracted from the donor citation's text.
  double rho = 0.1;
  // Canopy draws before a too-small canopy turns the proposal into a no-op.
  int canopy_retries = 8;
};

// The model roles the proposer manipulates, discovered structurally: the
// citation-to-publication reference, the observed text, the title prior, and
// (when present) the author machinery. Everything else keyed on a publication
// is treated as a derived rendering and resampled from its own dependency.
struct CitationSchema {
  TypeId cite_type = -1;
  TypeId pub_type = -1;
  FuncId ref_fn = -1;    // citation -> publication, publication type open-ended
  FuncId text_fn = -1;   // observed String over citations
  FuncId title_fn = -1;  // String over publications, sourceless token prior

  bool has_authors = false;
  FuncId num_authors_fn = -1;  // NaturalNum over publications
  FuncId author_fn = -1;       // (publication, index) -> researcher
  TypeId res_type = -1;        // open-ended researcher type
  FuncId name_fn = -1;         // String over researchers, sourceless token prior
  std::string separator = "."; // splits author list from title in citation text

  // Throws ContractViolation naming the missing role when the model does not
  // fit the citation shape.
  static CitationSchema discover(const Model& m, const EvidenceSet& evidence);
};

// Citations grouped by cheap text similarity; members are citation objects.
struct Canopy {
  std::vector<Value> members;
};

// One realized proposal, kept for inspection by tests and diagnostics.
struct SplitMergeMove {
  enum class Kind : uint8_t { Split, Merge };
  Kind kind = Kind::Split;
  size_t canopy = 0;  // index into canopies()
  Value c1, c2;       // ordered citation pair; c1's publication is kept
  // Affected publication tokens: {kept} for merges, {kept, minted} for splits.
  std::vector<std::string> pubs;
  // Proposed attribute values, keyed by the variables they land on.
  std::map<BasicVariable, Value> attributes;
  double log_q_fwd = 0.0;
  double log_q_back = 0.0;
};

// Citation-matching proposer: picks a canopy and an ordered citation pair
// (c1, c2); if both cite one publication, splits it (c1 stays, c2 moves to a
// freshly minted publication, the rest flip fair coins), otherwise merges
// c2's publication into c1's. Either way the publications' attributes are
// re-proposed from a uniformly chosen referring citation's text: each field
// is the extracted value with probability 1 - rho and a prior redraw with
// probability rho. The publication count moves with the move in the same
// patch, so states keep one publication identifier per cluster.
//
// States are equivalence classes under identifier renaming: the reported
// forward and backward masses sum every (pair, donor) path that lands in the
// proposed class, including the role-swapped pair choices.
class SplitMergeProposer : public Proposer {
 public:
  SplitMergeProposer(const InferenceProblem& problem, SplitMergeConfig cfg = {});

  const char* name() const override { return "split-merge"; }

  // One publication per citation when the count prior allows it, otherwise a
  // single publication holding every citation; attributes come from a donor
  // citation's text. Evidence values are pinned first.
  void initial_state(PartialWorld& w, Rng& rng) override;

  double propose(WorldPatch& patch, Rng& rng) override;

  const CitationSchema& schema() const { return schema_; }
  const std::vector<Canopy>& canopies() const { return canopies_; }
  // Empty when the last proposal was a no-op (no usable canopy).
  const std::optional<SplitMergeMove>& last_move() const { return last_move_; }

 private:
  // Proposed attribute values for one publication plus the total log mass of
  // realizing them from the given donor under the extraction-or-prior kernel.
  struct AttrValues {
    Value title;
    int64_t num_authors = 0;        // meaningful only with author machinery
    std::vector<Value> names;       // slot-ordered author names
  };
  // What a citation's text offers verbatim; empty optionals force prior draws.
  struct Extraction {
    std::optional<Value> title;
    std::optional<Value> num_authors;
    std::vector<std::string> authors;
  };
  // Result of tearing down a publication's attribute closure.
  struct RemovedClosure {
    AttrValues old_attrs;
    int64_t author_count = 0;
    // Proposal mass the reverse move pays to re-derive removed or overwritten
    // non-attribute variables (zero for deterministic rendering chains).
    double reinstate_log_mass = 0.0;
  };

  Extraction extract(const std::string& text) const;
  double mix_log_mass(const DistInstance& prior, const std::optional<Value>& extracted,
                      const Value& v) const;
  Value mix_draw(const DistInstance& prior, const std::optional<Value>& extracted,
                 Rng& rng) const;

  AttrValues draw_attributes(const std::string& donor_text, Rng& rng) const;
  // log mass of draw_attributes producing exactly `target` from `donor_text`.
  double attr_log_mass(const std::string& donor_text, const AttrValues& target) const;
  // Mean over donors of exp(attr_log_mass), in log space.
  double donor_sum_log(const std::vector<Value>& donors, const AttrValues& target) const;

  // Ordered-pair choice mass for reaching a state split as (S1, S2), summed
  // over both pair orders and every shared canopy.
  double pair_choice_log(const std::vector<Value>& s1, const std::vector<Value>& s2) const;

  std::vector<Value> cites_of(const WorldView& w, const Value& pub) const;
  RemovedClosure remove_closure(WorldPatch& patch, const Value& pub) const;
  // Returns the minted researcher identifiers, slot-ordered.
  std::vector<Value> apply_attributes(WorldPatch& patch, const Value& pub, const AttrValues& a,
                                      Rng& rng) const;
  void record_attrs(SplitMergeMove& mv, const Value& pub, const AttrValues& a,
                    const std::vector<Value>& minted) const;
  // Forward-samples any uninstantiated support of the citations' text
  // variables (the derived rendering chain); returns the draw mass.
  double derive_support(WorldPatch& patch, const std::vector<Value>& cites, Rng& rng) const;

  double split_move(WorldPatch& patch, Rng& rng, size_t canopy_idx, const Value& c1,
                    const Value& c2, const Value& pub);
  double merge_move(WorldPatch& patch, Rng& rng, size_t canopy_idx, const Value& c1,
                    const Value& c2, const Value& p1, const Value& p2);

  const InferenceProblem* problem_;
  SplitMergeConfig cfg_;
  CitationSchema schema_;

  std::vector<Value> citations_;               // sorted citation objects
  std::map<Value, std::string> text_of_;       // citation -> observed text
  std::vector<Canopy> canopies_;               // disjoint, cover all citations
  std::map<Value, size_t> canopy_of_;          // citation -> canopy index
  std::vector<size_t> eligible_;               // canopies with >= 2 members

  // Attribute priors, instantiated once; their parameters must be constants.
  DistInstance title_prior_;
  std::optional<DistInstance> num_authors_prior_;
  std::optional<DistInstance> name_prior_;

  std::optional<SplitMergeMove> last_move_;
};

}  // namespace relmh
