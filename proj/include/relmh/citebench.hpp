#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relmh/engine.hpp"
#include "relmh/model.hpp"
#include "relmh/problem.hpp"

namespace relmh {

// One labeled citation: an opaque id, the gold cluster label, and the
// citation text the model observes.
struct CitationRecord {
  std::string id;
  std::string gold;
  std::string text;
};

struct CitationDataset {
  std::vector<CitationRecord> records;

  // Gold clusters as sorted id lists, ordered by smallest member. The labels
  // themselves are dropped; only the partition matters.
  std::vector<std::vector<std::string>> gold_partition() const;
};

// Parses `id<TAB>gold<TAB>text` lines. CRLF files parse identically to LF.
// Throws ContractViolation, naming the line number, for malformed rows,
// duplicate ids, and empty text.
CitationDataset parse_dataset(const std::string& content);

// parse_dataset over a file's bytes; the path appears in error messages.
CitationDataset load_dataset(const std::string& path);

// Fraction of gold clusters that appear verbatim, as sets, among the
// predicted clusters. Invariant to cluster order and id order within
// clusters. Throws ContractViolation unless both partitions cover the same
// ids exactly once each.
double cluster_accuracy(const std::vector<std::vector<std::string>>& predicted,
                        const std::vector<std::vector<std::string>>& gold);

// The structural roles dataset wiring needs from a citation model: the
// citation type, the observed text function over it, and the publication
// reference whose value is the cluster identity. Found by shape, not name:
// the text function is the unique string function whose distribution
// corrupts a derived source string, and the reference is the unique map
// from citations into an open object type.
struct CitationRoles {
  TypeId cite_type = -1;
  FuncId text_fn = -1;
  FuncId ref_fn = -1;
};

// Throws ContractViolation when a role is missing or ambiguous.
CitationRoles discover_citation_roles(const Model& m);

// Returns `source` with a `guaranteed <CiteType> c1, ..., cn;` line appended
// when the model declares no citation objects. A source already declaring at
// least n is returned unchanged; declaring some but fewer than n is an error.
std::string with_guaranteed_citations(const std::string& source, int64_t n);

// Forward-samples one complete world and emits a record per guaranteed
// citation: id = the citation's symbol, gold = the sampled publication
// reference, text = the sampled observed string. Deterministic per seed.
// The model must declare at least n_citations guaranteed citations.
CitationDataset generate_synthetic(const Model& m, int64_t n_citations, uint64_t seed);

struct BenchConfig {
  std::string proposer = "splitmerge";  // "splitmerge" or "generic"
  int64_t samples = 10000;
  int64_t burn_in = 0;
  uint64_t seed = 0;
  int64_t chains = 1;
  double theta = 0.25;
  double rho = 0.1;
  bool assert_mode = false;
  // Echoed into the report so a run is reproducible from its output alone.
  std::string model_label;
  std::string dataset_label;
};

struct ChainReport {
  ChainStats stats;
  // Clusters are sorted id lists, ordered by smallest member. `final` reads
  // the last state; `majority` links the pairs that co-referred in more than
  // half of the samples.
  std::vector<std::vector<std::string>> final_clusters;
  std::vector<std::vector<std::string>> majority_clusters;
  std::optional<double> accuracy_final;
  std::optional<double> accuracy_avg;
};

struct RunReport {
  int report_version = 1;
  BenchConfig config;
  std::vector<ChainReport> chains;
  std::vector<std::pair<std::string, double>> pooled_query_means;
  double pooled_acceptance_rate = 0.0;
  std::optional<double> pooled_accuracy_final;
  std::optional<double> pooled_accuracy_avg;

  // Stable key order and deterministic numerics: reruns with the same seed
  // and flags differ only in the *_ms timing fields.
  std::string to_json() const;
};

// Pins record k's text onto the k-th guaranteed citation as evidence, runs
// `cfg.chains` independently seeded chains concurrently (chain c uses seed
// cfg.seed + c), and scores each chain's sampled clusterings against the
// gold partition. Queries, if any, are estimated alongside.
RunReport run_citebench(const Model& m, const CitationDataset& data, const BenchConfig& cfg,
                        std::vector<Query> queries = {});

// Plain inference over explicit evidence: same chain orchestration, no
// clustering metrics.
RunReport run_infer(const Model& m, const EvidenceSet& evidence, std::vector<Query> queries,
                    const BenchConfig& cfg);

}  // namespace relmh
