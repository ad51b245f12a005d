#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relmh/model.hpp"
#include "relmh/problem.hpp"

namespace relmh {

struct ParseError {
  SourceSpan span;
  std::string message;

  std::string to_string() const {
    return "line " + std::to_string(span.line) + ":" + std::to_string(span.col) + ": " + message;
  }
};

struct ParseResult {
  std::optional<Model> model;
  std::vector<ParseError> errors;

  bool ok() const { return errors.empty() && model.has_value(); }
};

// Parses a model source. Recovers at statement boundaries, so several errors
// can be reported from one pass; `model` is only set when there are none.
ParseResult parse_model(const std::string& source);

// Renders a model back to source. parse_model(format_model(m)) is
// structurally equal to m.
std::string format_model(const Model& m);

struct TermParseResult {
  std::optional<Term> term;
  std::vector<ParseError> errors;
};

// Parses a ground term (no formal parameters in scope) against a model.
TermParseResult parse_ground_term(const Model& m, const std::string& text);

struct EvidenceParseResult {
  EvidenceSet evidence;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
};

// Lines of `F(args) = literal` or `#Type = nat`. Arguments must be guaranteed
// objects or literals.
EvidenceParseResult parse_evidence(const Model& m, const std::string& text);

struct QueryParseResult {
  std::vector<Query> queries;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
};

// Lines of `query <name> : <boolean ground term>`.
QueryParseResult parse_queries(const Model& m, const std::string& text);

struct BoundsParseResult {
  WorldBounds bounds;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
};

// Lines of `bound #Type <= nat` and `domain Func in {literal, ...}`.
BoundsParseResult parse_bounds(const Model& m, const std::string& text);

}  // namespace relmh
