#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hubopt/model.hpp"

// Declarative model language: lexer, recursive-descent parser, and
// resolver turning a source file into a validated ModelGraph. The grammar
// is documented in docs/grammar.md; diagnostics carry 1-based source
// positions and print as "path:line:col: severity: message".

namespace hubopt::dsl {

enum class TokKind : uint8_t { Keyword, Identifier, Number, String, Punct };

struct Token {
  TokKind kind = TokKind::Punct;
  std::string lexeme;
  int line = 1;
  int column = 1;
};

struct Diagnostic {
  enum class Severity : uint8_t { Error, Warning };
  Severity severity = Severity::Error;
  std::string message;
  int line = 1;
  int column = 1;
};

std::string format_diagnostic(const std::string& path, const Diagnostic& d);
bool has_errors(const std::vector<Diagnostic>& diags);

// Full tokenization; lexical problems are reported as positioned errors
// and the offending bytes skipped, so the result is always usable.
std::vector<Token> tokenize(const std::string& source,
                            std::vector<Diagnostic>& diags);

struct AstValue {
  enum class Kind : uint8_t { Number, Ref, None } kind = Kind::None;
  double number = 0.0;
  std::string ref; // identifier payload for Kind::Ref
  int line = 1, column = 1;
};

struct AstAssign {
  std::vector<std::string> path; // dotted name, e.g. {"phi", "power"}
  bool scale = false;            // true for the scenario *= operator
  AstValue value;
  int line = 1, column = 1;

  std::string dotted() const;
};

struct AstFlows {
  bool produces = false; // otherwise consumed
  std::vector<std::string> names;
  int line = 1, column = 1;
};

struct AstNode {
  std::string name;
  std::string kind; // template kind lexeme, validated at resolve time
  std::vector<AstFlows> flows;
  std::vector<AstAssign> assigns;
  int line = 1, column = 1;
};

struct AstMember {
  std::string node, var;
  int line = 1, column = 1;
};

struct AstEdge {
  std::string name;
  std::vector<AstMember> tail, head;
  std::vector<AstAssign> assigns;
  int line = 1, column = 1;
};

struct AstSeries {
  std::string name;
  std::string path;
  std::string column;
  size_t offset = 0; // rows skipped before reading T values
  int line = 1, column_pos = 1;
};

struct AstScenario {
  std::string name;
  std::vector<AstAssign> overrides;
  int line = 1, column = 1;
};

struct Ast {
  bool horizon_present = false;
  std::vector<AstAssign> horizon; // keys T, dt, years
  int horizon_line = 1, horizon_column = 1;
  std::optional<AstValue> wacc; // absent or "none" selects zero-financing
  std::vector<AstSeries> series;
  std::vector<AstNode> nodes;
  std::vector<AstEdge> edges;
  std::vector<AstScenario> scenarios;
};

// Builds the AST, reporting syntax errors with the expected token; on an
// error the parser resumes at the next top-level declaration so several
// problems surface in one pass.
Ast parse(const std::vector<Token>& tokens, std::vector<Diagnostic>& diags);

// Canonical source form: stable ordering (horizon, wacc, series, nodes,
// hyperedges, scenarios), two-space indent, shortest-round-trip numbers.
std::string pretty_print(const Ast& ast);

struct ResolveOptions {
  std::string scenario; // empty resolves the base model
};

// Loads imported series (paths relative to base_dir), applies the selected
// scenario's overrides, maps parameters onto the template library, builds
// every block, and validates the result. Errors land in `diags`; the
// returned graph is only meaningful when has_errors(diags) is false.
ModelGraph resolve(const Ast& ast, const std::string& base_dir,
                   std::vector<Diagnostic>& diags,
                   const ResolveOptions& opts = {});

// Convenience pipeline: read file, tokenize, parse, resolve.
ModelGraph load_model(const std::string& path, std::vector<Diagnostic>& diags,
                      const ResolveOptions& opts = {});

} // namespace hubopt::dsl
