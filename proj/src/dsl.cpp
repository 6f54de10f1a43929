#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hubopt/blocks.hpp"
#include "hubopt/dsl.hpp"
#include "hubopt/series.hpp"

namespace hubopt::dsl {

namespace {

const std::set<std::string, std::less<>> kKeywords = {
    "horizon", "node", "hyperedge", "scenario", "series", "none"};

bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::string fmt_number(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// from_chars does not admit a leading '+', the grammar does.
bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

} // namespace

std::string AstAssign::dotted() const {
  std::string out;
  for (size_t i = 0; i < path.size(); ++i) {
    if (i) out += '.';
    out += path[i];
  }
  return out;
}

std::string format_diagnostic(const std::string& path, const Diagnostic& d) {
  return path + ":" + std::to_string(d.line) + ":" + std::to_string(d.column) +
         ": " +
         (d.severity == Diagnostic::Severity::Error ? "error" : "warning") +
         ": " + d.message;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Diagnostic::Severity::Error;
  });
}

std::vector<Token> tokenize(const std::string& source,
                            std::vector<Diagnostic>& diags) {
  std::vector<Token> toks;
  int line = 1, col = 1;
  size_t i = 0;
  const size_t n = source.size();

  auto step = [&] {
    if (source[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  };
  auto error = [&](int l, int c, std::string msg) {
    diags.push_back({Diagnostic::Severity::Error, std::move(msg), l, c});
  };

  while (i < n) {
    char c = source[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      step();
      continue;
    }
    if (c == '#') {
      while (i < n && source[i] != '\n') step();
      continue;
    }
    int tl = line, tc = col;
    if (ident_start(c)) {
      size_t start = i;
      while (i < n && ident_char(source[i])) step();
      std::string word = source.substr(start, i - start);
      TokKind kind = kKeywords.count(word) ? TokKind::Keyword
                                           : TokKind::Identifier;
      toks.push_back({kind, std::move(word), tl, tc});
      continue;
    }
    bool sign_number = (c == '-' || c == '+') && i + 1 < n &&
                       (digit(source[i + 1]) ||
                        (source[i + 1] == '.' && i + 2 < n &&
                         digit(source[i + 2])));
    bool dot_number = c == '.' && i + 1 < n && digit(source[i + 1]);
    if (digit(c) || sign_number || dot_number) {
      size_t start = i;
      if (c == '-' || c == '+') step();
      while (i < n && digit(source[i])) step();
      if (i < n && source[i] == '.') {
        step();
        while (i < n && digit(source[i])) step();
      }
      if (i < n && (source[i] == 'e' || source[i] == 'E')) {
        size_t mark = i;
        int mark_line = line, mark_col = col;
        step();
        if (i < n && (source[i] == '+' || source[i] == '-')) step();
        if (i < n && digit(source[i])) {
          while (i < n && digit(source[i])) step();
        } else {
          // Not an exponent after all; rewind to before the 'e'.
          i = mark;
          line = mark_line;
          col = mark_col;
        }
      }
      std::string text = source.substr(start, i - start);
      double v = 0.0;
      if (!parse_double(text, v)) {
        error(tl, tc, "malformed number \"" + text + "\"");
        continue;
      }
      toks.push_back({TokKind::Number, std::move(text), tl, tc});
      continue;
    }
    if (c == '"') {
      step();
      size_t start = i;
      while (i < n && source[i] != '"' && source[i] != '\n') step();
      if (i >= n || source[i] != '"') {
        error(tl, tc, "unterminated string");
        continue;
      }
      std::string text = source.substr(start, i - start);
      step(); // closing quote
      toks.push_back({TokKind::String, std::move(text), tl, tc});
      continue;
    }
    if (c == '*') {
      if (i + 1 < n && source[i + 1] == '=') {
        step();
        step();
        toks.push_back({TokKind::Punct, "*=", tl, tc});
      } else {
        error(tl, tc, "stray '*' (only '*=' is allowed)");
        step();
      }
      continue;
    }
    if (c == '{' || c == '}' || c == ';' || c == ':' || c == ',' ||
        c == '.' || c == '=') {
      toks.push_back({TokKind::Punct, std::string(1, c), tl, tc});
      step();
      continue;
    }
    error(tl, tc, std::string("illegal character '") + c + "'");
    step();
  }
  return toks;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Recover {};

class Parser {
 public:
  Parser(const std::vector<Token>& toks, std::vector<Diagnostic>& diags)
      : toks_(toks), diags_(diags) {}

  Ast run() {
    while (pos_ < toks_.size()) {
      size_t entry = pos_;
      try {
        const Token& t = toks_[pos_];
        if (t.lexeme == "horizon") parse_horizon();
        else if (t.lexeme == "wacc") parse_wacc();
        else if (t.lexeme == "series") parse_series();
        else if (t.lexeme == "node") parse_node();
        else if (t.lexeme == "hyperedge") parse_edge();
        else if (t.lexeme == "scenario") parse_scenario();
        else {
          error(t, "expected a declaration (horizon, wacc, series, node, "
                   "hyperedge, or scenario), found \"" + t.lexeme + "\"");
          throw Recover{};
        }
      } catch (const Recover&) {
        sync_declaration(entry);
      }
    }
    return std::move(ast_);
  }

 private:
  static bool decl_start(const Token& t) {
    return t.lexeme == "horizon" || t.lexeme == "wacc" ||
           t.lexeme == "series" || t.lexeme == "node" ||
           t.lexeme == "hyperedge" || t.lexeme == "scenario";
  }

  void sync_declaration(size_t entry) {
    if (pos_ == entry && pos_ < toks_.size()) ++pos_;
    int depth = 0;
    while (pos_ < toks_.size()) {
      const Token& t = toks_[pos_];
      if (depth == 0 && decl_start(t)) return;
      if (t.lexeme == "{") ++depth;
      if (t.lexeme == "}" && depth > 0) --depth;
      ++pos_;
    }
  }

  [[noreturn]] void fail(const Token* at, const std::string& msg) {
    if (at) error(*at, msg);
    else at_eof(msg);
    throw Recover{};
  }
  void error(const Token& t, const std::string& msg) {
    diags_.push_back({Diagnostic::Severity::Error, msg, t.line, t.column});
  }
  void at_eof(const std::string& msg) {
    int line = 1, col = 1;
    if (!toks_.empty()) {
      line = toks_.back().line;
      col = toks_.back().column +
            static_cast<int>(toks_.back().lexeme.size());
    }
    diags_.push_back({Diagnostic::Severity::Error, msg + " at end of file",
                      line, col});
  }

  const Token* peek() const {
    return pos_ < toks_.size() ? &toks_[pos_] : nullptr;
  }
  const Token& take() {
    if (pos_ >= toks_.size()) fail(nullptr, "unexpected end of file");
    return toks_[pos_++];
  }
  bool at(const char* lexeme) const {
    const Token* t = peek();
    return t && t->lexeme == lexeme;
  }
  bool accept(const char* lexeme) {
    if (at(lexeme)) {
      ++pos_;
      return true;
    }
    return false;
  }
  const Token& expect(const char* lexeme, const char* context) {
    const Token* t = peek();
    if (!t)
      fail(nullptr, std::string("expected '") + lexeme + "' " + context);
    if (t->lexeme != lexeme)
      fail(t, std::string("expected '") + lexeme + "' " + context +
                  ", found \"" + t->lexeme + "\"");
    return toks_[pos_++];
  }
  const Token& expect_ident(const char* what) {
    const Token* t = peek();
    if (!t) fail(nullptr, std::string("expected ") + what);
    if (t->kind != TokKind::Identifier)
      fail(t, std::string("expected ") + what + ", found \"" + t->lexeme +
                  "\"");
    return toks_[pos_++];
  }
  const Token& expect_string(const char* what) {
    const Token* t = peek();
    if (!t) fail(nullptr, std::string("expected ") + what);
    if (t->kind != TokKind::String)
      fail(t, std::string("expected ") + what + " in double quotes, found \"" +
                  t->lexeme + "\"");
    return toks_[pos_++];
  }

  AstValue parse_value() {
    const Token* t = peek();
    if (!t) fail(nullptr, "expected a value");
    AstValue v;
    v.line = t->line;
    v.column = t->column;
    if (t->kind == TokKind::Number) {
      v.kind = AstValue::Kind::Number;
      parse_double(t->lexeme, v.number);
      ++pos_;
      return v;
    }
    if (t->lexeme == "none") {
      v.kind = AstValue::Kind::None;
      ++pos_;
      return v;
    }
    if (t->kind == TokKind::Identifier) {
      v.kind = AstValue::Kind::Ref;
      v.ref = t->lexeme;
      ++pos_;
      return v;
    }
    fail(t, "expected a number, name, or 'none', found \"" + t->lexeme + "\"");
  }

  std::vector<std::string> parse_path() {
    std::vector<std::string> path;
    path.push_back(expect_ident("a parameter name").lexeme);
    while (accept(".")) path.push_back(expect_ident("a name after '.'").lexeme);
    return path;
  }

  AstAssign parse_assignment(bool allow_scale) {
    const Token& head = *peek();
    AstAssign a;
    a.line = head.line;
    a.column = head.column;
    a.path = parse_path();
    if (allow_scale && accept("*=")) {
      a.scale = true;
    } else {
      expect("=", ("after \"" + a.dotted() + "\"").c_str());
    }
    a.value = parse_value();
    expect(";", "after the value");
    return a;
  }

  void open_block(const char* what) { expect("{", what); }
  bool block_end(const Token& opener, const char* what) {
    if (accept("}")) return true;
    if (!peek()) {
      error(opener, std::string("unterminated ") + what +
                        " block (missing '}')");
      throw Recover{};
    }
    return false;
  }

  void parse_horizon() {
    const Token& kw = take();
    bool duplicate = ast_.horizon_present;
    if (duplicate) error(kw, "duplicate horizon declaration");
    std::vector<AstAssign> items;
    open_block("after 'horizon'");
    const Token& opener = toks_[pos_ - 1];
    while (!block_end(opener, "horizon")) items.push_back(parse_assignment(false));
    if (!duplicate) {
      ast_.horizon_present = true;
      ast_.horizon = std::move(items);
      ast_.horizon_line = kw.line;
      ast_.horizon_column = kw.column;
    }
  }

  void parse_wacc() {
    const Token& kw = take();
    expect("=", "after 'wacc'");
    AstValue v = parse_value();
    expect(";", "after the value");
    if (ast_.wacc) {
      error(kw, "duplicate wacc setting");
      return;
    }
    ast_.wacc = v;
  }

  void parse_series() {
    const Token& kw = take();
    AstSeries s;
    s.line = kw.line;
    s.column_pos = kw.column;
    s.name = expect_ident("a series name").lexeme;
    if (!accept("from")) {
      const Token* t = peek();
      fail(t, std::string("expected 'from' after the series name") +
                  (t ? ", found \"" + t->lexeme + "\"" : ""));
    }
    s.path = expect_string("a file path").lexeme;
    if (!accept("column")) {
      const Token* t = peek();
      fail(t, std::string("expected 'column' after the file path") +
                  (t ? ", found \"" + t->lexeme + "\"" : ""));
    }
    s.column = expect_string("a column name").lexeme;
    if (accept("offset")) {
      const Token* t = peek();
      if (!t || t->kind != TokKind::Number)
        fail(t, "expected a row count after 'offset'");
      double v = 0.0;
      parse_double(t->lexeme, v);
      if (v < 0.0 || v != std::floor(v))
        fail(t, "offset must be a non-negative integer");
      s.offset = static_cast<size_t>(v);
      ++pos_;
    }
    expect(";", "after the series import");
    ast_.series.push_back(std::move(s));
  }

  void parse_node() {
    const Token& kw = take();
    AstNode node;
    node.line = kw.line;
    node.column = kw.column;
    node.name = expect_ident("a node name").lexeme;
    expect(":", "after the node name");
    const Token* kind = peek();
    if (!kind || (kind->kind != TokKind::Identifier &&
                  kind->kind != TokKind::Keyword))
      fail(kind, "expected a template kind after ':'");
    node.kind = kind->lexeme;
    ++pos_;
    open_block("after the template kind");
    const Token& opener = toks_[pos_ - 1];
    while (!block_end(opener, "node")) {
      if (at("consumes") || at("produces")) {
        const Token& head = take();
        AstFlows flows;
        flows.produces = head.lexeme == "produces";
        flows.line = head.line;
        flows.column = head.column;
        flows.names.push_back(expect_ident("a commodity name").lexeme);
        while (accept(","))
          flows.names.push_back(expect_ident("a commodity name").lexeme);
        expect(";", "after the commodity list");
        node.flows.push_back(std::move(flows));
      } else {
        node.assigns.push_back(parse_assignment(false));
      }
    }
    ast_.nodes.push_back(std::move(node));
  }

  void parse_edge() {
    const Token& kw = take();
    AstEdge edge;
    edge.line = kw.line;
    edge.column = kw.column;
    edge.name = expect_ident("a hyperedge name").lexeme;
    open_block("after the hyperedge name");
    const Token& opener = toks_[pos_ - 1];
    while (!block_end(opener, "hyperedge")) {
      if (at("tail") || at("head")) {
        const Token& head = take();
        bool is_tail = head.lexeme == "tail";
        expect("=", is_tail ? "after 'tail'" : "after 'head'");
        auto& list = is_tail ? edge.tail : edge.head;
        do {
          AstMember m;
          const Token& node = expect_ident("a member as node.variable");
          m.line = node.line;
          m.column = node.column;
          m.node = node.lexeme;
          expect(".", "between node and variable");
          m.var = expect_ident("a variable name").lexeme;
          list.push_back(std::move(m));
        } while (accept(","));
        expect(";", "after the member list");
      } else {
        edge.assigns.push_back(parse_assignment(false));
      }
    }
    ast_.edges.push_back(std::move(edge));
  }

  void parse_scenario() {
    const Token& kw = take();
    AstScenario sc;
    sc.line = kw.line;
    sc.column = kw.column;
    sc.name = expect_ident("a scenario name").lexeme;
    open_block("after the scenario name");
    const Token& opener = toks_[pos_ - 1];
    while (!block_end(opener, "scenario"))
      sc.overrides.push_back(parse_assignment(true));
    ast_.scenarios.push_back(std::move(sc));
  }

  const std::vector<Token>& toks_;
  std::vector<Diagnostic>& diags_;
  size_t pos_ = 0;
  Ast ast_;
};

} // namespace

Ast parse(const std::vector<Token>& tokens, std::vector<Diagnostic>& diags) {
  return Parser(tokens, diags).run();
}

// ---------------------------------------------------------------------------
// Pretty-printer

namespace {

std::string value_text(const AstValue& v) {
  switch (v.kind) {
    case AstValue::Kind::Number: return fmt_number(v.number);
    case AstValue::Kind::Ref: return v.ref;
    case AstValue::Kind::None: return "none";
  }
  return "none";
}

void print_assign(std::string& out, const AstAssign& a) {
  out += "  " + a.dotted() + (a.scale ? " *= " : " = ") +
         value_text(a.value) + ";\n";
}

} // namespace

std::string pretty_print(const Ast& ast) {
  std::string out;
  bool first = true;
  auto gap = [&] {
    if (!first) out += "\n";
    first = false;
  };
  if (ast.horizon_present) {
    gap();
    out += "horizon {\n";
    for (const auto& a : ast.horizon) print_assign(out, a);
    out += "}\n";
  }
  if (ast.wacc) {
    gap();
    out += "wacc = " + value_text(*ast.wacc) + ";\n";
  }
  if (!ast.series.empty()) gap();
  for (const auto& s : ast.series) {
    out += "series " + s.name + " from \"" + s.path + "\" column \"" +
           s.column + "\"";
    if (s.offset) out += " offset " + std::to_string(s.offset);
    out += ";\n";
  }
  for (const auto& n : ast.nodes) {
    gap();
    out += "node " + n.name + " : " + n.kind + " {\n";
    for (const auto& f : n.flows) {
      out += f.produces ? "  produces " : "  consumes ";
      for (size_t i = 0; i < f.names.size(); ++i) {
        if (i) out += ", ";
        out += f.names[i];
      }
      out += ";\n";
    }
    for (const auto& a : n.assigns) print_assign(out, a);
    out += "}\n";
  }
  for (const auto& e : ast.edges) {
    gap();
    out += "hyperedge " + e.name + " {\n";
    auto members = [&](const char* label, const std::vector<AstMember>& list) {
      if (list.empty()) return;
      out += std::string("  ") + label + " = ";
      for (size_t i = 0; i < list.size(); ++i) {
        if (i) out += ", ";
        out += list[i].node + "." + list[i].var;
      }
      out += ";\n";
    };
    members("tail", e.tail);
    members("head", e.head);
    for (const auto& a : e.assigns) print_assign(out, a);
    out += "}\n";
  }
  for (const auto& sc : ast.scenarios) {
    gap();
    out += "scenario " + sc.name + " {\n";
    for (const auto& a : sc.overrides) print_assign(out, a);
    out += "}\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resolver

namespace {

class Resolver {
 public:
  Resolver(const Ast& ast, std::string base_dir,
           std::vector<Diagnostic>& diags, const ResolveOptions& opts)
      : ast_(ast), base_dir_(std::move(base_dir)), diags_(diags),
        opts_(opts) {}

  ModelGraph run() {
    nodes_ = ast_.nodes;
    edges_ = ast_.edges;
    wacc_ = ast_.wacc;

    resolve_horizon();
    apply_scenario();
    if (horizon_.T <= 0) return {};
    load_imports();
    resolve_file_wacc();

    ModelGraph graph;
    graph.horizon = horizon_;
    std::set<std::string> node_names;
    for (const AstNode& n : nodes_) {
      if (!node_names.insert(n.name).second) {
        error(n.line, n.column, "duplicate node name '" + n.name + "'");
        continue;
      }
      if (n.kind == "conversion") build_conversion(n, graph);
      else if (n.kind == "storage") build_storage(n, graph);
      else
        error(n.line, n.column,
              "unknown template kind '" + n.kind +
                  "' (expected conversion or storage)");
    }
    std::set<std::string> edge_names;
    for (const AstEdge& e : edges_) {
      if (!edge_names.insert(e.name).second) {
        error(e.line, e.column, "duplicate hyperedge name '" + e.name + "'");
        continue;
      }
      build_edge(e, graph);
    }
    if (has_errors(diags_)) return {};

    for (const GraphDiagnostic& gd : validate_graph(graph)) {
      auto [line, col] = block_position(gd.block);
      error(line, col, gd.block + ": " + gd.message);
    }
    return graph;
  }

 private:
  void error(int line, int col, std::string msg) {
    diags_.push_back(
        {Diagnostic::Severity::Error, std::move(msg), line, col});
  }

  std::pair<int, int> block_position(const std::string& name) const {
    for (const AstNode& n : nodes_)
      if (n.name == name) return {n.line, n.column};
    for (const AstEdge& e : edges_)
      if (e.name == name) return {e.line, e.column};
    return {ast_.horizon_line, ast_.horizon_column};
  }

  // --- plain value coercions -------------------------------------------

  bool as_number(const AstAssign& a, double& out) {
    if (a.value.kind != AstValue::Kind::Number) {
      error(a.value.line, a.value.column,
            "parameter '" + a.dotted() + "' expects a number");
      return false;
    }
    out = a.value.number;
    return true;
  }

  bool as_count(const AstAssign& a, int& out) {
    double v = 0.0;
    if (!as_number(a, v)) return false;
    if (v < 0.0 || v != std::floor(v) || v > 2147483647.0) {
      error(a.value.line, a.value.column,
            "parameter '" + a.dotted() + "' must be a non-negative integer");
      return false;
    }
    out = static_cast<int>(v);
    return true;
  }

  const std::vector<double>* as_series(const AstAssign& a) {
    if (a.value.kind != AstValue::Kind::Ref) {
      error(a.value.line, a.value.column,
            "parameter '" + a.dotted() + "' expects a series name");
      return nullptr;
    }
    auto it = series_.find(a.value.ref);
    if (it == series_.end()) {
      // Imports that already failed were reported once.
      if (!failed_series_.count(a.value.ref))
        error(a.value.line, a.value.column,
              "unknown series '" + a.value.ref + "'");
      return nullptr;
    }
    return &it->second;
  }

  // --- stages ------------------------------------------------------------

  void resolve_horizon() {
    if (!ast_.horizon_present) {
      error(1, 1, "missing horizon declaration");
      return;
    }
    double T = 0.0, dt = 1.0, years = 1.0;
    bool seen_T = false;
    std::set<std::string> seen;
    for (const AstAssign& a : ast_.horizon) {
      std::string key = a.dotted();
      if (!seen.insert(key).second) {
        error(a.line, a.column, "duplicate horizon setting '" + key + "'");
        continue;
      }
      double v = 0.0;
      if (!as_number(a, v)) continue;
      if (key == "T") {
        if (v <= 0.0 || v != std::floor(v)) {
          error(a.value.line, a.value.column, "T must be a positive integer");
        } else {
          T = v;
          seen_T = true;
        }
      } else if (key == "dt") {
        dt = v;
      } else if (key == "years") {
        years = v;
      } else {
        error(a.line, a.column,
              "unknown horizon setting '" + key +
                  "' (expected T, dt, or years)");
      }
    }
    if (!seen_T) {
      error(ast_.horizon_line, ast_.horizon_column,
            "horizon is missing the required setting 'T'");
      return;
    }
    try {
      horizon_ = make_horizon(static_cast<int>(T), dt, years);
    } catch (const ValidationError& e) {
      error(ast_.horizon_line, ast_.horizon_column, e.what());
    }
  }

  void apply_scenario() {
    if (opts_.scenario.empty()) return;
    const AstScenario* sc = nullptr;
    for (const AstScenario& s : ast_.scenarios)
      if (s.name == opts_.scenario) sc = &s;
    if (!sc) {
      std::string known;
      for (const AstScenario& s : ast_.scenarios)
        known += (known.empty() ? "" : ", ") + s.name;
      error(1, 1,
            "unknown scenario '" + opts_.scenario + "'" +
                (known.empty() ? " (the model defines none)"
                               : " (known: " + known + ")"));
      return;
    }
    for (const AstAssign& ov : sc->overrides) apply_override(ov);
  }

  void apply_override(const AstAssign& ov) {
    if (ov.path.size() == 1 && ov.path[0] == "wacc") {
      if (ov.scale) {
        if (!wacc_ || wacc_->kind != AstValue::Kind::Number ||
            ov.value.kind != AstValue::Kind::Number) {
          error(ov.line, ov.column,
                "cannot scale 'wacc': both sides must be numbers");
          return;
        }
        wacc_->number *= ov.value.number;
      } else {
        wacc_ = ov.value;
      }
      return;
    }
    if (ov.path.size() < 2) {
      error(ov.line, ov.column,
            "override path '" + ov.dotted() +
                "' must name a block parameter (block.param)");
      return;
    }
    std::vector<std::string> sub(ov.path.begin() + 1, ov.path.end());
    for (AstNode& n : nodes_)
      if (n.name == ov.path[0]) return apply_to(n.assigns, ov, sub);
    for (AstEdge& e : edges_)
      if (e.name == ov.path[0]) return apply_to(e.assigns, ov, sub);
    error(ov.line, ov.column,
          "override targets unknown block '" + ov.path[0] + "'");
  }

  void apply_to(std::vector<AstAssign>& assigns, const AstAssign& ov,
                const std::vector<std::string>& sub) {
    AstAssign* hit = nullptr;
    for (AstAssign& a : assigns)
      if (a.path == sub) hit = &a;
    if (ov.scale) {
      if (ov.value.kind != AstValue::Kind::Number) {
        error(ov.value.line, ov.value.column,
              "'*=' needs a numeric factor");
        return;
      }
      if (!hit) {
        error(ov.line, ov.column,
              "cannot scale '" + ov.dotted() +
                  "': parameter is not set in the base model");
        return;
      }
      if (hit->value.kind != AstValue::Kind::Number) {
        error(ov.line, ov.column,
              "cannot scale '" + ov.dotted() + "': value is not a number");
        return;
      }
      hit->value.number *= ov.value.number;
      return;
    }
    if (hit) {
      hit->value = ov.value;
      hit->scale = false;
    } else {
      AstAssign fresh = ov;
      fresh.path = sub;
      fresh.scale = false;
      assigns.push_back(std::move(fresh));
    }
  }

  void load_imports() {
    namespace fs = std::filesystem;
    for (const AstSeries& s : ast_.series) {
      if (series_.count(s.name)) {
        error(s.line, s.column_pos, "duplicate series name '" + s.name + "'");
        continue;
      }
      fs::path p(s.path);
      if (p.is_relative()) p = fs::path(base_dir_) / p;
      try {
        SeriesFile file = read_delimited(p.string());
        size_t rows =
            file.rows.size() > s.offset ? file.rows.size() - s.offset : 0;
        if (rows < static_cast<size_t>(horizon_.T)) {
          error(s.line, s.column_pos,
                "series length " + std::to_string(rows) + " \xE2\x89\xA0 horizon " +
                    std::to_string(horizon_.T));
          failed_series_.insert(s.name);
          continue;
        }
        series_[s.name] = extract_column(
            file, s.column, static_cast<size_t>(horizon_.T), s.offset);
      } catch (const Error& e) {
        error(s.line, s.column_pos, e.what());
        failed_series_.insert(s.name);
      }
    }
  }

  void resolve_file_wacc() {
    file_wacc_.reset();
    if (!wacc_) return;
    if (wacc_->kind == AstValue::Kind::Number) file_wacc_ = wacc_->number;
    else if (wacc_->kind != AstValue::Kind::None)
      error(wacc_->line, wacc_->column, "wacc expects a number or 'none'");
  }

  // Returns false when the same dotted path was already assigned.
  bool mark_seen(std::set<std::string>& seen, const AstAssign& a) {
    if (!seen.insert(a.dotted()).second) {
      error(a.line, a.column, "duplicate parameter '" + a.dotted() + "'");
      return false;
    }
    return true;
  }

  bool finish_cost(CapexSpec& cost, bool lifetime_set,
                   std::optional<double> node_wacc, bool node_wacc_set,
                   const AstNode& n, const char* label) {
    if (cost.capex != 0.0 && !lifetime_set) {
      error(n.line, n.column,
            "missing required parameter '" + std::string(label) +
                "lifetime' on node '" + n.name + "' (capex is set)");
      return false;
    }
    std::optional<double> w = node_wacc_set ? node_wacc : file_wacc_;
    try {
      cost.annualized = annualize_capex(cost.capex, cost.lifetime, w);
    } catch (const ValidationError& e) {
      error(n.line, n.column, "node '" + n.name + "': " + e.what());
      return false;
    }
    return true;
  }

  void build_conversion(const AstNode& n, ModelGraph& graph) {
    ConversionSpec spec;
    spec.name = n.name;
    std::set<std::string> declared;
    for (const AstFlows& f : n.flows) {
      for (const std::string& c : f.names) {
        if (!declared.insert(c).second) {
          error(f.line, f.column,
                "commodity '" + c + "' declared twice on node '" + n.name +
                    "'");
          continue;
        }
        spec.commodities.push_back(
            {c, f.produces ? FlowDir::Out : FlowDir::In, 1.0, 0, ""});
      }
    }
    auto commodity = [&](const std::string& c) -> CommodityFlow* {
      for (auto& flow : spec.commodities)
        if (flow.name == c) return &flow;
      return nullptr;
    };

    bool lifetime_set = false, node_wacc_set = false, sizing_set = false;
    std::optional<double> node_wacc;
    std::set<std::string> seen;
    for (const AstAssign& a : n.assigns) {
      if (!mark_seen(seen, a)) continue;
      const std::string& head = a.path[0];
      if (a.path.size() == 2 && (head == "phi" || head == "tau")) {
        CommodityFlow* flow = commodity(a.path[1]);
        if (!flow) {
          error(a.line, a.column,
                "parameter '" + a.dotted() + "' names undeclared commodity '" +
                    a.path[1] + "' (declare it with consumes/produces)");
          continue;
        }
        if (head == "phi") {
          as_number(a, flow->phi);
        } else {
          as_count(a, flow->tau);
        }
        continue;
      }
      if (a.path.size() != 1) {
        error(a.line, a.column,
              "unknown parameter '" + a.dotted() + "' on conversion node '" +
                  n.name + "'");
        continue;
      }
      if (head == "reference" || head == "sizing") {
        if (a.value.kind != AstValue::Kind::Ref || !commodity(a.value.ref)) {
          error(a.value.line, a.value.column,
                "'" + head + "' must name a declared commodity");
          continue;
        }
        (head == "reference" ? spec.reference : spec.sizing) = a.value.ref;
        if (head == "sizing") sizing_set = true;
      } else if (head == "availability") {
        if (a.value.kind == AstValue::Kind::Number) {
          spec.availability.assign(static_cast<size_t>(horizon_.T),
                                   a.value.number);
        } else if (const auto* s = as_series(a)) {
          spec.availability = *s;
        }
      } else if (head == "mu") {
        as_number(a, spec.mu);
      } else if (head == "delta_plus") {
        as_number(a, spec.delta_plus);
      } else if (head == "delta_minus") {
        as_number(a, spec.delta_minus);
      } else if (head == "kappa_max") {
        if (a.value.kind == AstValue::Kind::None) spec.kappa_max = kInf;
        else as_number(a, spec.kappa_max);
      } else if (head == "kappa_existing") {
        as_number(a, spec.kappa_existing);
      } else if (head == "capex") {
        as_number(a, spec.cost.capex);
      } else if (head == "fom") {
        as_number(a, spec.cost.fom);
      } else if (head == "vom") {
        if (a.value.kind == AstValue::Kind::Ref) {
          if (const auto* s = as_series(a)) spec.cost.vom_series = *s;
        } else {
          as_number(a, spec.cost.vom);
        }
      } else if (head == "lifetime") {
        if (as_number(a, spec.cost.lifetime)) lifetime_set = true;
      } else if (head == "wacc") {
        node_wacc_set = true;
        if (a.value.kind == AstValue::Kind::Number) node_wacc = a.value.number;
        else if (a.value.kind != AstValue::Kind::None)
          error(a.value.line, a.value.column, "wacc expects a number or 'none'");
      } else {
        error(a.line, a.column,
              "unknown parameter '" + a.dotted() + "' on conversion node '" +
                  n.name + "'");
      }
    }

    if (spec.commodities.empty()) {
      error(n.line, n.column,
            "node '" + n.name + "' declares no commodities");
      return;
    }
    if (spec.reference.empty()) {
      error(n.line, n.column,
            "missing required parameter 'reference' on node '" + n.name + "'");
      return;
    }
    if (!sizing_set) spec.sizing = spec.reference;
    if (!finish_cost(spec.cost, lifetime_set, node_wacc, node_wacc_set, n, ""))
      return;
    try {
      graph.nodes.push_back(build_conversion_node(spec, horizon_));
    } catch (const ValidationError& e) {
      error(n.line, n.column, e.what());
    }
  }

  void build_storage(const AstNode& n, ModelGraph& graph) {
    StorageSpec spec;
    spec.name = n.name;
    if (!n.flows.empty()) {
      error(n.flows[0].line, n.flows[0].column,
            "storage nodes have fixed charge/discharge flows; "
            "consumes/produces is only valid on conversion nodes");
      return;
    }
    bool stock_lifetime = false, flow_lifetime = false, node_wacc_set = false;
    std::optional<double> node_wacc;
    std::set<std::string> seen;
    for (const AstAssign& a : n.assigns) {
      if (!mark_seen(seen, a)) continue;
      const std::string& head = a.path[0];
      if (a.path.size() == 2 && (head == "stock" || head == "flow")) {
        CapexSpec& cost = head == "stock" ? spec.stock_cost : spec.flow_cost;
        const std::string& leaf = a.path[1];
        if (leaf == "capex") {
          as_number(a, cost.capex);
        } else if (leaf == "fom") {
          as_number(a, cost.fom);
        } else if (leaf == "vom") {
          if (a.value.kind == AstValue::Kind::Ref) {
            if (const auto* s = as_series(a)) cost.vom_series = *s;
          } else {
            as_number(a, cost.vom);
          }
        } else if (leaf == "lifetime") {
          if (as_number(a, cost.lifetime))
            (head == "stock" ? stock_lifetime : flow_lifetime) = true;
        } else {
          error(a.line, a.column,
                "unknown parameter '" + a.dotted() + "' on storage node '" +
                    n.name + "'");
        }
        continue;
      }
      if (a.path.size() == 2 && head == "aux") {
        if (spec.aux && spec.aux->name != a.path[1]) {
          error(a.line, a.column,
                "storage node '" + n.name +
                    "' already has auxiliary flow '" + spec.aux->name + "'");
          continue;
        }
        double phi = 0.0;
        if (!as_number(a, phi)) continue;
        spec.aux = AuxFlow{a.path[1], phi, ""};
        continue;
      }
      if (a.path.size() != 1) {
        error(a.line, a.column,
              "unknown parameter '" + a.dotted() + "' on storage node '" +
                  n.name + "'");
        continue;
      }
      if (head == "eta_s") as_number(a, spec.eta_self);
      else if (head == "eta_plus") as_number(a, spec.eta_charge);
      else if (head == "eta_minus") as_number(a, spec.eta_discharge);
      else if (head == "sigma") as_number(a, spec.sigma);
      else if (head == "rho") as_number(a, spec.rho);
      else if (head == "epsilon_max") {
        if (a.value.kind == AstValue::Kind::None) spec.epsilon_max = kInf;
        else as_number(a, spec.epsilon_max);
      } else if (head == "epsilon_existing") {
        as_number(a, spec.epsilon_existing);
      } else if (head == "kappa_existing") {
        as_number(a, spec.kappa_existing);
      } else if (head == "wacc") {
        node_wacc_set = true;
        if (a.value.kind == AstValue::Kind::Number) node_wacc = a.value.number;
        else if (a.value.kind != AstValue::Kind::None)
          error(a.value.line, a.value.column, "wacc expects a number or 'none'");
      } else {
        error(a.line, a.column,
              "unknown parameter '" + a.dotted() + "' on storage node '" +
                  n.name + "'");
      }
    }
    if (!finish_cost(spec.stock_cost, stock_lifetime, node_wacc, node_wacc_set,
                     n, "stock.") ||
        !finish_cost(spec.flow_cost, flow_lifetime, node_wacc, node_wacc_set,
                     n, "flow."))
      return;
    try {
      graph.nodes.push_back(build_storage_node(spec, horizon_));
    } catch (const ValidationError& e) {
      error(n.line, n.column, e.what());
    }
  }

  void check_member(const AstMember& m, const std::string& edge,
                    const ModelGraph& graph) {
    int ni = graph.find_node(m.node);
    if (ni >= 0) {
      const NodeBlock& node = graph.nodes[ni];
      int vi = node.find_variable(m.var);
      if (vi < 0 || node.variables[vi].kind != VarKind::External)
        error(m.line, m.column,
              "no external variable '" + m.var + "' on node '" + m.node +
                  "'");
      return;
    }
    // A node that failed to build was already reported; only a name that
    // appears nowhere is a fresh problem.
    for (const AstNode& n : nodes_)
      if (n.name == m.node) return;
    error(m.line, m.column,
          "unknown node '" + m.node + "' in hyperedge '" + edge + "'");
  }

  void build_edge(const AstEdge& e, ModelGraph& graph) {
    ConservationSpec spec;
    spec.name = e.name;
    for (const AstMember& m : e.tail) {
      check_member(m, e.name, graph);
      spec.tail.push_back({m.node, m.var});
    }
    for (const AstMember& m : e.head) {
      check_member(m, e.name, graph);
      spec.head.push_back({m.node, m.var});
    }
    std::set<std::string> seen;
    for (const AstAssign& a : e.assigns) {
      if (!mark_seen(seen, a)) continue;
      std::string key = a.dotted();
      if (key == "lambda") {
        if (a.value.kind == AstValue::Kind::Ref) {
          if (const auto* s = as_series(a)) spec.lambda_series = *s;
        } else {
          as_number(a, spec.lambda);
        }
      } else if (key == "sense") {
        if (a.value.kind == AstValue::Kind::Ref && a.value.ref == "eq") {
          spec.sense = Sense::Eq;
        } else if (a.value.kind == AstValue::Kind::Ref && a.value.ref == "ge") {
          spec.sense = Sense::Ge;
        } else {
          error(a.value.line, a.value.column,
                "sense must be 'eq' or 'ge'");
        }
      } else {
        error(a.line, a.column,
              "unknown parameter '" + key + "' on hyperedge '" + e.name + "'");
      }
    }
    try {
      graph.hyperedges.push_back(build_conservation_hyperedge(spec, horizon_));
    } catch (const ValidationError& ex) {
      error(e.line, e.column, ex.what());
    }
  }

  const Ast& ast_;
  std::string base_dir_;
  std::vector<Diagnostic>& diags_;
  ResolveOptions opts_;

  TimeHorizon horizon_{0, 1.0, 1.0};
  std::vector<AstNode> nodes_;  // scenario-adjusted copies
  std::vector<AstEdge> edges_;
  std::optional<AstValue> wacc_;
  std::optional<double> file_wacc_;
  std::map<std::string, std::vector<double>> series_;
  std::set<std::string> failed_series_;
};

} // namespace

ModelGraph resolve(const Ast& ast, const std::string& base_dir,
                   std::vector<Diagnostic>& diags,
                   const ResolveOptions& opts) {
  return Resolver(ast, base_dir, diags, opts).run();
}

ModelGraph load_model(const std::string& path, std::vector<Diagnostic>& diags,
                      const ResolveOptions& opts) {
  std::ifstream in(path);
  if (!in) {
    diags.push_back({Diagnostic::Severity::Error,
                     "cannot open model file '" + path + "'", 1, 1});
    return {};
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::vector<Token> toks = tokenize(buffer.str(), diags);
  Ast ast = parse(toks, diags);
  if (has_errors(diags)) return {};
  std::string base =
      std::filesystem::path(path).parent_path().string();
  if (base.empty()) base = ".";
  return resolve(ast, base, diags, opts);
}

} // namespace hubopt::dsl
