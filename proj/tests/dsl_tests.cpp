#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "hubopt/blocks.hpp"
#include "hubopt/dsl.hpp"
#include "hubopt/lp.hpp"
#include "hubopt/series.hpp"

using namespace hubopt;
namespace dsl = hubopt::dsl;
namespace fs = std::filesystem;

namespace {

fs::path fixture_dir(const char* tag) {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("hubopt_dsl_" + std::to_string(::getpid()) + "_" + tag +
                  "_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::vector<dsl::Token> lex(const std::string& src,
                            std::vector<dsl::Diagnostic>& diags) {
  return dsl::tokenize(src, diags);
}

dsl::Ast parse_src(const std::string& src, std::vector<dsl::Diagnostic>& diags) {
  return dsl::parse(dsl::tokenize(src, diags), diags);
}

bool any_error_contains(const std::vector<dsl::Diagnostic>& diags,
                        const std::string& needle) {
  for (const auto& d : diags)
    if (d.severity == dsl::Diagnostic::Severity::Error &&
        d.message.find(needle) != std::string::npos)
      return true;
  return false;
}

std::string csv_rows(int n, double base = 0.25, double step = 0.01) {
  std::string text = "hour,cf\n";
  for (int i = 0; i < n; ++i)
    text += std::to_string(i) + "," + std::to_string(base + step * i) + "\n";
  return text;
}

} // namespace

TEST_CASE("tokenize: horizon example") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("horizon { T = 24; dt = 1; years = 1; }", diags);
  CHECK(diags.empty());
  // horizon { T = 24 ; dt = 1 ; years = 1 ; }
  CHECK(toks.size() == 15);
  CHECK(toks.back().lexeme == "}");
  CHECK(toks.front().kind == dsl::TokKind::Keyword);
  CHECK(toks[1].lexeme == "{");
  CHECK(toks[2].kind == dsl::TokKind::Identifier);
  CHECK(toks[4].kind == dsl::TokKind::Number);
  CHECK(toks[4].lexeme == "24");
}

TEST_CASE("tokenize: number lexeme preserved") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("node pv : conversion { capex = 380.0; }", diags);
  CHECK(diags.empty());
  bool found = false;
  for (const auto& t : toks)
    if (t.kind == dsl::TokKind::Number) {
      CHECK(t.lexeme == "380.0");
      found = true;
    }
  CHECK(found);
}

TEST_CASE("tokenize: illegal character is a positioned error") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("@", diags);
  CHECK(toks.empty());
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == dsl::Diagnostic::Severity::Error);
  CHECK(diags[0].line == 1);
  CHECK(diags[0].column == 1);
  CHECK(diags[0].message.find("illegal character") != std::string::npos);
}

TEST_CASE("tokenize: comments, strings, punctuation") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("# leading comment\n"
                  "series cf from \"data/solar 2016.csv\" column \"cf\"; # x\n"
                  "pv.capex *= 0.5;\n",
                  diags);
  CHECK(diags.empty());
  REQUIRE(toks.size() >= 8);
  CHECK(toks[0].lexeme == "series");
  CHECK(toks[0].line == 2);
  CHECK(toks[3].kind == dsl::TokKind::String);
  CHECK(toks[3].lexeme == "data/solar 2016.csv");
  bool scale = false;
  for (const auto& t : toks)
    if (t.kind == dsl::TokKind::Punct && t.lexeme == "*=") scale = true;
  CHECK(scale);
}

TEST_CASE("tokenize: unterminated string") {
  std::vector<dsl::Diagnostic> diags;
  lex("series s from \"oops", diags);
  CHECK(any_error_contains(diags, "unterminated string"));
  diags.clear();
  lex("x = \"line\nbreak\";", diags);
  CHECK(any_error_contains(diags, "unterminated string"));
}

TEST_CASE("tokenize: stray star") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("a * b", diags);
  CHECK(any_error_contains(diags, "stray '*'"));
  CHECK(toks.size() == 2); // the identifiers still lex
}

TEST_CASE("tokenize: signed and exponent numbers") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("-3.5e-2 +4 .5 2E6", diags);
  CHECK(diags.empty());
  REQUIRE(toks.size() == 4);
  for (const auto& t : toks) CHECK(t.kind == dsl::TokKind::Number);
  CHECK(toks[0].lexeme == "-3.5e-2");
  CHECK(toks[2].lexeme == ".5");
}

TEST_CASE("tokenize: letter e without exponent digits stays separate") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("24e", diags);
  CHECK(diags.empty());
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].kind == dsl::TokKind::Number);
  CHECK(toks[0].lexeme == "24");
  CHECK(toks[1].kind == dsl::TokKind::Identifier);
  CHECK(toks[1].lexeme == "e");
}

TEST_CASE("tokenize: positions are 1-based across lines") {
  std::vector<dsl::Diagnostic> diags;
  auto toks = lex("a\n  bb\n", diags);
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].line == 1);
  CHECK(toks[0].column == 1);
  CHECK(toks[1].line == 2);
  CHECK(toks[1].column == 3);
}

static const char* kMinimal = R"(
horizon { T = 4; dt = 1; years = 1; }

node gen : conversion {
  produces power;
  reference = power;
  capex = 10;
  lifetime = 5;
}

hyperedge grid {
  tail = gen.power;
  lambda = 2;
}
)";

TEST_CASE("parse: minimal file structure") {
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(kMinimal, diags);
  CHECK(diags.empty());
  CHECK(ast.horizon_present);
  CHECK(ast.horizon.size() == 3);
  REQUIRE(ast.nodes.size() == 1);
  REQUIRE(ast.edges.size() == 1);
  CHECK(ast.nodes[0].name == "gen");
  CHECK(ast.nodes[0].kind == "conversion");
  REQUIRE(ast.nodes[0].flows.size() == 1);
  CHECK(ast.nodes[0].flows[0].produces);
  CHECK(ast.nodes[0].flows[0].names == std::vector<std::string>{"power"});
  CHECK(ast.nodes[0].assigns.size() == 3);
  CHECK(ast.edges[0].tail.size() == 1);
  CHECK(ast.edges[0].tail[0].node == "gen");
  CHECK(ast.edges[0].tail[0].var == "power");
  CHECK(ast.edges[0].head.empty());
}

TEST_CASE("parse: duplicate horizon reported at the second block") {
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("horizon { T = 4; }\nhorizon { T = 8; }\n", diags);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].message == "duplicate horizon declaration");
  CHECK(diags[0].line == 2);
  CHECK(ast.horizon.size() == 1); // the first one wins
}

TEST_CASE("parse: missing semicolon recovers at the next declaration") {
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("horizon { T = 4; }\n"
                           "node a : conversion {\n"
                           "  reference = power\n"
                           "  capex = 1;\n"
                           "}\n"
                           "node b : conversion { produces power; "
                           "reference = power; }\n",
                           diags);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].message.find("expected ';'") != std::string::npos);
  CHECK(diags[0].line == 4); // the token after the missing semicolon
  REQUIRE(ast.nodes.size() == 1);
  CHECK(ast.nodes[0].name == "b");
}

TEST_CASE("parse: unterminated block") {
  std::vector<dsl::Diagnostic> diags;
  parse_src("node a : conversion {\n  capex = 1;\n", diags);
  CHECK(any_error_contains(diags, "unterminated node block"));
}

TEST_CASE("parse: wacc setting and duplicate") {
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("wacc = 0.07;\n", diags);
  CHECK(diags.empty());
  REQUIRE(ast.wacc.has_value());
  CHECK(ast.wacc->kind == dsl::AstValue::Kind::Number);
  CHECK(ast.wacc->number == doctest::Approx(0.07));

  diags.clear();
  parse_src("wacc = 0.07;\nwacc = none;\n", diags);
  CHECK(any_error_contains(diags, "duplicate wacc"));

  diags.clear();
  ast = parse_src("wacc = none;\n", diags);
  CHECK(diags.empty());
  REQUIRE(ast.wacc.has_value());
  CHECK(ast.wacc->kind == dsl::AstValue::Kind::None);
}

TEST_CASE("parse: series import clause") {
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(
      "series solar from \"data/cf.csv\" column \"solar\" offset 8760;\n"
      "series wind from \"data/cf.csv\" column \"wind\";\n",
      diags);
  CHECK(diags.empty());
  REQUIRE(ast.series.size() == 2);
  CHECK(ast.series[0].name == "solar");
  CHECK(ast.series[0].path == "data/cf.csv");
  CHECK(ast.series[0].column == "solar");
  CHECK(ast.series[0].offset == 8760);
  CHECK(ast.series[1].offset == 0);

  diags.clear();
  parse_src("series s from \"f.csv\" column \"c\" offset -1;\n", diags);
  CHECK(any_error_contains(diags, "offset must be a non-negative integer"));
}

TEST_CASE("parse: scenario overrides carry the operator") {
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("scenario half {\n"
                           "  pv.capex *= 0.5;\n"
                           "  pv.mu = 0;\n"
                           "  wacc = none;\n"
                           "}\n",
                           diags);
  CHECK(diags.empty());
  REQUIRE(ast.scenarios.size() == 1);
  REQUIRE(ast.scenarios[0].overrides.size() == 3);
  CHECK(ast.scenarios[0].overrides[0].scale);
  CHECK(ast.scenarios[0].overrides[0].dotted() == "pv.capex");
  CHECK_FALSE(ast.scenarios[0].overrides[1].scale);
  CHECK(ast.scenarios[0].overrides[2].value.kind == dsl::AstValue::Kind::None);
}

TEST_CASE("parse: hyperedge member lists") {
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("hyperedge methane {\n"
                           "  tail = mt.methane, tank.discharge;\n"
                           "  head = liq.methane;\n"
                           "  sense = ge;\n"
                           "}\n",
                           diags);
  CHECK(diags.empty());
  REQUIRE(ast.edges.size() == 1);
  CHECK(ast.edges[0].tail.size() == 2);
  CHECK(ast.edges[0].head.size() == 1);
  CHECK(ast.edges[0].tail[1].node == "tank");
  CHECK(ast.edges[0].tail[1].var == "discharge");
}

TEST_CASE("parse: two errors from one file via recovery") {
  std::vector<dsl::Diagnostic> diags;
  parse_src("node a : conversion { capex 5; }\n"
            "hyperedge e { tail = ; }\n",
            diags);
  int errors = 0;
  for (const auto& d : diags)
    if (d.severity == dsl::Diagnostic::Severity::Error) ++errors;
  CHECK(errors == 2);
}

TEST_CASE("pretty-print: parse round-trip is idempotent") {
  const char* src = R"(
# comment vanishes
wacc = 0.07;
horizon { T = 8; dt = 1; years = 1; }
series cf from "d.csv" column "solar" offset 8760;

node pv : conversion {
  produces power;
  reference = power;
  availability = cf;
  capex = 380; fom = 7.25; lifetime = 25;
  kappa_max = none;
}
node bat : storage {
  eta_plus = 0.959; eta_minus = 0.959; eta_s = 0.00004;
  stock.capex = 142; stock.lifetime = 10; stock.vom = 0.0018;
  flow.capex = 160; flow.fom = 0.5; flow.lifetime = 10;
}
hyperedge grid { tail = pv.power, bat.discharge; head = bat.charge; lambda = 1.5; sense = eq; }
scenario cheap { pv.capex *= 0.5; wacc = none; }
)";
  std::vector<dsl::Diagnostic> d1;
  dsl::Ast ast1 = parse_src(src, d1);
  REQUIRE_FALSE(dsl::has_errors(d1));
  std::string pp1 = dsl::pretty_print(ast1);

  std::vector<dsl::Diagnostic> d2;
  dsl::Ast ast2 = parse_src(pp1, d2);
  REQUIRE_FALSE(dsl::has_errors(d2));
  std::string pp2 = dsl::pretty_print(ast2);
  CHECK(pp1 == pp2);

  // Structure survives: same counts, same names.
  CHECK(ast2.nodes.size() == ast1.nodes.size());
  CHECK(ast2.edges.size() == ast1.edges.size());
  CHECK(ast2.scenarios.size() == ast1.scenarios.size());
  CHECK(ast2.series.size() == ast1.series.size());
  CHECK(ast2.nodes[0].assigns.size() == ast1.nodes[0].assigns.size());
}

TEST_CASE("format_diagnostic shape") {
  dsl::Diagnostic d{dsl::Diagnostic::Severity::Error, "boom", 3, 5};
  CHECK(dsl::format_diagnostic("m.hub", d) == "m.hub:3:5: error: boom");
  d.severity = dsl::Diagnostic::Severity::Warning;
  CHECK(dsl::format_diagnostic("m.hub", d) == "m.hub:3:5: warning: boom");
}

// ---------------------------------------------------------------------------
// Resolver

TEST_CASE("resolve: conversion node matches a hand-built spec") {
  auto dir = fixture_dir("methanation");
  const char* src = R"(
horizon { T = 5; dt = 1; years = 1; }
wacc = 0.07;
node methanation : conversion {
  consumes hydrogen, co2;
  produces methane, water;
  reference = methane;
  phi.hydrogen = 0.5;
  phi.co2 = 2.75;
  phi.water = 2.25;
  mu = 1.0;
  delta_plus = 0.0;
  delta_minus = 0.0;
  capex = 735.0;
  fom = 29.4;
  lifetime = 20;
}
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  ModelGraph got = dsl::resolve(ast, dir.string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  REQUIRE(got.nodes.size() == 1);

  ConversionSpec spec;
  spec.name = "methanation";
  spec.commodities = {{"hydrogen", FlowDir::In, 0.5, 0, ""},
                      {"co2", FlowDir::In, 2.75, 0, ""},
                      {"methane", FlowDir::Out, 1.0, 0, ""},
                      {"water", FlowDir::Out, 2.25, 0, ""}};
  spec.reference = "methane";
  spec.sizing = "methane";
  spec.mu = 1.0;
  spec.delta_plus = 0.0;
  spec.delta_minus = 0.0;
  spec.cost.capex = 735.0;
  spec.cost.fom = 29.4;
  spec.cost.lifetime = 20.0;
  spec.cost.annualized = annualize_capex(735.0, 20.0, 0.07);

  ModelGraph want;
  want.horizon = make_horizon(5, 1.0, 1.0);
  want.nodes.push_back(build_conversion_node(spec, want.horizon));
  CHECK(fingerprint(assemble_lp(got)) == fingerprint(assemble_lp(want)));
}

TEST_CASE("resolve: storage node matches a hand-built spec") {
  auto dir = fixture_dir("storage");
  const char* src = R"(
horizon { T = 4; dt = 1; years = 1; }
wacc = 0.07;
node co2_store : storage {
  eta_plus = 1; eta_minus = 1; eta_s = 0;
  sigma = 0; rho = 1;
  aux.power = 0.105;
  stock.capex = 1.35; stock.fom = 0.0675; stock.lifetime = 30;
  flow.capex = 48.6; flow.fom = 2.43; flow.lifetime = 30;
}
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  ModelGraph got = dsl::resolve(ast, dir.string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  REQUIRE(got.nodes.size() == 1);
  CHECK(got.nodes[0].find_variable("charge") >= 0);
  CHECK(got.nodes[0].find_variable("discharge") >= 0);
  CHECK(got.nodes[0].find_variable("power") >= 0);

  StorageSpec spec;
  spec.name = "co2_store";
  spec.aux = AuxFlow{"power", 0.105, ""};
  spec.eta_self = 0.0;
  spec.eta_charge = 1.0;
  spec.eta_discharge = 1.0;
  spec.sigma = 0.0;
  spec.rho = 1.0;
  spec.stock_cost.capex = 1.35;
  spec.stock_cost.fom = 0.0675;
  spec.stock_cost.lifetime = 30.0;
  spec.stock_cost.annualized = annualize_capex(1.35, 30.0, 0.07);
  spec.flow_cost.capex = 48.6;
  spec.flow_cost.fom = 2.43;
  spec.flow_cost.lifetime = 30.0;
  spec.flow_cost.annualized = annualize_capex(48.6, 30.0, 0.07);

  ModelGraph want;
  want.horizon = make_horizon(4, 1.0, 1.0);
  want.nodes.push_back(build_storage_node(spec, want.horizon));
  CHECK(fingerprint(assemble_lp(got)) == fingerprint(assemble_lp(want)));
}

TEST_CASE("resolve: missing external variable on a member") {
  auto dir = fixture_dir("member");
  const char* src = R"(
horizon { T = 2; }
node battery : conversion { produces power; reference = power; }
hyperedge grid { tail = battery.discharge; }
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(
      diags, "no external variable 'discharge' on node 'battery'"));
}

TEST_CASE("resolve: series length mismatch") {
  auto dir = fixture_dir("shortseries");
  write_file(dir / "cf.csv", csv_rows(23));
  const char* src = R"(
horizon { T = 24; }
series cf from "cf.csv" column "cf";
node pv : conversion { produces power; reference = power; availability = cf; }
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "series length 23 ≠ horizon 24"));
}

TEST_CASE("resolve: series offset selects later rows") {
  auto dir = fixture_dir("offset");
  write_file(dir / "cf.csv", csv_rows(10));
  const char* src = R"(
horizon { T = 6; }
node pv : conversion { produces power; reference = power; availability = cf; }
series cf from "cf.csv" column "cf" offset 4;
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  ModelGraph got = dsl::resolve(ast, dir.string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));

  ConversionSpec spec;
  spec.name = "pv";
  spec.commodities = {{"power", FlowDir::Out, 1.0, 0, ""}};
  spec.reference = "power";
  spec.sizing = "power";
  spec.availability = {0.29, 0.30, 0.31, 0.32, 0.33, 0.34};
  spec.cost.annualized = annualize_capex(0.0, 1.0, std::nullopt);
  ModelGraph want;
  want.horizon = make_horizon(6, 1.0, 1.0);
  want.nodes.push_back(build_conversion_node(spec, want.horizon));
  CHECK(fingerprint(assemble_lp(got)) == fingerprint(assemble_lp(want)));
}

TEST_CASE("resolve: file-not-found for imports") {
  auto dir = fixture_dir("missingcsv");
  const char* src = R"(
horizon { T = 2; }
series cf from "nope.csv" column "cf";
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(dsl::has_errors(diags));
  CHECK(any_error_contains(diags, "nope.csv"));
}

TEST_CASE("resolve: unknown parameter and unknown kind") {
  auto dir = fixture_dir("unknown");
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(
      "horizon { T = 2; }\n"
      "node a : conversion { produces power; reference = power; capx = 5; }\n",
      diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "unknown parameter 'capx'"));

  diags.clear();
  ast = parse_src("horizon { T = 2; }\nnode a : conversi { }\n", diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "unknown template kind 'conversi'"));
}

TEST_CASE("resolve: missing required parameters") {
  auto dir = fixture_dir("missing");
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(
      "horizon { T = 2; }\nnode a : conversion { produces power; }\n", diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "missing required parameter 'reference'"));

  diags.clear();
  ast = parse_src("horizon { T = 2; }\n"
                  "node a : conversion { produces power; reference = power; "
                  "capex = 10; }\n",
                  diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "missing required parameter 'lifetime'"));
}

TEST_CASE("resolve: duplicate parameter") {
  auto dir = fixture_dir("dup");
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("horizon { T = 2; }\n"
                           "node a : conversion { produces power; "
                           "reference = power; mu = 0; mu = 1; }\n",
                           diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "duplicate parameter 'mu'"));
}

TEST_CASE("resolve: zero-financing wacc") {
  auto dir = fixture_dir("zerofin");
  const char* src = R"(
horizon { T = 3; }
wacc = none;
node gen : conversion { produces power; reference = power;
  capex = 600; lifetime = 15; }
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  ModelGraph got = dsl::resolve(ast, dir.string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));

  ConversionSpec spec;
  spec.name = "gen";
  spec.commodities = {{"power", FlowDir::Out, 1.0, 0, ""}};
  spec.reference = "power";
  spec.sizing = "power";
  spec.cost.capex = 600.0;
  spec.cost.lifetime = 15.0;
  spec.cost.annualized = annualize_capex(600.0, 15.0, std::nullopt);
  CHECK(*spec.cost.annualized == doctest::Approx(40.0));
  ModelGraph want;
  want.horizon = make_horizon(3, 1.0, 1.0);
  want.nodes.push_back(build_conversion_node(spec, want.horizon));
  CHECK(fingerprint(assemble_lp(got)) == fingerprint(assemble_lp(want)));
}

TEST_CASE("resolve: per-node wacc override beats the file setting") {
  auto dir = fixture_dir("nodewacc");
  const char* src = R"(
horizon { T = 3; }
wacc = 0.07;
node gen : conversion { produces power; reference = power;
  capex = 600; lifetime = 15; wacc = none; }
)";
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(src, diags);
  ModelGraph got = dsl::resolve(ast, dir.string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));

  ConversionSpec spec;
  spec.name = "gen";
  spec.commodities = {{"power", FlowDir::Out, 1.0, 0, ""}};
  spec.reference = "power";
  spec.sizing = "power";
  spec.cost.capex = 600.0;
  spec.cost.lifetime = 15.0;
  spec.cost.annualized = annualize_capex(600.0, 15.0, std::nullopt);
  ModelGraph want;
  want.horizon = make_horizon(3, 1.0, 1.0);
  want.nodes.push_back(build_conversion_node(spec, want.horizon));
  CHECK(fingerprint(assemble_lp(got)) == fingerprint(assemble_lp(want)));
}

namespace {

const char* kScenarioSrc = R"(
horizon { T = 3; }
wacc = 0.07;
node el : conversion { produces hydrogen; reference = hydrogen;
  capex = 600; fom = 30; lifetime = 15; mu = 0.05; }
hyperedge h2 { tail = el.hydrogen; lambda = 1; }
scenario cheap_el {
  el.capex *= 0.5;
  el.mu = 0;
  el.kappa_max = 20;
}
scenario no_finance { wacc = none; }
)";

ModelGraph manual_scenario_graph(double capex, double mu, double kappa_max,
                                 std::optional<double> wacc) {
  ConversionSpec spec;
  spec.name = "el";
  spec.commodities = {{"hydrogen", FlowDir::Out, 1.0, 0, ""}};
  spec.reference = "hydrogen";
  spec.sizing = "hydrogen";
  spec.mu = mu;
  spec.kappa_max = kappa_max;
  spec.cost.capex = capex;
  spec.cost.fom = 30.0;
  spec.cost.lifetime = 15.0;
  spec.cost.annualized = annualize_capex(capex, 15.0, wacc);
  ModelGraph g;
  g.horizon = make_horizon(3, 1.0, 1.0);
  g.nodes.push_back(build_conversion_node(spec, g.horizon));
  ConservationSpec edge;
  edge.name = "h2";
  edge.tail = {{"el", "hydrogen"}};
  edge.lambda = 1.0;
  g.hyperedges.push_back(build_conservation_hyperedge(edge, g.horizon));
  return g;
}

} // namespace

TEST_CASE("resolve: scenario overrides scale, replace, and append") {
  auto dir = fixture_dir("scenario");
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(kScenarioSrc, diags);
  REQUIRE_FALSE(dsl::has_errors(diags));

  ModelGraph base = dsl::resolve(ast, dir.string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  CHECK(fingerprint(assemble_lp(base)) ==
        fingerprint(assemble_lp(manual_scenario_graph(600, 0.05, kInf, 0.07))));

  diags.clear();
  dsl::ResolveOptions opts;
  opts.scenario = "cheap_el";
  ModelGraph cheap = dsl::resolve(ast, dir.string(), diags, opts);
  REQUIRE_FALSE(dsl::has_errors(diags));
  CHECK(fingerprint(assemble_lp(cheap)) ==
        fingerprint(assemble_lp(manual_scenario_graph(300, 0.0, 20.0, 0.07))));

  diags.clear();
  opts.scenario = "no_finance";
  ModelGraph nf = dsl::resolve(ast, dir.string(), diags, opts);
  REQUIRE_FALSE(dsl::has_errors(diags));
  CHECK(fingerprint(assemble_lp(nf)) ==
        fingerprint(assemble_lp(
            manual_scenario_graph(600, 0.05, kInf, std::nullopt))));
}

TEST_CASE("resolve: scenario error cases") {
  auto dir = fixture_dir("scerr");
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src(kScenarioSrc, diags);

  dsl::ResolveOptions opts;
  opts.scenario = "nonesuch";
  diags.clear();
  dsl::resolve(ast, dir.string(), diags, opts);
  CHECK(any_error_contains(diags, "unknown scenario 'nonesuch'"));
  CHECK(any_error_contains(diags, "cheap_el"));

  diags.clear();
  dsl::Ast bad = parse_src(
      "horizon { T = 2; }\n"
      "node a : conversion { produces p; reference = p; }\n"
      "scenario s { a.capex *= 2; }\n",
      diags);
  opts.scenario = "s";
  dsl::resolve(bad, dir.string(), diags, opts);
  CHECK(any_error_contains(diags, "not set in the base model"));

  diags.clear();
  bad = parse_src("horizon { T = 2; }\n"
                  "node a : conversion { produces p; reference = p; }\n"
                  "scenario s { b.capex = 2; }\n",
                  diags);
  dsl::resolve(bad, dir.string(), diags, opts);
  CHECK(any_error_contains(diags, "unknown block 'b'"));
}

TEST_CASE("resolve: kappa_max none means unbounded deployment") {
  auto dir = fixture_dir("kapnone");
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("horizon { T = 2; }\n"
                           "node a : conversion { produces p; reference = p; "
                           "kappa_max = none; }\n"
                           "node b : conversion { produces p; reference = p; "
                           "kappa_max = 50; }\n",
                           diags);
  ModelGraph g = dsl::resolve(ast, dir.string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  // The bounded node carries one extra constraint row.
  CHECK(g.nodes[1].constraints.size() == g.nodes[0].constraints.size() + 1);
}

TEST_CASE("resolve: validation failures surface as diagnostics") {
  auto dir = fixture_dir("valfail");
  std::vector<dsl::Diagnostic> diags;
  // mu outside [0,1] violates the template contract.
  dsl::Ast ast = parse_src("horizon { T = 2; }\n"
                           "node a : conversion { produces p; reference = p; "
                           "mu = 2; }\n",
                           diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(dsl::has_errors(diags));
}

TEST_CASE("resolve: horizon problems") {
  auto dir = fixture_dir("horerr");
  std::vector<dsl::Diagnostic> diags;
  dsl::Ast ast = parse_src("node a : conversion { produces p; reference = p; }\n",
                           diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "missing horizon declaration"));

  diags.clear();
  ast = parse_src("horizon { dt = 1; }\n", diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "required setting 'T'"));

  diags.clear();
  ast = parse_src("horizon { T = 2.5; }\n", diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "T must be a positive integer"));

  diags.clear();
  ast = parse_src("horizon { T = 2; Q = 3; }\n", diags);
  dsl::resolve(ast, dir.string(), diags);
  CHECK(any_error_contains(diags, "unknown horizon setting 'Q'"));
}

TEST_CASE("load_model: end-to-end with series and reports open failures") {
  auto dir = fixture_dir("loadmodel");
  write_file(dir / "cf.csv", csv_rows(8));
  write_file(dir / "model.hub", R"(
horizon { T = 8; }
series cf from "cf.csv" column "cf";
node pv : conversion { produces power; reference = power;
  availability = cf; capex = 380; fom = 7.25; lifetime = 25; }
hyperedge grid { tail = pv.power; lambda = 0.1; }
)");
  std::vector<dsl::Diagnostic> diags;
  ModelGraph g = dsl::load_model((dir / "model.hub").string(), diags);
  REQUIRE_FALSE(dsl::has_errors(diags));
  CHECK(g.nodes.size() == 1);
  CHECK(g.hyperedges.size() == 1);
  CHECK(g.horizon.T == 8);

  diags.clear();
  dsl::load_model((dir / "absent.hub").string(), diags);
  CHECK(any_error_contains(diags, "cannot open model file"));
}

TEST_CASE("resolve: determinism of the assembly fingerprint") {
  auto dir = fixture_dir("determinism");
  write_file(dir / "cf.csv", csv_rows(4));
  write_file(dir / "model.hub", R"(
horizon { T = 4; }
series cf from "cf.csv" column "cf";
node pv : conversion { produces power; reference = power; availability = cf;
  capex = 380; lifetime = 25; }
hyperedge grid { tail = pv.power; lambda = 0.2; }
)");
  uint64_t first = 0;
  for (int i = 0; i < 3; ++i) {
    std::vector<dsl::Diagnostic> diags;
    ModelGraph g = dsl::load_model((dir / "model.hub").string(), diags);
    REQUIRE_FALSE(dsl::has_errors(diags));
    uint64_t fp = fingerprint(assemble_lp(g));
    if (i == 0) first = fp;
    CHECK(fp == first);
  }
}

TEST_CASE("dsl fuzz smoke: no crash on random input") {
  std::mt19937 rng(2026'08'15);
  static const char* vocab[] = {
      "horizon", "node",  "hyperedge", "scenario", "series", "none",
      "{",       "}",     ";",         ":",        ",",      ".",
      "=",       "*=",    "\"x\"",     "1.5",      "-2e3",   "foo",
      "consumes", "tail", "wacc",      "@",        "\"",     "*",
      "#c",      "\n"};
  for (int iter = 0; iter < 20000; ++iter) {
    std::string src;
    if (iter % 2 == 0) {
      size_t len = rng() % 64;
      for (size_t i = 0; i < len; ++i)
        src += static_cast<char>(rng() % 256);
    } else {
      size_t len = rng() % 48;
      for (size_t i = 0; i < len; ++i) {
        src += vocab[rng() % std::size(vocab)];
        src += ' ';
      }
    }
    std::vector<dsl::Diagnostic> diags;
    auto toks = dsl::tokenize(src, diags);
    dsl::Ast ast = dsl::parse(toks, diags);
    // When a soup parses cleanly, the printer must round-trip it.
    if (!dsl::has_errors(diags)) {
      std::string pp = dsl::pretty_print(ast);
      std::vector<dsl::Diagnostic> d2;
      dsl::Ast again = dsl::parse(dsl::tokenize(pp, d2), d2);
      REQUIRE_FALSE(dsl::has_errors(d2));
      REQUIRE(dsl::pretty_print(again) == pp);
    }
  }
  CHECK(true);
}
