#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "hubopt/model.hpp"

using namespace hubopt;

namespace {

// Lookup over a (var, t) map; t = -1 addresses scalar variables.
ValueFn map_values(const std::map<std::pair<int, int>, double>& m) {
  return [&m](int var, int t) -> std::optional<double> {
    auto it = m.find({var, t});
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
}

NodeBlock two_var_node() {
  NodeBlock node;
  node.name = "plant";
  node.variables.push_back({"q", VarKind::External, VarShape::TimeIndexed, 0.0, kInf, ""});
  node.variables.push_back({"x", VarKind::Internal, VarShape::Scalar, 0.0, kInf, ""});
  return node;
}

} // namespace

TEST_CASE("horizon accepts the study, minimal, and leap-year cases") {
  TimeHorizon five_year = make_horizon(43824, 1.0, 5.0);
  CHECK(five_year.T == 43824);
  CHECK(five_year.dt == 1.0);
  CHECK(five_year.years == 5.0);

  TimeHorizon minimal = make_horizon(1, 1.0, 1.0);
  CHECK(minimal.T == 1);

  TimeHorizon leap = make_horizon(8784, 1.0, 1.0);
  CHECK(leap.T == 366 * 24);
}

TEST_CASE("horizon rejects nonpositive inputs naming the field") {
  CHECK_THROWS_WITH_AS(make_horizon(0, 1.0, 1.0),
                       doctest::Contains("T"), ValidationError);
  CHECK_THROWS_WITH_AS(make_horizon(24, 0.0, 1.0),
                       doctest::Contains("dt"), ValidationError);
  CHECK_THROWS_WITH_AS(make_horizon(24, 1.0, 0.0),
                       doctest::Contains("years"), ValidationError);
  CHECK_THROWS_AS(make_horizon(-3, 1.0, 1.0), ValidationError);
}

TEST_CASE("eval_affine computes q_t - 2x") {
  AffineExpr expr;
  expr.add_rel(0, 0, 1.0);
  expr.add_scalar(1, -2.0);
  std::map<std::pair<int, int>, double> vals{{{0, 7}, 4.0}, {{1, -1}, 2.0}};
  CHECK(eval_affine(expr, {}, map_values(vals), 7) == 0.0);
}

TEST_CASE("eval_affine of a bare constant needs no assignment") {
  AffineExpr expr;
  expr.constant = 3.5;
  ValueFn none = [](int, int) -> std::optional<double> { return std::nullopt; };
  CHECK(eval_affine(expr, {}, none, 0) == 3.5);
}

TEST_CASE("duplicate terms merge on insertion") {
  AffineExpr expr;
  expr.add_rel(0, 0, 1.0);
  expr.add_rel(0, 0, 1.0);
  REQUIRE(expr.terms.size() == 1);
  CHECK(expr.terms[0].coeff == 2.0);
  std::map<std::pair<int, int>, double> vals{{{0, 0}, 1.0}};
  CHECK(eval_affine(expr, {}, map_values(vals), 0) == 2.0);

  // Distinct offsets and series tags stay separate.
  expr.add_rel(0, 1, 1.0);
  expr.add_rel(0, 0, 1.0, 0);
  CHECK(expr.terms.size() == 3);
}

TEST_CASE("eval_affine reports unresolved references") {
  AffineExpr expr;
  expr.add_rel(3, 2, 1.0);
  ValueFn none = [](int, int) -> std::optional<double> { return std::nullopt; };
  CHECK_THROWS_WITH_AS(eval_affine(expr, {}, none, 5, "balance"),
                       doctest::Contains("7"), EvalError);
}

TEST_CASE("series-tagged coefficients scale with the expansion index") {
  NodeBlock node = two_var_node();
  int pi = node.add_series({0.5, 1.0, 0.25});
  AffineExpr expr;
  expr.add_rel(0, 0, 2.0, pi);
  std::map<std::pair<int, int>, double> vals{
      {{0, 0}, 10.0}, {{0, 1}, 10.0}, {{0, 2}, 10.0}};
  CHECK(eval_affine(expr, node.series, map_values(vals), 0) == 10.0);
  CHECK(eval_affine(expr, node.series, map_values(vals), 1) == 20.0);
  CHECK(eval_affine(expr, node.series, map_values(vals), 2) == 5.0);
}

TEST_CASE("eval_affine is linear in its expressions") {
  std::mt19937 rng(20260815);
  std::uniform_real_distribution<double> coeff(-5.0, 5.0);
  std::uniform_int_distribution<int> pick_var(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    AffineExpr e1, e2;
    for (int k = 0; k < 4; ++k) {
      e1.add_rel(pick_var(rng), 0, coeff(rng));
      e2.add_rel(pick_var(rng), 0, coeff(rng));
    }
    e1.constant = coeff(rng);
    e2.constant = coeff(rng);
    double a = coeff(rng);

    AffineExpr combined = e2;
    for (const Term& term : e1.terms)
      combined.add(term.var, term.tkind, term.time, a * term.coeff,
                   term.series);
    combined.constant += a * e1.constant;

    std::map<std::pair<int, int>, double> vals;
    for (int v = 0; v < 4; ++v) vals[{v, 0}] = coeff(rng);
    ValueFn fn = map_values(vals);
    double lhs = eval_affine(combined, {}, fn, 0);
    double rhs = a * eval_affine(e1, {}, fn, 0) + eval_affine(e2, {}, fn, 0);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("objective sums relative terms over the horizon") {
  NodeBlock node = two_var_node();
  node.objective.add_scalar(1, 5.0);  // 5 * x, once
  node.objective.add_rel(0, 0, 2.0);  // 2 * q_t, summed
  TimeHorizon h = make_horizon(3, 1.0, 1.0);
  std::map<std::pair<int, int>, double> vals{
      {{1, -1}, 1.0}, {{0, 0}, 0.0}, {{0, 1}, 1.0}, {{0, 2}, 2.0}};
  CHECK(eval_objective(node, h, map_values(vals)) == 5.0 + 2.0 * 3.0);
}

namespace {

ModelGraph clean_two_node_graph() {
  ModelGraph g;
  g.horizon = make_horizon(3, 1.0, 1.0);

  NodeBlock a;
  a.name = "source";
  a.variables.push_back({"q", VarKind::External, VarShape::TimeIndexed, 0.0, kInf, ""});
  a.variables.push_back({"cap", VarKind::Internal, VarShape::Scalar, 0.0, kInf, ""});
  ConstraintBlock sizing;
  sizing.name = "sizing";
  sizing.expr.add_rel(0, 0, 1.0).add_scalar(1, -1.0);
  sizing.sense = Sense::Le;
  sizing.expansion = full_range(3);
  a.constraints.push_back(sizing);
  a.objective.add_scalar(1, 10.0);
  g.nodes.push_back(a);

  NodeBlock b;
  b.name = "sink";
  b.variables.push_back({"q", VarKind::External, VarShape::TimeIndexed, 0.0, kInf, ""});
  g.nodes.push_back(b);

  HyperedgeBlock e;
  e.name = "balance";
  e.tail.push_back({"source", "q"});
  e.head.push_back({"sink", "q"});
  ConstraintBlock bal;
  bal.name = "conservation";
  bal.expr.add_rel(0, 0, 1.0).add_rel(1, 0, -1.0);
  bal.sense = Sense::Eq;
  bal.expansion = full_range(3);
  e.constraints.push_back(bal);
  g.hyperedges.push_back(e);
  return g;
}

} // namespace

TEST_CASE("well-formed two-node one-hyperedge graph validates cleanly") {
  ModelGraph g = clean_two_node_graph();
  CHECK(validate_graph(g).empty());
}

TEST_CASE("hyperedge referencing an internal variable is diagnosed") {
  ModelGraph g = clean_two_node_graph();
  g.nodes[0].variables.push_back(
      {"spill", VarKind::Internal, VarShape::TimeIndexed, 0.0, kInf, ""});
  g.hyperedges[0].head[0] = {"source", "spill"};
  auto diags = validate_graph(g);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].rule == "non-external-variable");
  CHECK(diags[0].block == "balance");
}

TEST_CASE("offset past the horizon end reports the first violating index") {
  ModelGraph g = clean_two_node_graph();
  ConstraintBlock delayed;
  delayed.name = "delayed";
  delayed.expr.add_rel(0, 2, 1.0); // q_{t+2} with T = 3
  delayed.sense = Sense::Eq;
  delayed.expansion = full_range(3);
  g.nodes[0].constraints.push_back(delayed);
  auto diags = validate_graph(g);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].rule == "index-out-of-range");
  // t=0 resolves to 2 (= T-1, legal); t=1 is the first escape.
  CHECK(diags[0].index == 1);
}

TEST_CASE("validation catches structural mistakes") {
  SUBCASE("duplicate node names") {
    ModelGraph g = clean_two_node_graph();
    g.nodes.push_back(g.nodes[0]);
    auto diags = validate_graph(g);
    REQUIRE(!diags.empty());
    CHECK(diags[0].rule == "duplicate-node");
  }
  SUBCASE("inverted bounds") {
    ModelGraph g = clean_two_node_graph();
    g.nodes[0].variables[0].lb = 2.0;
    g.nodes[0].variables[0].ub = 1.0;
    auto diags = validate_graph(g);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule == "bad-bounds");
  }
  SUBCASE("tail and head must be disjoint") {
    ModelGraph g = clean_two_node_graph();
    g.hyperedges[0].head[0] = g.hyperedges[0].tail[0];
    auto diags = validate_graph(g);
    REQUIRE(!diags.empty());
    CHECK(diags[0].rule == "tail-head-overlap");
  }
  SUBCASE("unknown node and variable references") {
    ModelGraph g = clean_two_node_graph();
    g.hyperedges[0].head[0] = {"nowhere", "q"};
    g.hyperedges[0].tail[0] = {"source", "phantom"};
    auto diags = validate_graph(g);
    CHECK(diags.size() == 2);
  }
  SUBCASE("series length must match the horizon") {
    ModelGraph g = clean_two_node_graph();
    int s = g.nodes[0].add_series({1.0, 2.0}); // T is 3
    g.nodes[0].constraints[0].expr.terms[0].series = s;
    auto diags = validate_graph(g);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule == "bad-series");
  }
  SUBCASE("scalar variable referenced with a time index") {
    ModelGraph g = clean_two_node_graph();
    ConstraintBlock bad;
    bad.name = "bad";
    bad.expr.add_rel(1, 0, 1.0); // cap is scalar
    bad.expansion = {0};
    g.nodes[0].constraints.push_back(bad);
    auto diags = validate_graph(g);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].rule == "time-ref-on-scalar");
  }
}
