#include "hubopt/blocks.hpp"

#include <algorithm>
#include <cmath>

namespace hubopt {

double annualize_capex(double capex, double lifetime_years,
                       std::optional<double> wacc) {
  if (!(lifetime_years > 0.0))
    throw ValidationError("annualize: lifetime must be > 0, got " +
                          std::to_string(lifetime_years));
  if (capex < 0.0)
    throw ValidationError("annualize: capex must be >= 0");
  if (!wacc || *wacc == 0.0) return capex / lifetime_years;
  double w = *wacc;
  if (w < 0.0) throw ValidationError("annualize: wacc must be >= 0");
  return capex * w / (1.0 - std::pow(1.0 + w, -lifetime_years));
}

namespace {

void require_series(const std::vector<double>& s, int T,
                    const std::string& owner, const std::string& what) {
  if (!s.empty() && static_cast<int>(s.size()) != T)
    throw ValidationError(owner + ": " + what + " series has length " +
                          std::to_string(s.size()) + ", horizon needs " +
                          std::to_string(T));
}

double annualized_or_throw(const CapexSpec& cost, const std::string& owner) {
  if (!cost.annualized)
    throw ValidationError(owner + ": investment cost has not been annualized");
  return *cost.annualized;
}

// Appends the VOM part of an objective: coeff * flow_var summed over t,
// with either a constant or a time-varying rate.
void add_vom(NodeBlock& node, const CapexSpec& cost, int var, double scale) {
  if (!cost.vom_series.empty()) {
    int s = node.add_series(cost.vom_series);
    node.objective.add_rel(var, 0, scale, s);
  } else if (cost.vom != 0.0) {
    node.objective.add_rel(var, 0, cost.vom * scale);
  }
}

} // namespace

NodeBlock build_conversion_node(const ConversionSpec& spec,
                                const TimeHorizon& horizon) {
  const int T = horizon.T;
  const std::string& who = spec.name;

  if (spec.commodities.empty())
    throw ValidationError(who + ": conversion node needs at least one flow");
  auto find = [&](const std::string& c) {
    for (size_t k = 0; k < spec.commodities.size(); ++k)
      if (spec.commodities[k].name == c) return static_cast<int>(k);
    return -1;
  };
  for (size_t a = 0; a < spec.commodities.size(); ++a)
    for (size_t b = a + 1; b < spec.commodities.size(); ++b)
      if (spec.commodities[a].name == spec.commodities[b].name)
        throw ValidationError(who + ": duplicate commodity '" +
                              spec.commodities[a].name + "'");
  int r = find(spec.reference);
  int rp = find(spec.sizing);
  if (r < 0)
    throw ValidationError(who + ": reference commodity '" + spec.reference +
                          "' is not among the flows");
  if (rp < 0)
    throw ValidationError(who + ": sizing commodity '" + spec.sizing +
                          "' is not among the flows");
  for (const CommodityFlow& c : spec.commodities) {
    if (c.phi < 0.0 || !std::isfinite(c.phi))
      throw ValidationError(who + ": conversion factor for '" + c.name +
                            "' must be finite and >= 0");
    if (c.tau < 0)
      throw ValidationError(who + ": delay for '" + c.name +
                            "' must be >= 0");
    if (c.tau >= T)
      throw ValidationError(who + ": delay " + std::to_string(c.tau) +
                            " on '" + c.name + "' reaches past the horizon");
  }
  if (spec.commodities[r].tau != 0)
    throw ValidationError(who + ": reference commodity cannot be delayed");
  if (spec.commodities[r].phi != 1.0)
    throw ValidationError(who + ": reference commodity must have factor 1");
  double phi_rp = spec.commodities[rp].phi;
  if (phi_rp <= 0.0)
    throw ValidationError(who + ": sizing commodity needs a positive factor");
  if (spec.mu < 0.0 || spec.mu > 1.0)
    throw ValidationError(who + ": minimum level must lie in [0,1]");
  if (spec.delta_plus < 0.0 || spec.delta_plus > 1.0 ||
      spec.delta_minus < 0.0 || spec.delta_minus > 1.0)
    throw ValidationError(who + ": ramp limits must lie in [0,1]");
  if (spec.kappa_existing < 0.0)
    throw ValidationError(who + ": existing capacity must be >= 0");
  if (spec.kappa_max < spec.kappa_existing)
    throw ValidationError(who + ": capacity bound below existing capacity");
  require_series(spec.availability, T, who, "availability");
  for (double v : spec.availability)
    if (v < 0.0 || v > 1.0)
      throw ValidationError(who + ": availability values must lie in [0,1]");
  require_series(spec.cost.vom_series, T, who, "VOM");
  double zeta = annualized_or_throw(spec.cost, who);

  NodeBlock node;
  node.name = spec.name;
  for (const CommodityFlow& c : spec.commodities)
    node.variables.push_back(
        {c.name, VarKind::External, VarShape::TimeIndexed, 0.0, kInf, c.unit});
  int K = static_cast<int>(node.variables.size());
  node.variables.push_back(
      {"capacity", VarKind::Internal, VarShape::Scalar, 0.0, kInf, ""});

  int pi = spec.availability.empty() ? -1 : node.add_series(spec.availability);

  // Conversion relations: q_{i,t+tau_i} = phi_i * q_{r,t}.
  for (size_t k = 0; k < spec.commodities.size(); ++k) {
    if (static_cast<int>(k) == r) continue;
    const CommodityFlow& c = spec.commodities[k];
    ConstraintBlock cb;
    cb.name = "convert:" + c.name;
    cb.sense = Sense::Eq;
    cb.expr.add_rel(static_cast<int>(k), c.tau, 1.0);
    cb.expr.add_rel(r, 0, -c.phi);
    cb.expansion = index_range(0, T - c.tau);
    node.constraints.push_back(std::move(cb));
  }

  // Nothing can arrive on a delayed flow before its first deliverable
  // period, so pin those hours to zero; otherwise the truncated window
  // would leave them free and the horizon edge could act as a source.
  for (size_t k = 0; k < spec.commodities.size(); ++k) {
    const CommodityFlow& c = spec.commodities[k];
    if (c.tau == 0) continue;
    ConstraintBlock cb;
    cb.name = "cold_start:" + c.name;
    cb.sense = Sense::Eq;
    cb.expr.add_rel(static_cast<int>(k), 0, 1.0);
    cb.expansion = index_range(0, c.tau);
    node.constraints.push_back(std::move(cb));
  }

  // Sizing: q_{r',t} <= pi_t * (existing + new capacity).
  {
    ConstraintBlock cb;
    cb.name = "sizing";
    cb.sense = Sense::Le;
    cb.expr.add_rel(rp, 0, 1.0);
    if (pi >= 0) {
      cb.expr.add(K, TimeRefKind::Scalar, 0, -1.0, pi);
      cb.expr.constant_series = pi;
      cb.expr.constant_series_scale = -spec.kappa_existing;
    } else {
      cb.expr.add_scalar(K, -1.0);
      cb.expr.constant = -spec.kappa_existing;
    }
    cb.expansion = full_range(T);
    node.constraints.push_back(std::move(cb));
  }

  if (std::isfinite(spec.kappa_max)) {
    ConstraintBlock cb;
    cb.name = "capacity_bound";
    cb.sense = Sense::Le;
    cb.expr.add_scalar(K, 1.0);
    cb.expr.constant = spec.kappa_existing - spec.kappa_max;
    cb.expansion = {0};
    node.constraints.push_back(std::move(cb));
  }

  // Minimum level and ramping, expressed in sizing-commodity units via the
  // factor ratio; zero-factor flows are pinned to zero and skipped.
  if (spec.mu > 0.0) {
    for (size_t k = 0; k < spec.commodities.size(); ++k) {
      const CommodityFlow& c = spec.commodities[k];
      if (c.phi <= 0.0) continue;
      ConstraintBlock cb;
      cb.name = "min_level:" + c.name;
      cb.sense = Sense::Le;
      cb.expr.add_scalar(K, spec.mu);
      cb.expr.add_rel(static_cast<int>(k), 0, -phi_rp / c.phi);
      cb.expr.constant = spec.mu * spec.kappa_existing;
      cb.expansion = full_range(T);
      node.constraints.push_back(std::move(cb));
    }
  }
  if (T > 1) {
    for (size_t k = 0; k < spec.commodities.size(); ++k) {
      const CommodityFlow& c = spec.commodities[k];
      if (c.phi <= 0.0) continue;
      double scale = phi_rp / c.phi;
      if (spec.delta_plus < 1.0) {
        ConstraintBlock cb;
        cb.name = "ramp_up:" + c.name;
        cb.sense = Sense::Le;
        cb.expr.add_rel(static_cast<int>(k), 0, scale);
        cb.expr.add_rel(static_cast<int>(k), -1, -scale);
        cb.expr.add_scalar(K, -spec.delta_plus);
        cb.expr.constant = -spec.delta_plus * spec.kappa_existing;
        cb.expansion = index_range(1, T);
        node.constraints.push_back(std::move(cb));
      }
      if (spec.delta_minus < 1.0) {
        ConstraintBlock cb;
        cb.name = "ramp_down:" + c.name;
        cb.sense = Sense::Le;
        cb.expr.add_rel(static_cast<int>(k), -1, scale);
        cb.expr.add_rel(static_cast<int>(k), 0, -scale);
        cb.expr.add_scalar(K, -spec.delta_minus);
        cb.expr.constant = -spec.delta_minus * spec.kappa_existing;
        cb.expansion = index_range(1, T);
        node.constraints.push_back(std::move(cb));
      }
    }
  }

  double fixed = horizon.years * (zeta + spec.cost.fom);
  if (fixed != 0.0) node.objective.add_scalar(K, fixed);
  add_vom(node, spec.cost, rp, horizon.dt);
  return node;
}

NodeBlock build_storage_node(const StorageSpec& spec,
                             const TimeHorizon& horizon) {
  const int T = horizon.T;
  const std::string& who = spec.name;

  auto in01 = [&](double v, const char* what) {
    if (v < 0.0 || v > 1.0)
      throw ValidationError(who + ": " + what + " must lie in [0,1]");
  };
  in01(spec.eta_self, "self-discharge");
  in01(spec.eta_charge, "charge efficiency");
  in01(spec.eta_discharge, "discharge efficiency");
  in01(spec.sigma, "minimum inventory fraction");
  if (spec.eta_discharge == 0.0)
    throw ValidationError(who + ": discharge efficiency must be > 0");
  if (!(spec.rho > 0.0))
    throw ValidationError(who + ": discharge-to-charge ratio must be > 0");
  if (spec.epsilon_existing < 0.0 || spec.kappa_existing < 0.0)
    throw ValidationError(who + ": existing capacities must be >= 0");
  if (spec.epsilon_max < spec.epsilon_existing)
    throw ValidationError(who + ": stock bound below existing stock");
  if (spec.aux && spec.aux->phi < 0.0)
    throw ValidationError(who + ": auxiliary factor must be >= 0");
  if (spec.inflow == spec.outflow)
    throw ValidationError(who + ": inflow and outflow need distinct names");
  require_series(spec.stock_cost.vom_series, T, who, "stock VOM");
  require_series(spec.flow_cost.vom_series, T, who, "flow VOM");
  double varsigma = annualized_or_throw(spec.stock_cost, who);
  double zeta = annualized_or_throw(spec.flow_cost, who);

  NodeBlock node;
  node.name = spec.name;
  node.variables.push_back({spec.inflow, VarKind::External,
                            VarShape::TimeIndexed, 0.0, kInf,
                            spec.commodity_unit});
  node.variables.push_back({spec.outflow, VarKind::External,
                            VarShape::TimeIndexed, 0.0, kInf,
                            spec.commodity_unit});
  int qi = 0, qj = 1;
  int ql = -1;
  if (spec.aux) {
    ql = static_cast<int>(node.variables.size());
    node.variables.push_back({spec.aux->name, VarKind::External,
                              VarShape::TimeIndexed, 0.0, kInf,
                              spec.aux->unit});
  }
  int e = static_cast<int>(node.variables.size());
  node.variables.push_back({"stock", VarKind::Internal, VarShape::TimeIndexed,
                            0.0, kInf, spec.commodity_unit});
  int E = static_cast<int>(node.variables.size());
  node.variables.push_back(
      {"stock_capacity", VarKind::Internal, VarShape::Scalar, 0.0, kInf, ""});
  int K = static_cast<int>(node.variables.size());
  node.variables.push_back(
      {"flow_capacity", VarKind::Internal, VarShape::Scalar, 0.0, kInf, ""});

  // Inventory dynamics over consecutive periods.
  if (T > 1) {
    ConstraintBlock cb;
    cb.name = "dynamics";
    cb.sense = Sense::Eq;
    cb.expr.add_rel(e, 1, 1.0);
    cb.expr.add_rel(e, 0, -(1.0 - spec.eta_self));
    cb.expr.add_rel(qi, 0, -spec.eta_charge);
    cb.expr.add_rel(qj, 0, 1.0 / spec.eta_discharge);
    cb.expansion = index_range(0, T - 1);
    node.constraints.push_back(std::move(cb));
  }

  if (ql >= 0) {
    ConstraintBlock cb;
    cb.name = "charge_power";
    cb.sense = Sense::Eq;
    cb.expr.add_rel(ql, 0, 1.0);
    cb.expr.add_rel(qi, 0, -spec.aux->phi);
    cb.expansion = full_range(T);
    node.constraints.push_back(std::move(cb));
  }

  {
    ConstraintBlock cb;
    cb.name = "cyclicity";
    cb.sense = Sense::Eq;
    cb.expr.add_abs(e, 0, 1.0);
    if (T > 1) cb.expr.add_abs(e, T - 1, -1.0);
    else cb.expr.terms.clear(); // e_0 = e_0 carries no information
    if (!cb.expr.terms.empty()) {
      cb.expansion = {0};
      node.constraints.push_back(std::move(cb));
    }
  }

  {
    ConstraintBlock cb;
    cb.name = "stock_sizing";
    cb.sense = Sense::Le;
    cb.expr.add_rel(e, 0, 1.0);
    cb.expr.add_scalar(E, -1.0);
    cb.expr.constant = -spec.epsilon_existing;
    cb.expansion = full_range(T);
    node.constraints.push_back(std::move(cb));
  }

  if (std::isfinite(spec.epsilon_max)) {
    ConstraintBlock cb;
    cb.name = "stock_bound";
    cb.sense = Sense::Le;
    cb.expr.add_scalar(E, 1.0);
    cb.expr.constant = spec.epsilon_existing - spec.epsilon_max;
    cb.expansion = {0};
    node.constraints.push_back(std::move(cb));
  }

  if (spec.sigma > 0.0) {
    ConstraintBlock cb;
    cb.name = "min_inventory";
    cb.sense = Sense::Le;
    cb.expr.add_scalar(E, spec.sigma);
    cb.expr.add_rel(e, 0, -1.0);
    cb.expr.constant = spec.sigma * spec.epsilon_existing;
    cb.expansion = full_range(T);
    node.constraints.push_back(std::move(cb));
  }

  {
    ConstraintBlock cb;
    cb.name = "charge_sizing";
    cb.sense = Sense::Le;
    cb.expr.add_rel(qi, 0, 1.0);
    cb.expr.add_scalar(K, -1.0);
    cb.expr.constant = -spec.kappa_existing;
    cb.expansion = full_range(T);
    node.constraints.push_back(std::move(cb));
  }

  {
    ConstraintBlock cb;
    cb.name = "discharge_sizing";
    cb.sense = Sense::Le;
    cb.expr.add_rel(qj, 0, 1.0);
    cb.expr.add_scalar(K, -spec.rho);
    cb.expr.constant = -spec.rho * spec.kappa_existing;
    cb.expansion = full_range(T);
    node.constraints.push_back(std::move(cb));
  }

  double stock_fixed = horizon.years * (varsigma + spec.stock_cost.fom);
  if (stock_fixed != 0.0) node.objective.add_scalar(E, stock_fixed);
  // Inventory VOM is charged per period without a period-length factor.
  add_vom(node, spec.stock_cost, e, 1.0);
  double flow_fixed = horizon.years * (zeta + spec.flow_cost.fom);
  if (flow_fixed != 0.0) node.objective.add_scalar(K, flow_fixed);
  add_vom(node, spec.flow_cost, qi, horizon.dt);
  return node;
}

HyperedgeBlock build_conservation_hyperedge(const ConservationSpec& spec,
                                            const TimeHorizon& horizon) {
  const int T = horizon.T;
  if (spec.tail.empty() && spec.head.empty())
    throw ValidationError(spec.name + ": balance needs at least one member");
  require_series(spec.lambda_series, T, spec.name, "withdrawal");
  if (spec.sense == Sense::Le)
    throw ValidationError(spec.name + ": balance sense must be = or >=");

  HyperedgeBlock edge;
  edge.name = spec.name;
  edge.tail = spec.tail;
  edge.head = spec.head;

  ConstraintBlock cb;
  cb.name = "balance";
  cb.sense = spec.sense;
  int32_t idx = 0;
  for (size_t k = 0; k < spec.tail.size(); ++k) cb.expr.add_rel(idx++, 0, 1.0);
  for (size_t k = 0; k < spec.head.size(); ++k) cb.expr.add_rel(idx++, 0, -1.0);
  if (!spec.lambda_series.empty()) {
    cb.expr.constant_series = edge.add_series(spec.lambda_series);
    cb.expr.constant_series_scale = -1.0;
  } else {
    cb.expr.constant = -spec.lambda;
  }
  cb.expansion = full_range(T);
  edge.constraints.push_back(std::move(cb));
  return edge;
}

} // namespace hubopt
