#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hubopt/model.hpp"

// Template library: parameterized builders that expand a technology or
// balance description into a NodeBlock / HyperedgeBlock.
//
// Convention for conversion factors: phi_i is the quantity of commodity i
// produced or consumed per unit of the reference commodity r, matching the
// unit style "GWh_el per kt_H2". The emitted conversion relation is
// q_{i,t+tau_i} - phi_i * q_{r,t} = 0, and capacity-fraction constraints
// (minimum level, ramping) scale flow i by phi_{r'} / phi_i to express it
// in units of the sizing commodity r'.

namespace hubopt {

struct CapexSpec {
  double capex = 0.0;    // investment cost per capacity unit
  double fom = 0.0;      // fixed O&M per capacity unit per year
  double vom = 0.0;      // variable O&M per flow or stock unit
  std::vector<double> vom_series; // optional time-varying VOM (length T)
  double lifetime = 1.0; // years
  std::optional<double> annualized; // cached annualized investment cost
};

// Annuity-factor annualization. `wacc` empty selects the zero-financing
// rule capex / lifetime; wacc == 0 returns the same analytic limit.
double annualize_capex(double capex, double lifetime_years,
                       std::optional<double> wacc);

enum class FlowDir : uint8_t { In, Out };

struct CommodityFlow {
  std::string name;
  FlowDir dir = FlowDir::In;
  double phi = 1.0; // quantity per unit of reference flow; 0 pins the flow
  int tau = 0;      // conversion delay in periods
  std::string unit;
};

struct ConversionSpec {
  std::string name;
  std::vector<CommodityFlow> commodities;
  std::string reference; // r: commodity the conversion relation refers to
  std::string sizing;    // r': commodity the capacity is expressed in
  std::vector<double> availability; // pi_t in [0,1]; empty = always 1
  double kappa_existing = 0.0;      // pre-installed capacity
  double kappa_max = kInf;          // deployment bound, +inf = none
  double mu = 0.0;                  // minimum operating level fraction
  double delta_plus = 1.0;          // ramp-up limit as capacity fraction
  double delta_minus = 1.0;         // ramp-down limit as capacity fraction
  CapexSpec cost;
};

struct AuxFlow {
  std::string name;
  double phi = 0.0; // aux quantity consumed per unit of charge flow
  std::string unit;
};

struct StorageSpec {
  std::string name;
  std::string inflow = "charge";
  std::string outflow = "discharge";
  std::optional<AuxFlow> aux;
  double eta_self = 0.0;    // self-discharge per period
  double eta_charge = 1.0;  // charge efficiency
  double eta_discharge = 1.0; // discharge efficiency
  double sigma = 0.0;       // minimum inventory fraction
  double epsilon_existing = 0.0; // pre-installed stock capacity
  double epsilon_max = kInf;     // stock deployment bound
  double kappa_existing = 0.0;   // pre-installed charge-flow capacity
  double rho = 1.0;         // discharge-to-charge capacity ratio
  CapexSpec stock_cost;
  CapexSpec flow_cost;
  std::string commodity_unit;
};

struct ConservationSpec {
  std::string name;
  std::vector<MemberRef> tail;
  std::vector<MemberRef> head;
  double lambda = 0.0;               // uniform exogenous withdrawal
  std::vector<double> lambda_series; // time-varying withdrawal (length T)
  Sense sense = Sense::Eq;           // Eq or Ge (net flow may exceed lambda)
};

// Expands a conversion technology: external flow variables per commodity,
// an internal capacity variable, conversion equalities (delayed commodities
// truncated to indices that stay inside the horizon, with the pre-delay
// hours of the delayed flow pinned to zero), availability-scaled sizing,
// optional capacity bound, minimum-level rows when mu > 0, ramping rows
// when a delta limit is below 1, and the annualized-cost objective.
NodeBlock build_conversion_node(const ConversionSpec& spec,
                                const TimeHorizon& horizon);

// Expands a storage technology: charge/discharge (and optional auxiliary)
// external flows, internal inventory path plus stock and flow capacities,
// inventory dynamics, cyclicity, sizing and bound rows, and the two-part
// stock/flow objective.
NodeBlock build_storage_node(const StorageSpec& spec,
                             const TimeHorizon& horizon);

// Expands a commodity balance: sum of tail flows minus sum of head flows
// equals (or exceeds) the exogenous withdrawal at every period.
HyperedgeBlock build_conservation_hyperedge(const ConservationSpec& spec,
                                            const TimeHorizon& horizon);

} // namespace hubopt
