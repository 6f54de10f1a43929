#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hubopt/blocks.hpp"
#include "hubopt/lp.hpp"
#include "hubopt/series.hpp"
#include "hubopt/solve.hpp"

// The bundled case study: a two-cluster synthetic-methane supply chain
// (inland renewables, coastal conversion hub, overseas destination) built
// from a technology parameter table and capacity-factor series, plus the
// scenario sweep and reporting around it.

namespace hubopt {

// Higher heating value of methane in GWh per kt (15.441 kWh/kg). Used to
// translate the annual energy demand into a mass withdrawal and to price
// technologies whose capacity is quoted in energy units.
inline constexpr double kHhvCh4 = 15.441;

struct TechParam {
  double value = 0.0;
  std::string unit;
};

struct TechRecord {
  std::string group; // "conversion" or "storage"
  std::map<std::string, TechParam> params;

  bool has(const std::string& name) const;
  double get(const std::string& name) const; // throws when absent
  double get_or(const std::string& name, double fallback) const;
};

struct TechnologyTable {
  std::map<std::string, TechRecord> records;
  const TechRecord& at(const std::string& technology) const;
};

// Reads the long-format parameter file: one "group,technology,parameter,
// value,unit" row per line, '#' starting a comment. Duplicate rows error.
TechnologyTable load_technology_table(const std::string& path);

// Aggregate berthing schedule of `n_vessels` staggered binary schedules,
// each with `load_window_hours` consecutive one-hours per `cycle_hours`,
// phases offset by floor(cycle / n). Requires n * window <= cycle so the
// individual windows cannot overlap.
AvailabilitySeries build_vessel_schedule(int n_vessels, int cycle_hours,
                                         int load_window_hours, int T);

enum class WaccMode : uint8_t { Value, ZeroFinancing };

struct HubConfig {
  double demand_twh_per_year = 10.0; // delivered methane, HHV
  WaccMode wacc_mode = WaccMode::Value;
  double wacc = 0.07;
  int vessels = 7;
  int vessel_cycle_hours = 168; // weekly rotation
  int vessel_load_window_hours = 24;
};

// Destination withdrawal in kt/h equivalent to an annual demand in TWh
// (HHV): demand * 1e3 / 8760 / kHhvCh4.
double demand_kt_per_hour(double demand_twh_per_year);

// Builds the reference system: conversion nodes {solar, wind, hvdc,
// electrolysis, methanation, desalination, dac, liquefaction, carriers,
// regasification}, storage nodes {battery, h2_storage, co2_storage,
// lch4_hub, lch4_dest, h2o_storage}, and the nine balance hyperedges
// (water relaxed to >=, destination methane carrying the withdrawal).
// `series` must provide "solar" and "wind" with length-T values.
ModelGraph reference_system(
    const TechnologyTable& tables,
    const std::map<std::string, AvailabilitySeries>& series,
    const HubConfig& config, const TimeHorizon& horizon);

struct ScenarioOverride {
  std::string path;   // "<technology>.<parameter>" into the table
  double value = 0.0;
  bool scale = false; // multiply the current value instead of replacing
};

struct ScenarioSpec {
  std::string name;
  std::string base = "reference"; // "reference" or "solar-only"
  std::vector<ScenarioOverride> overrides;
  WaccMode wacc_mode = WaccMode::Value;
  std::string horizon = "2016"; // bundled year label or "full"
};

// The bundled sensitivity set: reference, solar_only, flexibility, the
// investment-cost grid, dac_electric, zero_financing.
std::vector<ScenarioSpec> bundled_scenarios();
ScenarioSpec find_scenario(const std::string& name); // throws, lists names

struct HorizonWindow {
  int offset = 0;     // first series row
  int T = 0;          // periods
  double years = 1.0; // horizon span used to scale annual costs
};

// Maps "2015".."2019" to one-year windows of the bundled series and
// "full" to the whole five-year span.
HorizonWindow horizon_window(const std::string& label);

struct HubContext {
  TechnologyTable tables;
  std::map<std::string, AvailabilitySeries> series; // full-length inputs
  HubConfig config;
  enum class Solver : uint8_t { Auto, Embedded, External };
  Solver solver = Solver::Auto;
  std::string solver_command; // external template; env override applies
  std::string workdir = "hubopt-work";
  SimplexConfig simplex;
  std::optional<HorizonWindow> window_override; // replaces label lookup
};

// Reads data/technologies.csv and the bundled capacity-factor series
// (full length) from a data directory.
HubContext load_bundled_context(const std::string& data_dir);

struct CostLine {
  std::string node;
  std::string group; // electricity | hydrogen | co2 | water | methane
  double annual_meur = 0.0;  // node objective divided by horizon years
  double eur_per_mwh = 0.0;  // annual cost over annual demand
};

struct CostBreakdown {
  std::vector<CostLine> lines; // node declaration order
  double total_annual_meur = 0.0;
  double total_eur_per_mwh = 0.0;
  double demand_twh_per_year = 0.0;
};

struct CapacityLine {
  std::string node;
  std::string component; // "capacity", "stock" or "flow"
  double value = 0.0;    // existing plus built
  std::string unit;
  double capacity_factor = 0.0; // mean utilisation of the component
};

struct FlowLine {
  std::string node;
  std::string variable;
  double per_year = 0.0; // horizon integral of the flow over years
  std::string unit;      // GWh or kt per year
};

struct CurtailmentLine {
  std::string node;
  double twh_per_year = 0.0;
};

struct BalanceReport {
  std::vector<FlowLine> flows;
  std::vector<CapacityLine> capacities;
  std::vector<CurtailmentLine> curtailment;
  double curtailment_twh_per_year = 0.0;
  double electricity_twh_per_year = 0.0; // solar plus wind production
  double delivered_twh_per_year = 0.0;   // regasified methane, HHV
  double chain_efficiency = 0.0;         // delivered over electricity
};

// Splits the objective by node; every line is (node objective / years)
// in MEUR per year and its EUR/MWh share of delivered energy. The lines
// sum to the totals exactly up to floating-point association.
CostBreakdown cost_breakdown(const Solution& solution,
                             const ModelGraph& graph,
                             double demand_twh_per_year);

// Annualized flows, capacities with mean utilisation, renewable
// curtailment, and the electricity-to-methane chain efficiency.
BalanceReport energy_balance(const Solution& solution,
                             const ModelGraph& graph);

enum class ReportFormat : uint8_t { Table, Machine };

struct ReportFile {
  std::string name;
  std::string content;
};

// Deterministic report files: cost, capacity and flow tables plus a
// key-value summary. Machine format is comma-separated with shortest
// round-trip numbers; Table format is aligned text.
std::vector<ReportFile> emit_report(const CostBreakdown& cost,
                                    const BalanceReport& balance,
                                    ReportFormat format);

// Inverse of the machine-format cost table.
CostBreakdown parse_cost_breakdown(const std::string& text);

void write_report_files(const std::vector<ReportFile>& files,
                        const std::string& directory);

struct ScenarioResult {
  ScenarioSpec spec;
  ModelGraph graph;
  VariableIndex index;
  SparseLP lp;
  Solution solution;
  CostBreakdown cost;
  BalanceReport balance;
};

// Applies the scenario to the technology table and assembles the program
// without solving it; solution and reports stay empty.
ScenarioResult build_scenario(const HubContext& ctx, const ScenarioSpec& spec);

// Applies the scenario to the technology table, builds and solves the
// system (embedded for small instances, external bridge otherwise), and
// computes both reports. Solver failures carry the scenario name.
ScenarioResult run_scenario(const HubContext& ctx, const ScenarioSpec& spec);

// Concurrent sweep with per-scenario work directories; `jobs` <= 0 picks
// the hardware concurrency. Results keep the order of `specs`.
std::vector<ScenarioResult> run_scenarios(const HubContext& ctx,
                                          const std::vector<ScenarioSpec>& specs,
                                          int jobs);

} // namespace hubopt
