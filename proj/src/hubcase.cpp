#include "hubopt/hubcase.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace fs = std::filesystem;

namespace hubopt {

namespace {

// Length of the bundled five-year series (2015-2019, hourly, one leap year).
constexpr int kBundledHours = 43824;

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

} // namespace

bool TechRecord::has(const std::string& name) const {
  return params.count(name) != 0;
}

double TechRecord::get(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end())
    throw Error("technology record: missing parameter '" + name + "'");
  return it->second.value;
}

double TechRecord::get_or(const std::string& name, double fallback) const {
  auto it = params.find(name);
  return it == params.end() ? fallback : it->second.value;
}

const TechRecord& TechnologyTable::at(const std::string& technology) const {
  auto it = records.find(technology);
  if (it == records.end())
    throw Error("technology table: missing record '" + technology + "'");
  return it->second;
}

TechnologyTable load_technology_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open technology table");
  TechnologyTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (size_t hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 5)
      throw Error(path + ":" + std::to_string(lineno) +
                  ": expected group,technology,parameter,value,unit");
    const std::string& group = cells[0];
    const std::string& tech = cells[1];
    const std::string& param = cells[2];
    if (group != "conversion" && group != "storage")
      throw Error(path + ":" + std::to_string(lineno) + ": unknown group '" +
                  group + "'");
    double value = 0.0;
    if (!parse_number(cells[3], value))
      throw Error(path + ":" + std::to_string(lineno) + ": bad value '" +
                  cells[3] + "' for " + tech + "." + param);
    TechRecord& rec = table.records[tech];
    if (rec.params.empty()) {
      rec.group = group;
    } else if (rec.group != group) {
      throw Error(path + ":" + std::to_string(lineno) + ": technology '" +
                  tech + "' listed under two groups");
    }
    if (!rec.params.emplace(param, TechParam{value, cells[4]}).second)
      throw Error(path + ":" + std::to_string(lineno) + ": duplicate entry " +
                  tech + "." + param);
  }
  if (table.records.empty()) throw Error(path + ": no records");
  return table;
}

double demand_kt_per_hour(double demand_twh_per_year) {
  return demand_twh_per_year * 1e3 / 8760.0 / kHhvCh4;
}

AvailabilitySeries build_vessel_schedule(int n_vessels, int cycle_hours,
                                         int load_window_hours, int T) {
  if (n_vessels < 1 || cycle_hours < 1 || load_window_hours < 0 || T < 1)
    throw Error("vessel schedule: parameters must be positive");
  if (static_cast<long long>(n_vessels) * load_window_hours > cycle_hours)
    throw Error("vessel schedule: " + std::to_string(n_vessels) + " windows of " +
                std::to_string(load_window_hours) + " h cannot fit in a " +
                std::to_string(cycle_hours) + " h cycle without overlap");
  const int stagger = cycle_hours / n_vessels;
  AvailabilitySeries out;
  out.name = "vessel_schedule";
  out.source = "synthesized: " + std::to_string(n_vessels) + " vessels, " +
               std::to_string(cycle_hours) + " h cycle, " +
               std::to_string(load_window_hours) + " h windows";
  out.values.assign(static_cast<size_t>(T), 0.0);
  for (int v = 0; v < n_vessels; ++v) {
    const int phase = v * stagger;
    for (int t = 0; t < T; ++t) {
      int pos = (t - phase) % cycle_hours;
      if (pos < 0) pos += cycle_hours;
      if (pos < load_window_hours) out.values[static_cast<size_t>(t)] += 1.0;
    }
  }
  return out;
}

namespace {

CapexSpec make_cost(const TechRecord& rec, const std::string& prefix,
                    const HubConfig& config, double capacity_scale = 1.0) {
  CapexSpec c;
  c.capex = rec.get_or(prefix + "capex", 0.0) * capacity_scale;
  c.fom = rec.get_or(prefix + "fom", 0.0) * capacity_scale;
  c.vom = rec.get_or(prefix + "vom", 0.0) * capacity_scale;
  if (c.capex > 0.0) {
    c.lifetime = rec.get(prefix + "lifetime");
    c.annualized = annualize_capex(
        c.capex, c.lifetime,
        config.wacc_mode == WaccMode::Value
            ? std::optional<double>(config.wacc)
            : std::nullopt);
  } else {
    c.annualized = 0.0;
  }
  return c;
}

bool all_ones(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 1.0; });
}

} // namespace

ModelGraph reference_system(
    const TechnologyTable& tables,
    const std::map<std::string, AvailabilitySeries>& series,
    const HubConfig& config, const TimeHorizon& horizon) {
  auto need_series = [&](const std::string& name) {
    auto it = series.find(name);
    if (it == series.end())
      throw Error("reference system: missing series '" + name + "'");
    return it->second.values;
  };

  ModelGraph g;
  g.horizon = horizon;

  auto base = [&](const TechRecord& r, ConversionSpec& s) {
    s.mu = r.get_or("mu", 0.0);
    s.delta_plus = s.delta_minus = r.get_or("delta", 1.0);
    s.kappa_existing = r.get_or("kappa_existing", 0.0);
    s.kappa_max = r.get_or("kappa_max", kInf);
  };
  auto conversion = [&](ConversionSpec& s) {
    g.nodes.push_back(build_conversion_node(s, horizon));
  };

  { // solar PV plants
    const TechRecord& r = tables.at("solar");
    ConversionSpec s;
    s.name = "solar";
    s.commodities = {{"power", FlowDir::Out, 1.0, 0, "GW"}};
    s.reference = s.sizing = "power";
    s.availability = need_series("solar");
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }
  { // wind power plants
    const TechRecord& r = tables.at("wind");
    ConversionSpec s;
    s.name = "wind";
    s.commodities = {{"power", FlowDir::Out, 1.0, 0, "GW"}};
    s.reference = s.sizing = "power";
    s.availability = need_series("wind");
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }
  { // inland battery
    const TechRecord& r = tables.at("battery");
    StorageSpec s;
    s.name = "battery";
    s.eta_self = r.get("eta_s");
    s.eta_charge = r.get("eta_plus");
    s.eta_discharge = r.get("eta_minus");
    s.sigma = r.get("sigma");
    s.rho = r.get("rho");
    s.epsilon_existing = r.get_or("epsilon_existing", 0.0);
    s.epsilon_max = r.get_or("epsilon_max", kInf);
    s.stock_cost = make_cost(r, "stock.", config);
    s.flow_cost = make_cost(r, "flow.", config);
    s.commodity_unit = "GW";
    g.nodes.push_back(build_storage_node(s, horizon));
  }
  { // transmission link between the clusters, sized at the sending end
    const TechRecord& r = tables.at("hvdc");
    ConversionSpec s;
    s.name = "hvdc";
    s.commodities = {
        {"power_in", FlowDir::In, 1.0, 0, "GW"},
        {"power_out", FlowDir::Out, r.get("phi.power_out"), 0, "GW"}};
    s.reference = s.sizing = "power_in";
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }

  auto storage = [&](const std::string& node_name,
                     const std::string& record_name,
                     const std::string& unit) {
    const TechRecord& r = tables.at(record_name);
    StorageSpec s;
    s.name = node_name;
    s.eta_self = r.get("eta_s");
    s.eta_charge = r.get("eta_plus");
    s.eta_discharge = r.get("eta_minus");
    s.sigma = r.get("sigma");
    s.rho = r.get("rho");
    s.epsilon_existing = r.get_or("epsilon_existing", 0.0);
    s.epsilon_max = r.get_or("epsilon_max", kInf);
    if (r.has("phi.power")) s.aux = AuxFlow{"power", r.get("phi.power"), "GW"};
    s.stock_cost = make_cost(r, "stock.", config);
    s.flow_cost = make_cost(r, "flow.", config);
    s.commodity_unit = unit;
    g.nodes.push_back(build_storage_node(s, horizon));
  };

  { // electrolysis, sized by its power intake
    const TechRecord& r = tables.at("electrolysis");
    ConversionSpec s;
    s.name = "electrolysis";
    s.commodities = {{"power", FlowDir::In, r.get("phi.power"), 0, "GW"},
                     {"water", FlowDir::In, r.get("phi.water"), 0, "kt/h"},
                     {"hydrogen", FlowDir::Out, 1.0, 0, "kt/h"},
                     {"oxygen", FlowDir::Out, r.get("phi.oxygen"), 0, "kt/h"}};
    s.reference = "hydrogen";
    s.sizing = "power";
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }
  storage("h2_storage", "h2_storage", "kt/h");
  { // direct air capture
    const TechRecord& r = tables.at("dac");
    ConversionSpec s;
    s.name = "dac";
    s.commodities = {{"power", FlowDir::In, r.get("phi.power"), 0, "GW"},
                     {"hydrogen", FlowDir::In, r.get("phi.hydrogen"), 0, "kt/h"},
                     {"water", FlowDir::In, r.get("phi.water"), 0, "kt/h"},
                     {"co2", FlowDir::Out, 1.0, 0, "kt/h"}};
    s.reference = s.sizing = "co2";
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }
  storage("co2_storage", "co2_storage", "kt/h");
  { // seawater desalination
    const TechRecord& r = tables.at("desalination");
    ConversionSpec s;
    s.name = "desalination";
    s.commodities = {{"power", FlowDir::In, r.get("phi.power"), 0, "GW"},
                     {"water", FlowDir::Out, 1.0, 0, "kt/h"}};
    s.reference = s.sizing = "water";
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }
  storage("h2o_storage", "h2o_storage", "kt/h");
  { // methanation; capacity costs are quoted per GW of methane (HHV)
    // while flows are in kt/h, and one kt/h is kHhvCh4 GW.
    const TechRecord& r = tables.at("methanation");
    ConversionSpec s;
    s.name = "methanation";
    s.commodities = {{"hydrogen", FlowDir::In, r.get("phi.hydrogen"), 0, "kt/h"},
                     {"co2", FlowDir::In, r.get("phi.co2"), 0, "kt/h"},
                     {"water", FlowDir::Out, r.get("phi.water"), 0, "kt/h"},
                     {"methane", FlowDir::Out, 1.0, 0, "kt/h"}};
    s.reference = s.sizing = "methane";
    base(r, s);
    s.cost = make_cost(r, "", config, kHhvCh4);
    conversion(s);
  }
  { // methane liquefaction
    const TechRecord& r = tables.at("liquefaction");
    ConversionSpec s;
    s.name = "liquefaction";
    s.commodities = {{"methane", FlowDir::In, r.get("phi.methane"), 0, "kt/h"},
                     {"power", FlowDir::In, r.get("phi.power"), 0, "GW"},
                     {"lch4", FlowDir::Out, 1.0, 0, "kt/h"}};
    s.reference = s.sizing = "lch4";
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }
  storage("lch4_hub", "lch4_storage", "kt/h");
  { // carrier fleet; loading is gated by the aggregate berthing schedule
    // and the cargo arrives one trip later, less the boil-off share.
    const TechRecord& r = tables.at("carriers");
    ConversionSpec s;
    s.name = "carriers";
    s.commodities = {
        {"loaded", FlowDir::In, 1.0, 0, "kt/h"},
        {"unloaded", FlowDir::Out, r.get("phi.unloaded"),
         static_cast<int>(r.get("tau.unloaded")), "kt/h"}};
    s.reference = s.sizing = "loaded";
    AvailabilitySeries schedule = build_vessel_schedule(
        config.vessels, config.vessel_cycle_hours,
        config.vessel_load_window_hours, horizon.T);
    if (!all_ones(schedule.values)) s.availability = schedule.values;
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }
  storage("lch4_dest", "lch4_storage", "kt/h");
  { // regasification, sized by its gaseous output
    const TechRecord& r = tables.at("regasification");
    ConversionSpec s;
    s.name = "regasification";
    s.commodities = {{"lch4", FlowDir::In, 1.0, 0, "kt/h"},
                     {"methane", FlowDir::Out, r.get("phi.methane"), 0, "kt/h"}};
    s.reference = "lch4";
    s.sizing = "methane";
    base(r, s);
    s.cost = make_cost(r, "", config);
    conversion(s);
  }

  auto edge = [&](const std::string& name, std::vector<MemberRef> tail,
                  std::vector<MemberRef> head, Sense sense, double lambda) {
    ConservationSpec s;
    s.name = name;
    s.tail = std::move(tail);
    s.head = std::move(head);
    s.sense = sense;
    s.lambda = lambda;
    g.hyperedges.push_back(build_conservation_hyperedge(s, horizon));
  };

  edge("inland_power",
       {{"solar", "power"}, {"wind", "power"}, {"battery", "discharge"}},
       {{"hvdc", "power_in"}, {"battery", "charge"}}, Sense::Eq, 0.0);
  edge("coastal_power", {{"hvdc", "power_out"}},
       {{"dac", "power"},
        {"electrolysis", "power"},
        {"h2_storage", "power"},
        {"liquefaction", "power"},
        {"desalination", "power"},
        {"co2_storage", "power"},
        {"h2o_storage", "power"}},
       Sense::Eq, 0.0);
  edge("coastal_hydrogen",
       {{"electrolysis", "hydrogen"}, {"h2_storage", "discharge"}},
       {{"dac", "hydrogen"},
        {"methanation", "hydrogen"},
        {"h2_storage", "charge"}},
       Sense::Eq, 0.0);
  edge("coastal_co2", {{"dac", "co2"}, {"co2_storage", "discharge"}},
       {{"methanation", "co2"}, {"co2_storage", "charge"}}, Sense::Eq, 0.0);
  edge("coastal_water",
       {{"desalination", "water"},
        {"methanation", "water"},
        {"h2o_storage", "discharge"}},
       {{"electrolysis", "water"},
        {"dac", "water"},
        {"h2o_storage", "charge"}},
       Sense::Ge, 0.0);
  edge("coastal_methane", {{"methanation", "methane"}},
       {{"liquefaction", "methane"}}, Sense::Eq, 0.0);
  edge("hub_lch4", {{"liquefaction", "lch4"}, {"lch4_hub", "discharge"}},
       {{"carriers", "loaded"}, {"lch4_hub", "charge"}}, Sense::Eq, 0.0);
  edge("dest_lch4", {{"carriers", "unloaded"}, {"lch4_dest", "discharge"}},
       {{"regasification", "lch4"}, {"lch4_dest", "charge"}}, Sense::Eq, 0.0);
  edge("dest_methane", {{"regasification", "methane"}}, {}, Sense::Eq,
       demand_kt_per_hour(config.demand_twh_per_year));

  return g;
}

HorizonWindow horizon_window(const std::string& label) {
  if (label == "full") return {0, kBundledHours, 5.0};
  if (label == "2015") return {0, 8760, 1.0};
  if (label == "2016") return {8760, 8784, 1.0};
  if (label == "2017") return {17544, 8760, 1.0};
  if (label == "2018") return {26304, 8760, 1.0};
  if (label == "2019") return {35064, 8760, 1.0};
  throw Error("unknown horizon '" + label +
              "' (expected full or a year 2015..2019)");
}

std::vector<ScenarioSpec> bundled_scenarios() {
  auto scale = [](std::string path, double factor) {
    return ScenarioOverride{std::move(path), factor, true};
  };
  auto set = [](std::string path, double value) {
    return ScenarioOverride{std::move(path), value, false};
  };

  std::vector<ScenarioSpec> out;
  {
    ScenarioSpec s;
    s.name = "reference";
    out.push_back(std::move(s));
  }
  {
    ScenarioSpec s;
    s.name = "solar_only";
    s.base = "solar-only";
    out.push_back(std::move(s));
  }
  {
    ScenarioSpec s;
    s.name = "flexibility";
    for (const char* n : {"methanation", "dac", "desalination"}) {
      s.overrides.push_back(set(std::string(n) + ".mu", 0.0));
      s.overrides.push_back(set(std::string(n) + ".delta", 1.0));
    }
    out.push_back(std::move(s));
  }
  {
    ScenarioSpec s;
    s.name = "el_dac_capex_up";
    for (const char* n : {"electrolysis", "dac"}) {
      s.overrides.push_back(scale(std::string(n) + ".capex", 1.5));
      s.overrides.push_back(scale(std::string(n) + ".fom", 1.5));
    }
    out.push_back(std::move(s));
  }
  auto capex_down = [&](const std::string& name,
                        std::vector<std::string> techs) {
    ScenarioSpec s;
    s.name = name;
    for (const std::string& n : techs) {
      s.overrides.push_back(scale(n + ".capex", 0.5));
      s.overrides.push_back(scale(n + ".fom", 0.5));
    }
    out.push_back(std::move(s));
  };
  capex_down("el_capex_down", {"electrolysis"});
  capex_down("dac_capex_down", {"dac"});
  capex_down("mt_capex_down", {"methanation"});
  capex_down("all_capex_down", {"electrolysis", "dac", "methanation"});
  {
    ScenarioSpec s;
    s.name = "dac_electric";
    s.overrides = {scale("dac.phi.power", 5.0), set("dac.phi.hydrogen", 0.0)};
    out.push_back(std::move(s));
  }
  {
    ScenarioSpec s;
    s.name = "zero_financing";
    s.wacc_mode = WaccMode::ZeroFinancing;
    out.push_back(std::move(s));
  }
  return out;
}

ScenarioSpec find_scenario(const std::string& name) {
  std::vector<ScenarioSpec> all = bundled_scenarios();
  std::string known;
  for (const ScenarioSpec& s : all) {
    if (s.name == name) return s;
    known += known.empty() ? s.name : ", " + s.name;
  }
  throw Error("unknown scenario '" + name + "' (bundled: " + known + ")");
}

HubContext load_bundled_context(const std::string& data_dir) {
  HubContext ctx;
  ctx.tables = load_technology_table(data_dir + "/technologies.csv");
  AvailabilitySeries solar =
      load_series(data_dir + "/series/solar_cf.csv", "cf", 0);
  solar.name = "solar";
  AvailabilitySeries wind =
      load_series(data_dir + "/series/wind_cf.csv", "cf", 0);
  wind.name = "wind";
  ctx.series.emplace("solar", std::move(solar));
  ctx.series.emplace("wind", std::move(wind));
  return ctx;
}

namespace {

TechnologyTable apply_overrides(TechnologyTable tables,
                                const ScenarioSpec& spec) {
  std::vector<ScenarioOverride> all;
  if (spec.base == "solar-only") {
    all.push_back({"wind.kappa_max", 0.0, false});
  } else if (spec.base != "reference") {
    throw Error("scenario '" + spec.name + "': unknown base '" + spec.base +
                "'");
  }
  all.insert(all.end(), spec.overrides.begin(), spec.overrides.end());

  for (const ScenarioOverride& o : all) {
    size_t dot = o.path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= o.path.size())
      throw Error("scenario '" + spec.name + "': override path '" + o.path +
                  "' is not technology.parameter");
    std::string tech = o.path.substr(0, dot);
    std::string param = o.path.substr(dot + 1);
    auto it = tables.records.find(tech);
    if (it == tables.records.end())
      throw Error("scenario '" + spec.name + "': unknown technology '" + tech +
                  "'");
    auto& params = it->second.params;
    auto pit = params.find(param);
    if (o.scale) {
      if (pit == params.end())
        throw Error("scenario '" + spec.name + "': cannot scale '" + o.path +
                    "', the parameter is not set");
      pit->second.value *= o.value;
    } else if (pit != params.end()) {
      pit->second.value = o.value;
    } else {
      params.emplace(param, TechParam{o.value, ""});
    }
  }
  return tables;
}

AvailabilitySeries slice_series(const AvailabilitySeries& s,
                                const HorizonWindow& w,
                                const std::string& scenario) {
  if (static_cast<long long>(s.values.size()) <
      static_cast<long long>(w.offset) + w.T)
    throw Error("scenario '" + scenario + "': series '" + s.name + "' has " +
                std::to_string(s.values.size()) + " values, the window needs " +
                std::to_string(w.offset + w.T));
  AvailabilitySeries out;
  out.name = s.name;
  out.source = s.source;
  out.span = s.span;
  out.values.assign(s.values.begin() + w.offset,
                    s.values.begin() + w.offset + w.T);
  return out;
}

} // namespace

ScenarioResult build_scenario(const HubContext& ctx,
                              const ScenarioSpec& spec) {
  const HorizonWindow w =
      ctx.window_override ? *ctx.window_override : horizon_window(spec.horizon);
  TechnologyTable tables = apply_overrides(ctx.tables, spec);
  HubConfig config = ctx.config;
  config.wacc_mode = spec.wacc_mode;

  std::map<std::string, AvailabilitySeries> sliced;
  for (const auto& [name, s] : ctx.series)
    sliced.emplace(name, slice_series(s, w, spec.name));

  ScenarioResult res;
  res.spec = spec;
  res.graph = reference_system(tables, sliced, config,
                               make_horizon(w.T, 1.0, w.years));
  res.index = index_variables(res.graph);
  res.lp = assemble_lp(res.graph, res.index);
  return res;
}

ScenarioResult run_scenario(const HubContext& ctx, const ScenarioSpec& spec) {
  ScenarioResult res = build_scenario(ctx, spec);

  const bool external =
      ctx.solver == HubContext::Solver::External ||
      (ctx.solver == HubContext::Solver::Auto &&
       (res.lp.nrows() > 4000 || res.lp.ncols > 4000));
  Solution raw;
  try {
    if (external) {
      ExternalSolverConfig cfg;
      cfg.command = ctx.solver_command;
      raw = solve_external(res.lp, cfg, ctx.workdir + "/" + spec.name);
    } else {
      raw = solve_simplex(res.lp, ctx.simplex);
    }
  } catch (const Error& e) {
    throw Error("scenario '" + spec.name + "': " + e.what());
  }
  if (raw.status != SolveStatus::Optimal)
    throw Error("scenario '" + spec.name + "': solver returned " +
                std::string(status_name(raw.status)) +
                (raw.detail.empty() ? "" : " (" + raw.detail + ")"));
  res.solution =
      map_solution(res.graph, res.index, res.lp, std::move(raw.x), raw.status);
  res.solution.iterations = raw.iterations;
  res.solution.detail = std::move(raw.detail);
  res.cost =
      cost_breakdown(res.solution, res.graph, ctx.config.demand_twh_per_year);
  res.balance = energy_balance(res.solution, res.graph);
  return res;
}

std::vector<ScenarioResult> run_scenarios(const HubContext& ctx,
                                          const std::vector<ScenarioSpec>& specs,
                                          int jobs) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::clamp(jobs, 1, std::max(1, static_cast<int>(specs.size())));

  std::vector<std::optional<ScenarioResult>> slots(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      try {
        slots[i] = run_scenario(ctx, specs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(jobs));
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();

  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<ScenarioResult> out;
  out.reserve(specs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace {

std::string node_group(const std::string& node) {
  static const std::map<std::string, std::string> kGroups = {
      {"solar", "electricity"},       {"wind", "electricity"},
      {"battery", "electricity"},     {"hvdc", "electricity"},
      {"electrolysis", "hydrogen"},   {"h2_storage", "hydrogen"},
      {"dac", "co2"},                 {"co2_storage", "co2"},
      {"desalination", "water"},      {"h2o_storage", "water"},
      {"methanation", "methane"},     {"liquefaction", "methane"},
      {"lch4_hub", "methane"},        {"carriers", "methane"},
      {"lch4_dest", "methane"},       {"regasification", "methane"},
  };
  auto it = kGroups.find(node);
  return it == kGroups.end() ? "other" : it->second;
}

} // namespace

CostBreakdown cost_breakdown(const Solution& solution, const ModelGraph& graph,
                             double demand_twh_per_year) {
  if (!(demand_twh_per_year > 0.0))
    throw Error("cost breakdown: demand must be positive");
  if (solution.node_objective.size() != graph.nodes.size())
    throw Error("cost breakdown: solution does not match the graph");
  const double years = graph.horizon.years;

  CostBreakdown out;
  out.demand_twh_per_year = demand_twh_per_year;
  for (size_t i = 0; i < graph.nodes.size(); ++i) {
    CostLine line;
    line.node = graph.nodes[i].name;
    line.group = node_group(line.node);
    line.annual_meur = solution.node_objective[i] / years;
    line.eur_per_mwh = line.annual_meur / demand_twh_per_year;
    out.total_annual_meur += line.annual_meur;
    out.total_eur_per_mwh += line.eur_per_mwh;
    out.lines.push_back(std::move(line));
  }
  return out;
}

BalanceReport energy_balance(const Solution& solution,
                             const ModelGraph& graph) {
  const VariableIndex index = index_variables(graph);
  const TimeHorizon& h = graph.horizon;
  BalanceReport out;

  auto annual_unit = [](const std::string& unit) -> std::string {
    if (unit == "GW") return "GWh";
    if (unit == "kt/h") return "kt";
    return unit.empty() ? "units" : unit + "*h";
  };
  auto stock_unit = [](const std::string& unit) -> std::string {
    if (unit == "GW") return "GWh";
    if (unit == "kt/h") return "kt";
    return unit;
  };

  for (size_t ni = 0; ni < graph.nodes.size(); ++ni) {
    const NodeBlock& node = graph.nodes[ni];
    const int n = static_cast<int>(ni);

    for (size_t vi = 0; vi < node.variables.size(); ++vi) {
      const VariableDecl& v = node.variables[vi];
      if (v.kind != VarKind::External || v.shape != VarShape::TimeIndexed)
        continue;
      double total = 0.0;
      for (int t = 0; t < h.T; ++t)
        total += solution.value(index, n, static_cast<int>(vi), t);
      out.flows.push_back(
          {node.name, v.name, total * h.dt / h.years, annual_unit(v.unit)});
    }

    const int cap = node.find_variable("capacity");
    if (cap >= 0) {
      const ConstraintBlock* sz = nullptr;
      for (const ConstraintBlock& c : node.constraints)
        if (c.name == "sizing") {
          sz = &c;
          break;
        }
      double existing = 0.0;
      int flow_var = -1;
      const std::vector<double>* pi = nullptr;
      if (sz) {
        for (const Term& term : sz->expr.terms) {
          if (term.tkind == TimeRefKind::Scalar) {
            if (term.series >= 0)
              pi = &node.series[static_cast<size_t>(term.series)];
          } else if (term.coeff > 0.0) {
            flow_var = term.var;
          }
        }
        existing = sz->expr.constant_series >= 0
                       ? -sz->expr.constant_series_scale
                       : -sz->expr.constant;
      }
      const double K = existing + solution.value(index, n, cap);
      double cf = 0.0;
      if (flow_var >= 0 && K > 0.0) {
        double mean = 0.0;
        for (int t = 0; t < h.T; ++t)
          mean += solution.value(index, n, flow_var, t);
        cf = mean / h.T / K;
      }
      const std::string unit =
          flow_var >= 0 ? node.variables[static_cast<size_t>(flow_var)].unit
                        : "";
      out.capacities.push_back({node.name, "capacity", K, unit, cf});

      if (flow_var >= 0 && (node.name == "solar" || node.name == "wind")) {
        double curtailed = 0.0;
        for (int t = 0; t < h.T; ++t) {
          const double avail = pi ? (*pi)[static_cast<size_t>(t)] : 1.0;
          curtailed += avail * K - solution.value(index, n, flow_var, t);
        }
        const double twh = curtailed * h.dt / h.years / 1e3;
        out.curtailment.push_back({node.name, twh});
        out.curtailment_twh_per_year += twh;
      }
    }

    const int stock = node.find_variable("stock");
    const int stock_cap = node.find_variable("stock_capacity");
    const int flow_cap = node.find_variable("flow_capacity");
    if (stock >= 0 && stock_cap >= 0) {
      double stock_existing = 0.0, flow_existing = 0.0;
      for (const ConstraintBlock& c : node.constraints) {
        if (c.name == "stock_sizing") stock_existing = -c.expr.constant;
        if (c.name == "charge_sizing") flow_existing = -c.expr.constant;
      }
      const double E = stock_existing + solution.value(index, n, stock_cap);
      double mean = 0.0;
      for (int t = 0; t < h.T; ++t)
        mean += solution.value(index, n, stock, t);
      mean /= h.T;
      const std::string cu = node.variables[static_cast<size_t>(stock)].unit;
      out.capacities.push_back(
          {node.name, "stock", E, stock_unit(cu), E > 0.0 ? mean / E : 0.0});
      if (flow_cap >= 0) {
        const double F = flow_existing + solution.value(index, n, flow_cap);
        const int charge = node.find_variable("charge");
        double mean_charge = 0.0;
        for (int t = 0; t < h.T; ++t)
          mean_charge += solution.value(index, n, charge, t);
        mean_charge /= h.T;
        out.capacities.push_back(
            {node.name, "flow", F, cu, F > 0.0 ? mean_charge / F : 0.0});
      }
    }
  }

  for (const FlowLine& f : out.flows) {
    if ((f.node == "solar" || f.node == "wind") && f.variable == "power")
      out.electricity_twh_per_year += f.per_year / 1e3;
    if (f.node == "regasification" && f.variable == "methane")
      out.delivered_twh_per_year += f.per_year * kHhvCh4 / 1e3;
  }
  out.chain_efficiency =
      out.electricity_twh_per_year > 0.0
          ? out.delivered_twh_per_year / out.electricity_twh_per_year
          : 0.0;
  return out;
}

namespace {

void table_row(std::string& out, const std::vector<std::string>& cells,
               const std::vector<int>& widths) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += "  ";
    const int pad = widths[i] - static_cast<int>(cells[i].size());
    if (i == 0) {
      out += cells[i];
      out.append(static_cast<size_t>(std::max(0, pad)), ' ');
    } else {
      out.append(static_cast<size_t>(std::max(0, pad)), ' ');
      out += cells[i];
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  out += '\n';
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<int> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (size_t i = 0; i < row.size(); ++i)
      widths[i] = std::max(widths[i], static_cast<int>(row[i].size()));
  }
  std::string out;
  for (const auto& row : rows) table_row(out, row, widths);
  return out;
}

std::string fmt_fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

} // namespace

std::vector<ReportFile> emit_report(const CostBreakdown& cost,
                                    const BalanceReport& balance,
                                    ReportFormat format) {
  std::vector<ReportFile> files;

  if (format == ReportFormat::Machine) {
    std::string c;
    c += "# cost breakdown\n";
    c += "# demand_twh_per_year," + fmt_double(cost.demand_twh_per_year) + "\n";
    c += "node,group,annual_meur,eur_per_mwh\n";
    for (const CostLine& l : cost.lines)
      c += l.node + "," + l.group + "," + fmt_double(l.annual_meur) + "," +
           fmt_double(l.eur_per_mwh) + "\n";
    c += "total,," + fmt_double(cost.total_annual_meur) + "," +
         fmt_double(cost.total_eur_per_mwh) + "\n";
    files.push_back({"cost.csv", std::move(c)});

    std::string k = "node,component,value,unit,capacity_factor\n";
    for (const CapacityLine& l : balance.capacities)
      k += l.node + "," + l.component + "," + fmt_double(l.value) + "," +
           l.unit + "," + fmt_double(l.capacity_factor) + "\n";
    files.push_back({"capacity.csv", std::move(k)});

    std::string f = "node,variable,per_year,unit\n";
    for (const FlowLine& l : balance.flows)
      f += l.node + "," + l.variable + "," + fmt_double(l.per_year) + "," +
           l.unit + "\n";
    files.push_back({"flows.csv", std::move(f)});

    std::string s = "key,value\n";
    s += "total_annual_meur," + fmt_double(cost.total_annual_meur) + "\n";
    s += "total_eur_per_mwh," + fmt_double(cost.total_eur_per_mwh) + "\n";
    s += "demand_twh_per_year," + fmt_double(cost.demand_twh_per_year) + "\n";
    s += "delivered_twh_per_year," + fmt_double(balance.delivered_twh_per_year) +
         "\n";
    s += "electricity_twh_per_year," +
         fmt_double(balance.electricity_twh_per_year) + "\n";
    s += "chain_efficiency," + fmt_double(balance.chain_efficiency) + "\n";
    s += "curtailment_twh_per_year," +
         fmt_double(balance.curtailment_twh_per_year) + "\n";
    for (const CurtailmentLine& l : balance.curtailment)
      s += "curtailment_twh." + l.node + "," + fmt_double(l.twh_per_year) + "\n";
    files.push_back({"summary.csv", std::move(s)});
    return files;
  }

  {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"node", "group", "MEUR/yr", "EUR/MWh"});
    for (const CostLine& l : cost.lines)
      rows.push_back({l.node, l.group, fmt_fixed(l.annual_meur, 3),
                      fmt_fixed(l.eur_per_mwh, 3)});
    rows.push_back({"total", "", fmt_fixed(cost.total_annual_meur, 3),
                    fmt_fixed(cost.total_eur_per_mwh, 3)});
    files.push_back({"cost.txt", render_table(rows)});
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"node", "component", "value", "unit", "cf"});
    for (const CapacityLine& l : balance.capacities)
      rows.push_back({l.node, l.component, fmt_fixed(l.value, 4), l.unit,
                      fmt_fixed(l.capacity_factor, 4)});
    files.push_back({"capacity.txt", render_table(rows)});
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"node", "variable", "per year", "unit"});
    for (const FlowLine& l : balance.flows)
      rows.push_back({l.node, l.variable, fmt_fixed(l.per_year, 3), l.unit});
    files.push_back({"flows.txt", render_table(rows)});
  }
  {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"delivered", fmt_fixed(balance.delivered_twh_per_year, 4),
                    "TWh/yr"});
    rows.push_back({"electricity",
                    fmt_fixed(balance.electricity_twh_per_year, 4), "TWh/yr"});
    rows.push_back(
        {"chain efficiency", fmt_fixed(balance.chain_efficiency, 4), ""});
    rows.push_back({"curtailment",
                    fmt_fixed(balance.curtailment_twh_per_year, 4), "TWh/yr"});
    for (const CurtailmentLine& l : balance.curtailment)
      rows.push_back({"curtailment " + l.node, fmt_fixed(l.twh_per_year, 4),
                      "TWh/yr"});
    rows.push_back({"cost", fmt_fixed(cost.total_eur_per_mwh, 2), "EUR/MWh"});
    files.push_back({"summary.txt", render_table(rows)});
  }
  return files;
}

CostBreakdown parse_cost_breakdown(const std::string& text) {
  CostBreakdown out;
  size_t pos = 0;
  int lineno = 0;
  bool saw_total = false;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto cells = split_csv(line.substr(1));
      if (cells.size() == 2 && cells[0] == "demand_twh_per_year" &&
          !parse_number(cells[1], out.demand_twh_per_year))
        throw Error("cost table line " + std::to_string(lineno) +
                    ": bad demand value");
      continue;
    }
    auto cells = split_csv(line);
    if (cells.size() != 4)
      throw Error("cost table line " + std::to_string(lineno) +
                  ": expected 4 cells");
    if (cells[0] == "node") continue; // header
    double annual = 0.0, per_mwh = 0.0;
    if (!parse_number(cells[2], annual) || !parse_number(cells[3], per_mwh))
      throw Error("cost table line " + std::to_string(lineno) +
                  ": bad number");
    if (cells[0] == "total") {
      out.total_annual_meur = annual;
      out.total_eur_per_mwh = per_mwh;
      saw_total = true;
    } else {
      out.lines.push_back({cells[0], cells[1], annual, per_mwh});
    }
  }
  if (!saw_total) throw Error("cost table: missing total row");
  return out;
}

void write_report_files(const std::vector<ReportFile>& files,
                        const std::string& directory) {
  fs::create_directories(directory);
  for (const ReportFile& f : files) {
    std::ofstream out(fs::path(directory) / f.name, std::ios::binary);
    if (!out) throw Error(directory + "/" + f.name + ": cannot write report");
    out << f.content;
  }
}

} // namespace hubopt
