// Command-line front end: validate and compile model files, solve the
// resulting programs, run bundled or user-defined scenarios, and reformat
// stored reports. Exit codes: 0 success, 1 diagnostics, 2 solver failure,
// 3 usage error.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hubopt/dsl.hpp"
#include "hubopt/hubcase.hpp"

namespace fs = std::filesystem;
using namespace hubopt;

namespace {

constexpr const char* kVersion = "hubopt 1.0.0";

constexpr int kOk = 0;
constexpr int kDiagnostics = 1;
constexpr int kSolverFailure = 2;
constexpr int kUsage = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* kUsageText = R"(usage: hubopt <subcommand> [arguments] [flags]

subcommands:
  validate <model.hub>          check a model file, print diagnostics
  compile <model.hub>           assemble and write MPS plus a name map
  solve <model.hub>             assemble and solve one program
  scenario <name|file>...       run bundled or user-defined scenarios
  report <run-dir>              reformat a stored cost table

flags:
  -o, --output DIR    artifact directory (default: out)
  --data DIR          bundled data directory (default: data)
  --solver MODE       auto | embedded | external (default: auto)
  --solver-cmd CMD    external solver command template
  --scenario NAME     named override set to apply when compiling/solving
  --horizon SPEC      bundled window label (2015..2019, full) or a raw
                      window given as offset:periods[:years]
  --tol-feas X        feasibility check tolerance (default: 1e-6)
  --tol-opt X         optimality tolerance for the embedded solver
  --jobs N            parallel scenario solves (default: 1)
  --dry-run           print problem dimensions instead of solving
  --format table|csv  report output format (default: table)
  -h, --help          show this message
  --version           print the tool version

The HUBOPT_EXTERNAL_SOLVER environment variable overrides --solver-cmd.
)";

struct Options {
  std::string subcommand;
  std::vector<std::string> args;
  std::string output = "out";
  std::string data = "data";
  std::string solver = "auto";
  std::string solver_cmd;
  std::string scenario;
  std::string horizon;
  double tol_feas = 1e-6;
  std::optional<double> tol_opt;
  int jobs = 1;
  bool dry_run = false;
  std::string format = "table";
};

double parse_flag_double(const std::string& flag, const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw UsageError(flag + ": expected a number, got '" + text + "'");
  return v;
}

Options parse_args(int argc, char** argv) {
  Options o;
  std::vector<std::string> args(argv + 1, argv + argc);
  size_t i = 0;
  auto need_value = [&](const std::string& flag) -> std::string {
    if (i + 1 >= args.size()) throw UsageError(flag + ": missing value");
    return args[++i];
  };
  for (; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "-h" || a == "--help") {
      std::cout << kUsageText;
      std::exit(kOk);
    } else if (a == "--version") {
      std::cout << kVersion << "\n";
      std::exit(kOk);
    } else if (a == "-o" || a == "--output") {
      o.output = need_value(a);
    } else if (a == "--data") {
      o.data = need_value(a);
    } else if (a == "--solver") {
      o.solver = need_value(a);
      if (o.solver != "auto" && o.solver != "embedded" &&
          o.solver != "external")
        throw UsageError("--solver: expected auto, embedded, or external");
    } else if (a == "--solver-cmd") {
      o.solver_cmd = need_value(a);
    } else if (a == "--scenario") {
      o.scenario = need_value(a);
    } else if (a == "--horizon") {
      o.horizon = need_value(a);
    } else if (a == "--tol-feas") {
      o.tol_feas = parse_flag_double(a, need_value(a));
    } else if (a == "--tol-opt") {
      o.tol_opt = parse_flag_double(a, need_value(a));
    } else if (a == "--jobs") {
      o.jobs = static_cast<int>(parse_flag_double(a, need_value(a)));
      if (o.jobs < 1) throw UsageError("--jobs: expected a positive count");
    } else if (a == "--dry-run") {
      o.dry_run = true;
    } else if (a == "--format") {
      o.format = need_value(a);
      if (o.format != "table" && o.format != "csv")
        throw UsageError("--format: expected table or csv");
    } else if (!a.empty() && a[0] == '-') {
      throw UsageError("unknown flag '" + a + "'");
    } else if (o.subcommand.empty()) {
      o.subcommand = a;
    } else {
      o.args.push_back(a);
    }
  }
  if (o.subcommand.empty()) throw UsageError("missing subcommand");
  return o;
}

// --- manifest ------------------------------------------------------------

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_bytes(const std::string& bytes) {
  return hex64(fnv1a(14695981039346656037ULL, bytes.data(), bytes.size()));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write");
  out << content;
}

// Run manifest: inputs and outputs with content hashes, the program
// fingerprints, and a hash over all of that. Wall time is recorded but
// excluded from the hashed content so reruns stay comparable.
struct Manifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, hash
  std::vector<std::pair<std::string, std::string>> outputs;  // name, hash
  std::vector<std::pair<std::string, std::string>> fingerprints;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  void add_input(const std::string& path, const std::string& bytes) {
    inputs.emplace_back(path, hash_bytes(bytes));
  }
  void add_output(const std::string& name, const std::string& bytes) {
    outputs.emplace_back(name, hash_bytes(bytes));
  }

  std::string render() const {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start)
                  .count();
    std::string hashed;
    hashed += "tool=" + std::string(kVersion) + "\n";
    hashed += "subcommand=" + subcommand + "\n";
    for (const auto& [p, h] : inputs) hashed += "input " + p + " " + h + "\n";
    for (const auto& [p, h] : fingerprints)
      hashed += "fingerprint " + p + " " + h + "\n";
    for (const auto& [p, h] : outputs) hashed += "output " + p + " " + h + "\n";
    std::string out = hashed;
    out += "content_hash=" + hash_bytes(hashed) + "\n";
    out += "wall_ms=" + std::to_string(ms) + "\n";
    return out;
  }
};

void write_manifest(const Options& o, const Manifest& m) {
  write_file(fs::path(o.output) / "manifest.txt", m.render());
}

// --- model loading -------------------------------------------------------

std::string diag_tally(int errors, int warnings) {
  std::string s = std::to_string(errors) + " error";
  if (errors != 1) s += 's';
  s += ", " + std::to_string(warnings) + " warning";
  if (warnings != 1) s += 's';
  return s;
}

// Loads a model file, printing diagnostics to `sink`. Empty optional
// means errors were reported and the caller should exit with status 1.
std::optional<ModelGraph> load_model_file(const std::string& path,
                                          const Options& o,
                                          std::ostream& sink) {
  if (!fs::exists(path)) throw Error(path + ": no such file");
  std::vector<dsl::Diagnostic> diags;
  dsl::ResolveOptions ropts;
  ropts.scenario = o.scenario;
  ModelGraph graph = dsl::load_model(path, diags, ropts);
  for (const auto& d : diags) sink << dsl::format_diagnostic(path, d) << "\n";
  int errors = 0, warnings = 0;
  for (const auto& d : diags)
    (d.severity == dsl::Diagnostic::Severity::Error ? errors : warnings)++;
  if (errors > 0) {
    sink << diag_tally(errors, warnings) << "\n";
    return std::nullopt;
  }
  return graph;
}

// --- subcommands ---------------------------------------------------------

int cmd_validate(const Options& o) {
  if (o.args.size() != 1)
    throw UsageError("validate: expected exactly one model file");
  const std::string& path = o.args[0];
  if (!fs::exists(path)) throw Error(path + ": no such file");
  std::vector<dsl::Diagnostic> diags;
  dsl::ResolveOptions ropts;
  ropts.scenario = o.scenario;
  dsl::load_model(path, diags, ropts);
  for (const auto& d : diags)
    std::cout << dsl::format_diagnostic(path, d) << "\n";
  int errors = 0, warnings = 0;
  for (const auto& d : diags)
    (d.severity == dsl::Diagnostic::Severity::Error ? errors : warnings)++;
  std::cout << diag_tally(errors, warnings) << "\n";
  return errors == 0 ? kOk : kDiagnostics;
}

int cmd_compile(const Options& o) {
  if (o.args.size() != 1)
    throw UsageError("compile: expected exactly one model file");
  const std::string& path = o.args[0];
  Manifest manifest;
  manifest.subcommand = "compile";
  manifest.add_input(path, read_file(path));

  auto graph = load_model_file(path, o, std::cerr);
  if (!graph) return kDiagnostics;
  SparseLP lp = assemble_lp(*graph);
  const std::string stem = fs::path(path).stem().string();
  lp.name = stem;
  const std::string fp = hex64(fingerprint(lp));
  manifest.fingerprints.emplace_back(stem, fp);

  std::string mps = emit_mps(lp);
  std::string names = emit_name_map(lp);
  write_file(fs::path(o.output) / (stem + ".mps"), mps);
  write_file(fs::path(o.output) / (stem + ".names"), names);
  manifest.add_output(stem + ".mps", mps);
  manifest.add_output(stem + ".names", names);
  write_manifest(o, manifest);

  std::cout << "rows=" << lp.nrows() << " cols=" << lp.ncols
            << " nnz=" << lp.nnz() << "\n";
  std::cout << "fingerprint=" << fp << "\n";
  std::cout << "wrote " << (fs::path(o.output) / (stem + ".mps")).string()
            << "\n";
  return kOk;
}

SimplexConfig simplex_config(const Options& o) {
  SimplexConfig cfg;
  if (o.tol_opt) {
    cfg.opt_tol = *o.tol_opt;
    cfg.feas_tol = *o.tol_opt;
  }
  return cfg;
}

Solution solve_lp(const SparseLP& lp, const Options& o,
                  const std::string& workdir) {
  const bool external =
      o.solver == "external" ||
      (o.solver == "auto" && (lp.nrows() > 4000 || lp.ncols > 4000));
  if (external) {
    ExternalSolverConfig cfg;
    cfg.command = o.solver_cmd;
    return solve_external(lp, cfg, workdir);
  }
  return solve_simplex(lp, simplex_config(o));
}

std::string solution_table(const SparseLP& lp, const Solution& sol) {
  auto fmt = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::string out = "column,value\n";
  for (int j = 0; j < lp.ncols; ++j)
    out += lp.col_label(j) + "," + fmt(sol.x[static_cast<size_t>(j)]) + "\n";
  out += "objective," + fmt(sol.objective) + "\n";
  return out;
}

int check_and_report(const SparseLP& lp, const Solution& sol,
                     double tolerance) {
  auto violations = check_feasibility(lp, sol.x, tolerance);
  if (violations.empty()) return kOk;
  std::cerr << "solution fails the feasibility check at " << tolerance << ":\n";
  size_t shown = 0;
  for (const auto& v : violations) {
    if (++shown > 10) break;
    std::cerr << "  " << v.label << " off by " << v.amount << "\n";
  }
  if (violations.size() > shown)
    std::cerr << "  ... " << violations.size() - shown << " more\n";
  return kSolverFailure;
}

int cmd_solve(const Options& o) {
  if (o.args.size() != 1)
    throw UsageError("solve: expected exactly one model file");
  const std::string& path = o.args[0];
  Manifest manifest;
  manifest.subcommand = "solve";
  manifest.add_input(path, read_file(path));

  auto graph = load_model_file(path, o, std::cerr);
  if (!graph) return kDiagnostics;
  SparseLP lp = assemble_lp(*graph);
  const std::string stem = fs::path(path).stem().string();
  lp.name = stem;
  const std::string fp = hex64(fingerprint(lp));
  manifest.fingerprints.emplace_back(stem, fp);

  if (o.dry_run) {
    std::cout << "rows=" << lp.nrows() << " cols=" << lp.ncols
              << " nnz=" << lp.nnz() << "\n";
    std::cout << "fingerprint=" << fp << "\n";
    return kOk;
  }

  Solution raw;
  try {
    raw = solve_lp(lp, o, o.output + "/work");
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolverFailure;
  }
  if (raw.status != SolveStatus::Optimal) {
    std::cerr << "solver returned " << status_name(raw.status);
    if (!raw.detail.empty()) std::cerr << " (" << raw.detail << ")";
    std::cerr << "\n";
    return kSolverFailure;
  }
  VariableIndex index = index_variables(*graph);
  Solution sol = map_solution(*graph, index, lp, std::move(raw.x), raw.status);
  if (int rc = check_and_report(lp, sol, o.tol_feas); rc != kOk) return rc;

  std::string table = solution_table(lp, sol);
  write_file(fs::path(o.output) / "solution.csv", table);
  manifest.add_output("solution.csv", table);
  write_manifest(o, manifest);

  std::cout << "status=" << status_name(sol.status) << " objective="
            << sol.objective << " iterations=" << sol.iterations << "\n";
  std::cout << "max_row_residual=" << sol.max_row_residual << "\n";
  return kOk;
}

// User-defined scenarios: an override file of `technology.parameter = v`
// or `*= v` lines, with optional `base`, `horizon`, and `wacc = none`.
ScenarioSpec parse_override_file(const std::string& path) {
  ScenarioSpec spec;
  spec.name = fs::path(path).stem().string();
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (size_t hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string body = trim(line);
    if (body.empty()) continue;
    bool scale = false;
    size_t eq = body.find("*=");
    if (eq != std::string::npos) {
      scale = true;
    } else {
      eq = body.find('=');
      if (eq == std::string::npos)
        throw Error(path + ":" + std::to_string(lineno) +
                    ": expected 'path = value' or 'path *= factor'");
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + (scale ? 2 : 1)));
    if (key.empty() || value.empty())
      throw Error(path + ":" + std::to_string(lineno) + ": empty side");
    if (!scale && key == "base") {
      spec.base = value;
    } else if (!scale && key == "horizon") {
      spec.horizon = value;
    } else if (!scale && key == "wacc" && value == "none") {
      spec.wacc_mode = WaccMode::ZeroFinancing;
    } else {
      double v = 0.0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw Error(path + ":" + std::to_string(lineno) + ": bad number '" +
                    value + "'");
      spec.overrides.push_back({key, v, scale});
    }
  }
  return spec;
}

// --horizon accepts the bundled labels plus a raw "offset:periods[:years]"
// window for quick experiments on a slice of the series.
std::optional<HorizonWindow> parse_raw_window(const std::string& spec) {
  if (spec.find(':') == std::string::npos) return std::nullopt;
  std::istringstream in(spec);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, ':')) parts.push_back(part);
  if (parts.size() != 2 && parts.size() != 3)
    throw UsageError("--horizon: expected offset:periods[:years]");
  HorizonWindow w;
  w.offset = static_cast<int>(parse_flag_double("--horizon", parts[0]));
  w.T = static_cast<int>(parse_flag_double("--horizon", parts[1]));
  w.years = parts.size() == 3 ? parse_flag_double("--horizon", parts[2])
                              : w.T / 8760.0;
  if (w.offset < 0 || w.T <= 0 || w.years <= 0)
    throw UsageError("--horizon: window values must be positive");
  return w;
}

int cmd_scenario(const Options& o) {
  if (o.args.empty())
    throw UsageError("scenario: expected at least one name or override file");

  std::vector<ScenarioSpec> specs;
  for (const std::string& a : o.args) {
    if (a == "all") {
      for (ScenarioSpec& s : bundled_scenarios()) specs.push_back(std::move(s));
    } else if (fs::exists(a)) {
      specs.push_back(parse_override_file(a));
    } else {
      specs.push_back(find_scenario(a));
    }
  }

  HubContext ctx = load_bundled_context(o.data);
  if (!o.horizon.empty()) {
    if (auto raw = parse_raw_window(o.horizon)) {
      ctx.window_override = *raw;
    } else {
      horizon_window(o.horizon); // validate the label up front
      for (ScenarioSpec& s : specs) s.horizon = o.horizon;
    }
  }
  ctx.solver = o.solver == "embedded" ? HubContext::Solver::Embedded
               : o.solver == "external" ? HubContext::Solver::External
                                        : HubContext::Solver::Auto;
  ctx.solver_command = o.solver_cmd;
  ctx.workdir = o.output + "/work";
  ctx.simplex = simplex_config(o);

  Manifest manifest;
  manifest.subcommand = "scenario";
  manifest.add_input(o.data + "/technologies.csv",
                     read_file(o.data + "/technologies.csv"));

  if (o.dry_run) {
    for (const ScenarioSpec& s : specs) {
      ScenarioResult r = build_scenario(ctx, s);
      std::cout << s.name << ": rows=" << r.lp.nrows()
                << " cols=" << r.lp.ncols << " nnz=" << r.lp.nnz()
                << " fingerprint=" << hex64(fingerprint(r.lp)) << "\n";
    }
    return kOk;
  }

  std::vector<ScenarioResult> results;
  try {
    results = run_scenarios(ctx, specs, o.jobs);
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolverFailure;
  }

  int worst = kOk;
  for (const ScenarioResult& r : results) {
    if (int rc = check_and_report(r.lp, r.solution, o.tol_feas); rc != kOk) {
      std::cerr << "(scenario " << r.spec.name << ")\n";
      worst = std::max(worst, rc);
      continue;
    }
    fs::path dir = fs::path(o.output) / r.spec.name;
    std::vector<ReportFile> files =
        emit_report(r.cost, r.balance, ReportFormat::Table);
    for (ReportFile& f : emit_report(r.cost, r.balance, ReportFormat::Machine))
      files.push_back(std::move(f));
    files.push_back({"solution.csv", solution_table(r.lp, r.solution)});
    write_report_files(files, dir.string());
    manifest.fingerprints.emplace_back(r.spec.name,
                                       hex64(fingerprint(r.lp)));
    for (const ReportFile& f : files)
      manifest.add_output(r.spec.name + "/" + f.name, f.content);

    std::cout << r.spec.name << ": objective=" << r.solution.objective
              << " cost_eur_per_mwh=" << r.cost.total_eur_per_mwh << "\n";
  }
  write_manifest(o, manifest);
  return worst;
}

int cmd_report(const Options& o) {
  if (o.args.size() != 1)
    throw UsageError("report: expected a run directory or cost table");
  fs::path target(o.args[0]);
  if (fs::is_directory(target)) target /= "cost.csv";
  CostBreakdown cost = parse_cost_breakdown(read_file(target.string()));

  const ReportFormat format =
      o.format == "csv" ? ReportFormat::Machine : ReportFormat::Table;
  const char* wanted = format == ReportFormat::Machine ? "cost.csv"
                                                       : "cost.txt";
  for (const ReportFile& f : emit_report(cost, BalanceReport{}, format))
    if (f.name == wanted) std::cout << f.content;
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  Options o;
  try {
    o = parse_args(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << kUsageText;
    return kUsage;
  }
  try {
    if (o.subcommand == "validate") return cmd_validate(o);
    if (o.subcommand == "compile") return cmd_compile(o);
    if (o.subcommand == "solve") return cmd_solve(o);
    if (o.subcommand == "scenario") return cmd_scenario(o);
    if (o.subcommand == "report") return cmd_report(o);
    std::cerr << "error: unknown subcommand '" << o.subcommand << "'\n\n"
              << kUsageText;
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << kUsageText;
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiagnostics;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kDiagnostics;
  }
}
