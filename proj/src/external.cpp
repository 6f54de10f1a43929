#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hubopt/solve.hpp"

namespace hubopt {

namespace fs = std::filesystem;

namespace {

std::string substitute(std::string templ, const std::string& key,
                       const std::string& value, bool& found) {
  size_t pos = 0;
  while ((pos = templ.find(key, pos)) != std::string::npos) {
    templ.replace(pos, key.size(), value);
    pos += value.size();
    found = true;
  }
  return templ;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  out += "'";
  return out;
}

std::string tail_of(const fs::path& p, size_t keep = 500) {
  std::ifstream in(p);
  std::ostringstream all;
  all << in.rdbuf();
  std::string s = all.str();
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  if (s.size() > keep) s = "..." + s.substr(s.size() - keep);
  return s;
}

void run_command(const std::string& cmd, const fs::path& log,
                 double timeout_seconds) {
  pid_t pid = fork();
  if (pid < 0) throw Error("external: fork failed: " + std::string(strerror(errno)));
  if (pid == 0) {
    setpgid(0, 0);
    int fd = open(log.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
    if (fd >= 0) {
      dup2(fd, 1);
      dup2(fd, 2);
      close(fd);
    }
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid); // best effort; the child does the same

  using clock = std::chrono::steady_clock;
  auto deadline = clock::now() + std::chrono::duration<double>(timeout_seconds);
  int status = 0;
  for (;;) {
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) throw Error("external: waitpid failed: " +
                           std::string(strerror(errno)));
    if (clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw Error("external: solver exceeded the " +
                  std::to_string(timeout_seconds) + "s timeout");
    }
    usleep(10000);
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::string detail = tail_of(log);
    throw Error("external: solver command failed (exit " +
                std::to_string(code) + ")" +
                (detail.empty() ? "" : ": " + detail));
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

} // namespace

Solution solve_external(const SparseLP& lp, const ExternalSolverConfig& cfg,
                        const std::string& workdir) {
  std::string command = cfg.command;
  if (const char* env = std::getenv("HUBOPT_EXTERNAL_SOLVER");
      env && *env != '\0')
    command = env;
  if (command.empty())
    throw Error("external: no solver command configured");

  fs::path dir(workdir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("external: cannot create " + workdir + ": " + ec.message());
  fs::path mps_path = dir / (lp.name.empty() ? "model.mps" : lp.name + ".mps");
  fs::path sol_path = mps_path;
  sol_path.replace_extension(".sol");
  fs::path log_path = mps_path;
  log_path.replace_extension(".log");

  {
    std::ofstream out(mps_path);
    if (!out) throw Error("external: cannot write " + mps_path.string());
    out << emit_mps(lp);
  }
  fs::remove(sol_path, ec);

  bool has_mps = false, has_sol = false;
  command = substitute(command, "{mps}", shell_quote(mps_path.string()), has_mps);
  command = substitute(command, "{sol}", shell_quote(sol_path.string()), has_sol);
  if (!has_mps)
    command += " " + shell_quote(mps_path.string());
  if (!has_sol)
    command += " " + shell_quote(sol_path.string());

  run_command(command, log_path, cfg.timeout_seconds);

  std::ifstream in(sol_path);
  if (!in)
    throw Error("external: solver produced no solution file at " +
                sol_path.string());

  Solution sol;
  sol.detail = "external solver";
  std::vector<char> seen(lp.ncols, 0);
  std::vector<double> x(lp.ncols, 0.0);
  bool statused = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (s == "=infeasible=" || s == "=unbounded=") {
      sol.status = s == "=infeasible=" ? SolveStatus::Infeasible
                                       : SolveStatus::Unbounded;
      sol.x.clear();
      return sol;
    }
    if (s == "=optimal=") {
      statused = true;
      continue;
    }
    size_t sep = s.find_first_of(" \t");
    if (sep == std::string_view::npos)
      throw Error("external: " + sol_path.string() + ":" +
                  std::to_string(lineno) + ": expected \"name value\"");
    std::string_view name = trim(s.substr(0, sep));
    std::string_view val = trim(s.substr(sep + 1));
    int j = mps_col_id(name);
    if (j < 0 || j >= lp.ncols)
      throw Error("external: " + sol_path.string() + ":" +
                  std::to_string(lineno) + ": unknown column name \"" +
                  std::string(name) + "\"");
    double v = 0.0;
    auto res = std::from_chars(val.data(), val.data() + val.size(), v);
    if (res.ec != std::errc() || res.ptr != val.data() + val.size())
      throw Error("external: " + sol_path.string() + ":" +
                  std::to_string(lineno) + ": malformed value \"" +
                  std::string(val) + "\"");
    x[j] = v;
    seen[j] = 1;
  }
  (void)statused;
  for (int j = 0; j < lp.ncols; ++j)
    if (!seen[j])
      throw Error("external: solution is missing column " + mps_col_name(j) +
                  " (" + lp.col_label(j) + ")");

  sol.status = SolveStatus::Optimal;
  sol.x = std::move(x);
  sol.objective = lp.c0;
  for (int j = 0; j < lp.ncols; ++j) sol.objective += lp.c[j] * sol.x[j];

  std::vector<double> activity(lp.nrows(), 0.0);
  for (size_t k = 0; k < lp.nnz(); ++k)
    activity[lp.a_row[k]] += lp.a_val[k] * sol.x[lp.a_col[k]];
  for (int r = 0; r < lp.nrows(); ++r) {
    double gap = activity[r] - lp.rhs[r];
    double viol = lp.sense[r] == Sense::Eq  ? std::abs(gap)
                  : lp.sense[r] == Sense::Le ? std::max(0.0, gap)
                                             : std::max(0.0, -gap);
    sol.max_row_residual = std::max(sol.max_row_residual, viol);
  }
  for (int j = 0; j < lp.ncols; ++j) {
    sol.max_bound_violation =
        std::max(sol.max_bound_violation, lp.lb[j] - sol.x[j]);
    sol.max_bound_violation =
        std::max(sol.max_bound_violation, sol.x[j] - lp.ub[j]);
  }
  sol.max_bound_violation = std::max(sol.max_bound_violation, 0.0);
  return sol;
}

} // namespace hubopt
