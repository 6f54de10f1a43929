#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "hubopt/dsl.hpp"
#include "hubopt/lp.hpp"

// Golden corpus: every .hub file under tests/golden is pushed through
// tokenize -> parse -> resolve -> assemble and the full observable output
// (diagnostics, canonical form, assembly fingerprint) must match the
// committed .expected bytes. Regenerate with HUBOPT_UPDATE_GOLDEN=1.

using namespace hubopt;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void replace_all(std::string& text, const std::string& from,
                 const std::string& to) {
  if (from.empty()) return;
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string golden_output(const fs::path& file, const fs::path& dir) {
  std::string src = read_file(file);
  std::vector<dsl::Diagnostic> diags;
  auto toks = dsl::tokenize(src, diags);
  dsl::Ast ast = dsl::parse(toks, diags);
  ModelGraph graph;
  if (!dsl::has_errors(diags)) graph = dsl::resolve(ast, dir.string(), diags);

  std::string out = "== diagnostics ==\n";
  if (diags.empty()) out += "(none)\n";
  for (const auto& d : diags)
    out += dsl::format_diagnostic("model.hub", d) + "\n";
  out += "== canonical ==\n";
  out += dsl::pretty_print(ast);
  if (!dsl::has_errors(diags)) {
    SparseLP lp = assemble_lp(graph);
    char line[128];
    std::snprintf(line, sizeof line,
                  "== graph ==\nnodes=%zu hyperedges=%zu T=%d rows=%d "
                  "cols=%d fingerprint=%016llx\n",
                  graph.nodes.size(), graph.hyperedges.size(),
                  graph.horizon.T, lp.nrows(), lp.ncols,
                  static_cast<unsigned long long>(fingerprint(lp)));
    out += line;
  }
  // Diagnostics from file loading may embed the corpus location.
  replace_all(out, dir.string(), "$DIR");
  return out;
}

} // namespace

TEST_CASE("golden corpus is byte-stable") {
  fs::path dir = fs::path(HUBOPT_SOURCE_DIR) / "tests" / "golden";
  REQUIRE(fs::exists(dir));
  bool update = std::getenv("HUBOPT_UPDATE_GOLDEN") != nullptr;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".hub") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  REQUIRE(files.size() >= 20);

  for (const fs::path& f : files) {
    CAPTURE(f.filename().string());
    std::string got = golden_output(f, dir);
    fs::path expected_path = f;
    expected_path.replace_extension(".expected");
    if (update) {
      std::ofstream out(expected_path, std::ios::binary);
      out << got;
      continue;
    }
    REQUIRE_MESSAGE(fs::exists(expected_path),
                    "missing expected file; run with HUBOPT_UPDATE_GOLDEN=1");
    std::string want = read_file(expected_path);
    CHECK_MESSAGE(got == want, "golden mismatch for ",
                  f.filename().string(), "\n--- got ---\n", got,
                  "\n--- want ---\n", want);
  }
}

TEST_CASE("golden corpus: clean files stay clean and broken files stay broken") {
  fs::path dir = fs::path(HUBOPT_SOURCE_DIR) / "tests" / "golden";
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".hub") continue;
    std::string name = entry.path().filename().string();
    bool expect_errors = name.find("_err_") != std::string::npos;
    std::vector<dsl::Diagnostic> diags;
    dsl::load_model(entry.path().string(), diags);
    CAPTURE(name);
    CHECK(dsl::has_errors(diags) == expect_errors);
  }
}
