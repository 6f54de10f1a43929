#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <string_view>

#include "hubopt/lp.hpp"

namespace hubopt {

namespace {

std::string base36(int id) {
  static const char digits[] = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  if (id == 0) return "0";
  std::string out;
  while (id > 0) {
    out.push_back(digits[id % 36]);
    id /= 36;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

} // namespace

std::string mps_col_name(int j) { return "C" + base36(j); }
std::string mps_row_name(int r) { return "R" + base36(r); }

int mps_col_id(std::string_view name) {
  if (name.size() < 2 || name.size() > 8 || name[0] != 'C') return -1;
  int id = 0;
  for (char ch : name.substr(1)) {
    int digit;
    if (ch >= '0' && ch <= '9') digit = ch - '0';
    else if (ch >= 'A' && ch <= 'Z') digit = ch - 'A' + 10;
    else return -1;
    id = id * 36 + digit;
  }
  return id;
}

namespace {

std::string col_name(int j) { return mps_col_name(j); }
std::string row_name(int r) { return mps_row_name(r); }

// Shortest decimal that reads back to the identical double.
std::string format_value(double v) {
  if (!std::isfinite(v)) throw Error("mps: cannot serialize non-finite value");
  std::array<char, 40> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void pad_to(std::string& line, size_t column) {
  if (line.size() < column) line.append(column - line.size(), ' ');
}

// One data line: two name fields and a value at the canonical offsets.
void entry_line(std::string& out, const std::string& a, const std::string& b,
                const std::string& v) {
  std::string line = "    " + a;
  pad_to(line, 14);
  line += b;
  if (!v.empty()) {
    pad_to(line, 24);
    line += v;
  }
  out += line;
  out += '\n';
}

} // namespace

std::string emit_mps(const SparseLP& lp) {
  std::string out;
  out.reserve(64 * (lp.nnz() + lp.ncols + lp.nrows()) / 2 + 256);
  out += "NAME          " + lp.name + "\n";

  out += "ROWS\n";
  out += " N  OBJ\n";
  for (int r = 0; r < lp.nrows(); ++r) {
    char s = lp.sense[r] == Sense::Eq ? 'E' : lp.sense[r] == Sense::Le ? 'L' : 'G';
    out += ' ';
    out += s;
    out += "  " + row_name(r) + "\n";
  }

  // Column-major traversal of the row-major triplet store.
  std::vector<size_t> order(lp.nnz());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (lp.a_col[a] != lp.a_col[b]) return lp.a_col[a] < lp.a_col[b];
    return lp.a_row[a] < lp.a_row[b];
  });

  out += "COLUMNS\n";
  size_t k = 0;
  for (int j = 0; j < lp.ncols; ++j) {
    const std::string cname = col_name(j);
    bool wrote = false;
    if (lp.c[j] != 0.0) {
      entry_line(out, cname, "OBJ", format_value(lp.c[j]));
      wrote = true;
    }
    while (k < order.size() && lp.a_col[order[k]] == j) {
      size_t e = order[k++];
      entry_line(out, cname, row_name(lp.a_row[e]), format_value(lp.a_val[e]));
      wrote = true;
    }
    // Declare otherwise-empty columns with an explicit zero objective entry.
    if (!wrote) entry_line(out, cname, "OBJ", "0");
  }

  out += "RHS\n";
  if (lp.c0 != 0.0) entry_line(out, "RHS", "OBJ", format_value(-lp.c0));
  for (int r = 0; r < lp.nrows(); ++r)
    if (lp.rhs[r] != 0.0)
      entry_line(out, "RHS", row_name(r), format_value(lp.rhs[r]));

  out += "BOUNDS\n";
  for (int j = 0; j < lp.ncols; ++j) {
    double lo = lp.lb[j], up = lp.ub[j];
    const std::string cname = col_name(j);
    auto bound_line = [&](const char* kind, const std::string& v) {
      std::string line = " ";
      line += kind;
      line += " BND";
      pad_to(line, 14);
      line += cname;
      if (!v.empty()) {
        pad_to(line, 24);
        line += v;
      }
      out += line;
      out += '\n';
    };
    if (lo == up) {
      bound_line("FX", format_value(lo));
      continue;
    }
    bool lo_free = std::isinf(lo);
    bool up_free = std::isinf(up);
    if (lo_free && up_free) {
      bound_line("FR", "");
      continue;
    }
    if (lo_free) bound_line("MI", "");
    else if (lo != 0.0) bound_line("LO", format_value(lo));
    if (!up_free) bound_line("UP", format_value(up));
  }

  out += "ENDATA\n";
  return out;
}

std::string emit_name_map(const SparseLP& lp) {
  std::string out = "mangled\tkind\tblock\titem\tt\n";
  auto ref_fields = [&](const std::vector<BlockRef>& refs, int i,
                        const std::string& fallback) {
    std::string s;
    if (i < static_cast<int>(refs.size())) {
      s = refs[i].block + "\t" + refs[i].item + "\t";
      s += refs[i].t >= 0 ? std::to_string(refs[i].t) : "-";
    } else {
      s = "-\t" + fallback + "\t-";
    }
    return s;
  };
  out += "OBJ\tobj\t-\t-\t-\n";
  for (int r = 0; r < lp.nrows(); ++r)
    out += row_name(r) + "\trow\t" +
           ref_fields(lp.row_ref, r, "row#" + std::to_string(r)) + "\n";
  for (int j = 0; j < lp.ncols; ++j)
    out += col_name(j) + "\tcol\t" +
           ref_fields(lp.col_ref, j, "col#" + std::to_string(j)) + "\n";
  return out;
}

namespace {

struct MpsError : Error {
  MpsError(int line, const std::string& what)
      : Error("mps:" + std::to_string(line) + ": " + what) {}
};

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_value(std::string_view sv, int lineno) {
  double v = 0.0;
  auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (res.ec != std::errc{} || res.ptr != sv.data() + sv.size())
    throw MpsError(lineno, "bad numeric field '" + std::string(sv) + "'");
  return v;
}

} // namespace

SparseLP parse_mps(const std::string& text) {
  SparseLP lp;
  lp.ncols = 0;

  enum Section { None, Rows, Columns, Rhs, Bounds, Done };
  Section section = None;

  std::map<std::string, int, std::less<>> row_ids; // name -> row, -1 for OBJ
  std::map<std::string, int, std::less<>> col_ids;
  bool saw_obj = false;
  bool saw_name = false, saw_endata = false;

  // Per-column explicit bound bookkeeping (defaults are [0, +inf)).
  std::vector<bool> lb_set, ub_set;

  auto column_of = [&](std::string_view name, int lineno) {
    auto it = col_ids.find(name);
    if (it != col_ids.end()) return it->second;
    if (section != Columns)
      throw MpsError(lineno, "unknown column '" + std::string(name) + "'");
    int j = lp.ncols++;
    col_ids.emplace(std::string(name), j);
    lp.c.push_back(0.0);
    lp.lb.push_back(0.0);
    lp.ub.push_back(kInf);
    lb_set.push_back(false);
    ub_set.push_back(false);
    return j;
  };
  auto row_of = [&](std::string_view name, int lineno) {
    auto it = row_ids.find(name);
    if (it == row_ids.end())
      throw MpsError(lineno, "unknown row '" + std::string(name) + "'");
    return it->second;
  };

  // Triplets arrive column-grouped; re-sort to row-major at the end.
  int lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (pos > text.size() && line.empty()) break;
    if (line.empty() || line[0] == '*') continue;

    bool header = line[0] != ' ' && line[0] != '\t';
    std::vector<std::string_view> f = fields(line);
    if (f.empty()) continue;

    if (header) {
      std::string_view kw = f[0];
      if (kw == "NAME") {
        saw_name = true;
        lp.name = f.size() > 1 ? std::string(f[1]) : "";
        continue;
      }
      if (kw == "ROWS") { section = Rows; continue; }
      if (kw == "COLUMNS") { section = Columns; continue; }
      if (kw == "RHS") { section = Rhs; continue; }
      if (kw == "BOUNDS") { section = Bounds; continue; }
      if (kw == "ENDATA") { section = Done; saw_endata = true; break; }
      throw MpsError(lineno, "unsupported section '" + std::string(kw) + "'");
    }

    switch (section) {
      case Rows: {
        if (f.size() != 2) throw MpsError(lineno, "malformed row line");
        std::string name(f[1]);
        if (row_ids.count(name))
          throw MpsError(lineno, "duplicate row name '" + name + "'");
        if (f[0] == "N") {
          if (saw_obj)
            throw MpsError(lineno, "multiple objective (N) rows");
          saw_obj = true;
          row_ids.emplace(name, -1);
          break;
        }
        Sense s;
        if (f[0] == "E") s = Sense::Eq;
        else if (f[0] == "L") s = Sense::Le;
        else if (f[0] == "G") s = Sense::Ge;
        else throw MpsError(lineno, "unknown row sense '" + std::string(f[0]) + "'");
        row_ids.emplace(name, lp.nrows());
        lp.sense.push_back(s);
        lp.rhs.push_back(0.0);
        break;
      }
      case Columns: {
        if (f.size() >= 2 && f[1] == "'MARKER'")
          throw MpsError(lineno, "integer markers are unsupported");
        if (f.size() != 3 && f.size() != 5)
          throw MpsError(lineno, "malformed column line");
        int j = column_of(f[0], lineno);
        for (size_t k = 1; k + 1 < f.size(); k += 2) {
          double v = parse_value(f[k + 1], lineno);
          int r = row_of(f[k], lineno);
          if (r < 0) {
            lp.c[j] += v;
          } else if (v != 0.0) {
            lp.a_row.push_back(r);
            lp.a_col.push_back(j);
            lp.a_val.push_back(v);
          }
        }
        break;
      }
      case Rhs: {
        if (f.size() != 3 && f.size() != 5)
          throw MpsError(lineno, "malformed rhs line");
        for (size_t k = 1; k + 1 < f.size(); k += 2) {
          double v = parse_value(f[k + 1], lineno);
          int r = row_of(f[k], lineno);
          if (r < 0) lp.c0 = -v;
          else lp.rhs[r] = v;
        }
        break;
      }
      case Bounds: {
        std::string_view kind = f[0];
        bool needs_value = kind == "UP" || kind == "LO" || kind == "FX";
        bool known = needs_value || kind == "FR" || kind == "MI" || kind == "PL";
        if (!known)
          throw MpsError(lineno, "unsupported bound type '" +
                                     std::string(kind) + "'");
        if (f.size() != (needs_value ? 4u : 3u))
          throw MpsError(lineno, "malformed bound line");
        int j = column_of(f[2], lineno);
        double v = needs_value ? parse_value(f[3], lineno) : 0.0;
        if (kind == "UP") { lp.ub[j] = v; ub_set[j] = true; }
        else if (kind == "LO") { lp.lb[j] = v; lb_set[j] = true; }
        else if (kind == "FX") { lp.lb[j] = lp.ub[j] = v; lb_set[j] = ub_set[j] = true; }
        else if (kind == "FR") { lp.lb[j] = -kInf; lp.ub[j] = kInf; lb_set[j] = ub_set[j] = true; }
        else if (kind == "MI") { lp.lb[j] = -kInf; lb_set[j] = true; }
        else /* PL */ { lp.ub[j] = kInf; ub_set[j] = true; }
        break;
      }
      case None:
        if (!saw_name)
          throw MpsError(lineno, "data before any section header");
        throw MpsError(lineno, "data outside any section");
      case Done:
        break;
    }
  }
  if (!saw_endata) throw MpsError(lineno, "missing ENDATA");
  if (!saw_obj) throw MpsError(lineno, "no objective (N) row");

  // Restore assembler ordering: row-major, column ascending, summed.
  std::vector<size_t> order(lp.nnz());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (lp.a_row[a] != lp.a_row[b]) return lp.a_row[a] < lp.a_row[b];
    return lp.a_col[a] < lp.a_col[b];
  });
  std::vector<int32_t> rr, cc;
  std::vector<double> vv;
  rr.reserve(order.size());
  cc.reserve(order.size());
  vv.reserve(order.size());
  for (size_t k = 0; k < order.size();) {
    int32_t r = lp.a_row[order[k]], c = lp.a_col[order[k]];
    double sum = 0.0;
    while (k < order.size() && lp.a_row[order[k]] == r &&
           lp.a_col[order[k]] == c)
      sum += lp.a_val[order[k++]];
    if (sum != 0.0) {
      rr.push_back(r);
      cc.push_back(c);
      vv.push_back(sum);
    }
  }
  lp.a_row = std::move(rr);
  lp.a_col = std::move(cc);
  lp.a_val = std::move(vv);
  return lp;
}

} // namespace hubopt
