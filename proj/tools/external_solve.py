#!/usr/bin/env python3
"""Solve a fixed-format MPS file and write a plain "name value" solution.

Usage: external_solve.py MODEL.mps OUT.sol

Reads the MPS subset produced by the exporter (sections NAME, ROWS,
COLUMNS, RHS, BOUNDS, ENDATA; one N objective row; minimization) and hands
the problem to scipy's HiGHS backend. The solution file lists every column
as "<name> <value>"; an infeasible or unbounded model is conveyed by a
single "=infeasible=" or "=unbounded=" line.
"""

import sys

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

INF = float("inf")


class ParseError(Exception):
    pass


def parse_mps(path):
    obj_row = None
    row_sense = {}   # name -> 'E' | 'L' | 'G'
    row_order = []
    cols = {}        # name -> column index
    col_order = []
    entries = []     # (row name, col index, value)
    costs = {}       # col index -> cost
    rhs = {}         # row name -> value
    obj_shift = 0.0
    lo = {}
    up = {}
    fixed = {}
    free = set()
    minus_inf = set()

    section = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                parts = line.split()
                section = parts[0].upper()
                if section not in ("NAME", "ROWS", "COLUMNS", "RHS",
                                   "BOUNDS", "ENDATA"):
                    raise ParseError(f"{path}:{lineno}: unsupported section "
                                     f"{section}")
                if section == "ENDATA":
                    break
                continue
            fields = line.split()
            if section == "ROWS":
                if len(fields) != 2:
                    raise ParseError(f"{path}:{lineno}: malformed row entry")
                kind, name = fields[0].upper(), fields[1]
                if kind == "N":
                    if obj_row is not None:
                        raise ParseError(f"{path}:{lineno}: multiple N rows")
                    obj_row = name
                elif kind in ("E", "L", "G"):
                    row_sense[name] = kind
                    row_order.append(name)
                else:
                    raise ParseError(f"{path}:{lineno}: bad row type {kind}")
            elif section == "COLUMNS":
                if len(fields) < 3 or len(fields) % 2 == 0:
                    raise ParseError(f"{path}:{lineno}: malformed column entry")
                cname = fields[0]
                if cname not in cols:
                    cols[cname] = len(col_order)
                    col_order.append(cname)
                j = cols[cname]
                for rname, sval in zip(fields[1::2], fields[2::2]):
                    value = float(sval)
                    if rname == obj_row:
                        costs[j] = costs.get(j, 0.0) + value
                    elif rname in row_sense:
                        entries.append((rname, j, value))
                    else:
                        raise ParseError(f"{path}:{lineno}: unknown row "
                                         f"{rname}")
            elif section == "RHS":
                if len(fields) < 3 or len(fields) % 2 == 0:
                    raise ParseError(f"{path}:{lineno}: malformed rhs entry")
                for rname, sval in zip(fields[1::2], fields[2::2]):
                    value = float(sval)
                    if rname == obj_row:
                        obj_shift = -value
                    elif rname in row_sense:
                        rhs[rname] = value
                    else:
                        raise ParseError(f"{path}:{lineno}: unknown row "
                                         f"{rname}")
            elif section == "BOUNDS":
                if len(fields) < 3:
                    raise ParseError(f"{path}:{lineno}: malformed bound entry")
                kind, cname = fields[0].upper(), fields[2]
                if cname not in cols:
                    raise ParseError(f"{path}:{lineno}: unknown column "
                                     f"{cname}")
                j = cols[cname]
                if kind in ("UP", "LO", "FX"):
                    if len(fields) < 4:
                        raise ParseError(f"{path}:{lineno}: bound needs a "
                                         "value")
                    value = float(fields[3])
                    if kind == "UP":
                        up[j] = value
                    elif kind == "LO":
                        lo[j] = value
                    else:
                        fixed[j] = value
                elif kind == "FR":
                    free.add(j)
                elif kind == "MI":
                    minus_inf.add(j)
                elif kind == "PL":
                    pass
                else:
                    raise ParseError(f"{path}:{lineno}: unsupported bound "
                                     f"type {kind}")
            elif section == "NAME":
                raise ParseError(f"{path}:{lineno}: data under NAME")

    if obj_row is None:
        raise ParseError(f"{path}: missing objective row")

    n = len(col_order)
    c = np.zeros(n)
    for j, v in costs.items():
        c[j] = v
    bounds = []
    for j in range(n):
        if j in fixed:
            bounds.append((fixed[j], fixed[j]))
            continue
        lb = 0.0
        ub = INF
        if j in free:
            lb = -INF
        if j in minus_inf:
            lb = -INF
        if j in lo:
            lb = lo[j]
        if j in up:
            ub = up[j]
        bounds.append((lb if lb != -INF else None, ub if ub != INF else None))

    row_ids = {name: i for i, name in enumerate(row_order)}
    b = np.zeros(len(row_order))
    for name, v in rhs.items():
        b[row_ids[name]] = v

    eq_rows = [i for i, name in enumerate(row_order) if row_sense[name] == "E"]
    ineq = []  # (row position in A_ub, source row, flip)
    for i, name in enumerate(row_order):
        s = row_sense[name]
        if s == "L":
            ineq.append((i, 1.0))
        elif s == "G":
            ineq.append((i, -1.0))
    eq_pos = {r: k for k, r in enumerate(eq_rows)}
    ub_pos = {r: k for k, (r, _) in enumerate(ineq)}
    flip = {r: f for r, f in ineq}

    eq_triplets = ([], [], [])
    ub_triplets = ([], [], [])
    for rname, j, v in entries:
        i = row_ids[rname]
        if i in eq_pos:
            eq_triplets[0].append(eq_pos[i])
            eq_triplets[1].append(j)
            eq_triplets[2].append(v)
        else:
            ub_triplets[0].append(ub_pos[i])
            ub_triplets[1].append(j)
            ub_triplets[2].append(flip[i] * v)

    a_eq = b_eq = a_ub = b_ub = None
    if eq_rows:
        a_eq = sparse.csr_matrix(
            (eq_triplets[2], (eq_triplets[0], eq_triplets[1])),
            shape=(len(eq_rows), n))
        b_eq = np.array([b[r] for r in eq_rows])
    if ineq:
        a_ub = sparse.csr_matrix(
            (ub_triplets[2], (ub_triplets[0], ub_triplets[1])),
            shape=(len(ineq), n))
        b_ub = np.array([flip[r] * b[r] for r, _ in ineq])

    return col_order, c, obj_shift, a_ub, b_ub, a_eq, b_eq, bounds


def main(argv):
    if len(argv) != 3:
        print("usage: external_solve.py MODEL.mps OUT.sol", file=sys.stderr)
        return 2
    mps_path, sol_path = argv[1], argv[2]
    try:
        col_order, c, shift, a_ub, b_ub, a_eq, b_eq, bounds = \
            parse_mps(mps_path)
    except (ParseError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return 2

    if len(col_order) == 0:
        with open(sol_path, "w") as out:
            out.write("=optimal=\n")
        return 0

    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        with open(sol_path, "w") as out:
            out.write("=infeasible=\n")
        return 0
    if res.status == 3:
        with open(sol_path, "w") as out:
            out.write("=unbounded=\n")
        return 0
    if res.status != 0:
        print(f"solver failed: status {res.status}: {res.message}",
              file=sys.stderr)
        return 1

    with open(sol_path, "w") as out:
        out.write("=optimal=\n")
        out.write(f"# objective {res.fun + shift:.17g}\n")
        for name, value in zip(col_order, res.x):
            out.write(f"{name} {value:.17g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
